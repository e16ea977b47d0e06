//! Core domain model: paragraphs, entities, per-entity states, state changes,
//! action sequences, and the (steps+1) x entities state grid.
//!
//! The transition algebra lives here: [`apply`] advances one entity state by
//! one change, [`diff`] recovers the change between two states, and
//! [`grid_from_sequence`] / [`sequence_from_grid`] convert between the two
//! equivalent views of a paragraph's history.

use std::collections::BTreeSet;
use std::fmt;

/// Number of change kinds (`Move`, `Create`, `Destroy`, `NoChange`).
pub const KIND_COUNT: usize = 4;

/// The four per-entity change kinds, in the canonical tensor order used by
/// logits files: `Move`, `Create`, `Destroy`, `NoChange`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChangeKind {
    Move,
    Create,
    Destroy,
    NoChange,
}

impl ChangeKind {
    /// All kinds in tensor order.
    pub const ALL: [ChangeKind; KIND_COUNT] = [
        ChangeKind::Move,
        ChangeKind::Create,
        ChangeKind::Destroy,
        ChangeKind::NoChange,
    ];

    /// Tensor index of this kind (row-major K axis of a logits block).
    pub fn index(self) -> usize {
        match self {
            ChangeKind::Move => 0,
            ChangeKind::Create => 1,
            ChangeKind::Destroy => 2,
            ChangeKind::NoChange => 3,
        }
    }

    /// Inverse of [`ChangeKind::index`].
    pub fn from_index(i: usize) -> Option<ChangeKind> {
        ChangeKind::ALL.get(i).copied()
    }

    /// Rank used for lexicographic tie-breaking between candidate sequences.
    ///
    /// `NoChange` sorts first so that among equal-scored sequences the one
    /// asserting the fewest changes wins deterministically.
    pub fn tie_rank(self) -> u8 {
        match self {
            ChangeKind::NoChange => 0,
            ChangeKind::Move => 1,
            ChangeKind::Create => 2,
            ChangeKind::Destroy => 3,
        }
    }

    /// Upper-case token used in tabular files (`MOVE`, `CREATE`, `DESTROY`, `NONE`).
    pub fn label(self) -> &'static str {
        match self {
            ChangeKind::Move => "MOVE",
            ChangeKind::Create => "CREATE",
            ChangeKind::Destroy => "DESTROY",
            ChangeKind::NoChange => "NONE",
        }
    }

    /// Parse a tabular-file kind token.
    pub fn from_label(s: &str) -> Option<ChangeKind> {
        match s {
            "MOVE" => Some(ChangeKind::Move),
            "CREATE" => Some(ChangeKind::Create),
            "DESTROY" => Some(ChangeKind::Destroy),
            "NONE" => Some(ChangeKind::NoChange),
            _ => None,
        }
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A location value: either an explicit span of text or an unknown-but-present
/// placeholder (rendered `?` in files).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Unknown,
    Span(String),
}

impl Location {
    /// Build a span location. Span text must be non-empty and must not be one
    /// of the reserved file tokens `?` / `-`.
    pub fn span(text: impl Into<String>) -> Location {
        let text = text.into();
        debug_assert!(!text.is_empty(), "span text must be non-empty");
        debug_assert!(text != "?" && text != "-", "span text collides with a reserved token");
        Location::Span(text)
    }

    /// File rendering: `?` for unknown, the raw span text otherwise.
    pub fn as_token(&self) -> &str {
        match self {
            Location::Unknown => "?",
            Location::Span(s) => s.as_str(),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_token())
    }
}

/// State of one entity at one grid row: absent, or present at a location.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EntityState {
    Nonexistent,
    Exists(Location),
}

impl EntityState {
    pub fn exists(&self) -> bool {
        matches!(self, EntityState::Exists(_))
    }

    pub fn location(&self) -> Option<&Location> {
        match self {
            EntityState::Nonexistent => None,
            EntityState::Exists(loc) => Some(loc),
        }
    }

    /// File rendering: `-` for nonexistent, otherwise the location token.
    pub fn as_token(&self) -> &str {
        match self {
            EntityState::Nonexistent => "-",
            EntityState::Exists(loc) => loc.as_token(),
        }
    }

    /// Parse a grid cell: `-` is nonexistent, `?` is present-at-unknown,
    /// anything else is a span location.
    pub fn from_token(tok: &str) -> EntityState {
        match tok {
            "-" => EntityState::Nonexistent,
            "?" => EntityState::Exists(Location::Unknown),
            other => EntityState::Exists(Location::Span(other.to_string())),
        }
    }
}

impl fmt::Display for EntityState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_token())
    }
}

/// One per-entity state change. Parameter slots are encoded structurally:
/// `Move` carries before and after, `Create` only after, `Destroy` only
/// before, `NoChange` nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateChange {
    Move { before: Location, after: Location },
    Create { after: Location },
    Destroy { before: Location },
    NoChange,
}

impl StateChange {
    pub fn kind(&self) -> ChangeKind {
        match self {
            StateChange::Move { .. } => ChangeKind::Move,
            StateChange::Create { .. } => ChangeKind::Create,
            StateChange::Destroy { .. } => ChangeKind::Destroy,
            StateChange::NoChange => ChangeKind::NoChange,
        }
    }

    pub fn before(&self) -> Option<&Location> {
        match self {
            StateChange::Move { before, .. } | StateChange::Destroy { before } => Some(before),
            _ => None,
        }
    }

    pub fn after(&self) -> Option<&Location> {
        match self {
            StateChange::Move { after, .. } | StateChange::Create { after } => Some(after),
            _ => None,
        }
    }

    /// Canonical form: a `Move` whose endpoints are equal is `NoChange`.
    pub fn normalized(self) -> StateChange {
        match self {
            StateChange::Move { before, after } if before == after => StateChange::NoChange,
            other => other,
        }
    }
}

/// A change was applied to a state that cannot accept it: `Create` on an
/// existing entity, or `Move`/`Destroy` on a nonexistent one.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal {kind} on {} entity", if *.exists { "an existing" } else { "a nonexistent" })]
pub struct IllegalTransition {
    pub kind: ChangeKind,
    pub exists: bool,
}

/// [`grid_from_sequence`] hit an illegal transition, located by step and entity.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {step}, entity {entity}: {source}")]
pub struct GridReplayError {
    /// 1-based step (sentence) index.
    pub step: usize,
    /// Entity id.
    pub entity: String,
    pub source: IllegalTransition,
}

/// Advance one entity state by one change.
pub fn apply(state: &EntityState, change: &StateChange) -> Result<EntityState, IllegalTransition> {
    match change {
        StateChange::NoChange => Ok(state.clone()),
        StateChange::Move { after, .. } => {
            if state.exists() {
                Ok(EntityState::Exists(after.clone()))
            } else {
                Err(IllegalTransition { kind: ChangeKind::Move, exists: false })
            }
        }
        StateChange::Create { after } => {
            if state.exists() {
                Err(IllegalTransition { kind: ChangeKind::Create, exists: true })
            } else {
                Ok(EntityState::Exists(after.clone()))
            }
        }
        StateChange::Destroy { .. } => {
            if state.exists() {
                Ok(EntityState::Nonexistent)
            } else {
                Err(IllegalTransition { kind: ChangeKind::Destroy, exists: false })
            }
        }
    }
}

/// Total variant of [`apply`] used for auditing and for decoding with hard
/// constraints disabled: an inapplicable change leaves existence unchanged,
/// except `Create` and `Destroy`, which force the asserted existence.
pub fn apply_lenient(state: &EntityState, change: &StateChange) -> EntityState {
    match change {
        StateChange::NoChange => state.clone(),
        StateChange::Move { after, .. } => {
            if state.exists() {
                EntityState::Exists(after.clone())
            } else {
                EntityState::Nonexistent
            }
        }
        StateChange::Create { after } => EntityState::Exists(after.clone()),
        StateChange::Destroy { .. } => EntityState::Nonexistent,
    }
}

/// The unique normalized change that takes `before` to `after`.
///
/// Total: equal states diff to `NoChange`, never to a degenerate `Move`.
pub fn diff(before: &EntityState, after: &EntityState) -> StateChange {
    match (before, after) {
        (EntityState::Nonexistent, EntityState::Nonexistent) => StateChange::NoChange,
        (EntityState::Nonexistent, EntityState::Exists(loc)) => {
            StateChange::Create { after: loc.clone() }
        }
        (EntityState::Exists(loc), EntityState::Nonexistent) => {
            StateChange::Destroy { before: loc.clone() }
        }
        (EntityState::Exists(a), EntityState::Exists(b)) => {
            if a == b {
                StateChange::NoChange
            } else {
                StateChange::Move { before: a.clone(), after: b.clone() }
            }
        }
    }
}

/// One sentence of a paragraph. Tokens are the whitespace split of `text`;
/// a lowercased copy is kept for mention matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// 1-based step number.
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    tokens_lower: Vec<String>,
}

impl Sentence {
    pub fn new(index: usize, text: impl Into<String>) -> Sentence {
        let text = text.into();
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        let tokens_lower = tokens.iter().map(|t| t.to_lowercase()).collect();
        Sentence { index, text, tokens, tokens_lower }
    }

    pub fn tokens_lower(&self) -> &[String] {
        &self.tokens_lower
    }
}

/// A tracked participant. `id` is the canonical mention and is always a
/// member of the mention set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    mentions: BTreeSet<String>,
    /// Lowercased token sequences of every mention, for subsequence matching.
    mention_tokens: Vec<Vec<String>>,
}

impl Entity {
    pub fn new<S: Into<String>>(id: impl Into<String>, extra_mentions: impl IntoIterator<Item = S>) -> Entity {
        let id = id.into();
        let mut mentions: BTreeSet<String> = extra_mentions.into_iter().map(Into::into).collect();
        mentions.insert(id.clone());
        let mention_tokens = mentions
            .iter()
            .map(|m| m.to_lowercase().split_whitespace().map(str::to_string).collect())
            .collect();
        Entity { id, mentions, mention_tokens }
    }

    pub fn mentions(&self) -> &BTreeSet<String> {
        &self.mentions
    }

    /// Start offsets and lengths of every occurrence of any mention of this
    /// entity in `sentence`, as case-insensitive contiguous token matches.
    pub fn occurrences_in(&self, sentence: &Sentence) -> Vec<(usize, usize)> {
        let toks = sentence.tokens_lower();
        let mut hits = Vec::new();
        for mention in &self.mention_tokens {
            if mention.is_empty() || mention.len() > toks.len() {
                continue;
            }
            for start in 0..=(toks.len() - mention.len()) {
                if toks[start..start + mention.len()] == mention[..] {
                    hits.push((start, mention.len()));
                }
            }
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    }

    /// Whether any mention of this entity occurs in `sentence`.
    pub fn mentioned_in(&self, sentence: &Sentence) -> bool {
        !self.occurrences_in(sentence).is_empty()
    }
}

/// A procedural paragraph: ordered sentences plus the tracked entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub id: String,
    pub topic: String,
    pub sentences: Vec<Sentence>,
    pub entities: Vec<Entity>,
}

/// A paragraph failed its structural invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("paragraph {id}: {msg}")]
pub struct InvalidParagraph {
    pub id: String,
    pub msg: String,
}

impl Paragraph {
    /// Build and validate: at least one sentence, at least one entity, unique
    /// entity ids, contiguous 1-based sentence indices.
    pub fn new(
        id: impl Into<String>,
        topic: impl Into<String>,
        sentences: Vec<Sentence>,
        entities: Vec<Entity>,
    ) -> Result<Paragraph, InvalidParagraph> {
        let id = id.into();
        let invalid = |msg: &str| InvalidParagraph { id: id.clone(), msg: msg.to_string() };
        if sentences.is_empty() {
            return Err(invalid("a paragraph needs at least one sentence"));
        }
        if entities.is_empty() {
            return Err(invalid("a paragraph needs at least one entity"));
        }
        for (i, s) in sentences.iter().enumerate() {
            if s.index != i + 1 {
                return Err(invalid(&format!(
                    "sentence {} carries index {}, expected {}",
                    i + 1,
                    s.index,
                    i + 1
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &entities {
            if e.id.is_empty() {
                return Err(invalid("entity ids must be non-empty"));
            }
            if !seen.insert(e.id.clone()) {
                return Err(invalid(&format!("duplicate entity id {:?}", e.id)));
            }
        }
        Ok(Paragraph { id: id.clone(), topic: topic.into(), sentences, entities })
    }

    /// Number of steps `T` (= number of sentences).
    pub fn step_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Position of an entity id in the entity list.
    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }
}

/// The joint change of every entity at one step. `changes[j]` lines up with
/// `Paragraph::entities[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepAction {
    pub changes: Vec<StateChange>,
}

impl StepAction {
    pub fn kinds(&self) -> Vec<ChangeKind> {
        self.changes.iter().map(StateChange::kind).collect()
    }
}

/// A full decoded history: one [`StepAction`] per sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSequence {
    pub steps: Vec<StepAction>,
}

impl ActionSequence {
    pub fn kinds(&self) -> Vec<Vec<ChangeKind>> {
        self.steps.iter().map(StepAction::kinds).collect()
    }

    /// Normalize every change (degenerate moves become `NoChange`).
    pub fn normalized(self) -> ActionSequence {
        ActionSequence {
            steps: self
                .steps
                .into_iter()
                .map(|s| StepAction { changes: s.changes.into_iter().map(StateChange::normalized).collect() })
                .collect(),
        }
    }
}

/// A (T+1) x |E| matrix of entity states; row 0 is the initial state, row t
/// the state after sentence t. Rectangularity is guaranteed by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    rows: Vec<Vec<EntityState>>,
}

/// The rows handed to [`Grid::new`] were not a non-empty rectangle.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("grid rows must be a non-empty rectangle: {msg}")]
pub struct InvalidGrid {
    pub msg: String,
}

impl Grid {
    pub fn new(rows: Vec<Vec<EntityState>>) -> Result<Grid, InvalidGrid> {
        if rows.is_empty() {
            return Err(InvalidGrid { msg: "no rows".to_string() });
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(InvalidGrid { msg: "rows are empty".to_string() });
        }
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(InvalidGrid {
                msg: format!("row {} has {} cells, expected {}", i, rows[i].len(), width),
            });
        }
        Ok(Grid { rows })
    }

    pub fn rows(&self) -> &[Vec<EntityState>] {
        &self.rows
    }

    /// Row `t`: the state after step `t` (row 0 is initial).
    pub fn row(&self, t: usize) -> &[EntityState] {
        &self.rows[t]
    }

    pub fn initial_row(&self) -> &[EntityState] {
        &self.rows[0]
    }

    pub fn final_row(&self) -> &[EntityState] {
        &self.rows[self.rows.len() - 1]
    }

    /// Number of steps `T` (one less than the row count).
    pub fn step_count(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn entity_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn state(&self, t: usize, j: usize) -> &EntityState {
        &self.rows[t][j]
    }
}

/// Replay a sequence from an initial row into a full grid. Fails on the first
/// illegal transition, reporting its (step, entity) coordinates.
pub fn grid_from_sequence(
    initial: &[EntityState],
    seq: &ActionSequence,
    entity_ids: &[String],
) -> Result<Grid, GridReplayError> {
    debug_assert_eq!(initial.len(), entity_ids.len());
    let mut rows = Vec::with_capacity(seq.steps.len() + 1);
    rows.push(initial.to_vec());
    for (t0, step) in seq.steps.iter().enumerate() {
        debug_assert_eq!(step.changes.len(), initial.len(), "step arity must match entity count");
        let prev = &rows[t0];
        let mut next = Vec::with_capacity(prev.len());
        for (j, change) in step.changes.iter().enumerate() {
            match apply(&prev[j], change) {
                Ok(state) => next.push(state),
                Err(source) => {
                    return Err(GridReplayError {
                        step: t0 + 1,
                        entity: entity_ids.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
                        source,
                    })
                }
            }
        }
        rows.push(next);
    }
    Ok(Grid { rows })
}

/// Total replay used for auditing and for sequences decoded with hard
/// constraints off: every cell advances via [`apply_lenient`].
pub fn grid_from_sequence_lenient(initial: &[EntityState], seq: &ActionSequence) -> Grid {
    let mut rows = Vec::with_capacity(seq.steps.len() + 1);
    rows.push(initial.to_vec());
    for (t0, step) in seq.steps.iter().enumerate() {
        let prev = &rows[t0];
        let next = step
            .changes
            .iter()
            .enumerate()
            .map(|(j, change)| apply_lenient(&prev[j], change))
            .collect();
        rows.push(next);
    }
    Grid { rows }
}

/// Read the normalized change sequence off a grid by diffing adjacent rows.
pub fn sequence_from_grid(grid: &Grid) -> ActionSequence {
    let mut steps = Vec::with_capacity(grid.step_count());
    for t in 1..=grid.step_count() {
        let changes = (0..grid.entity_count())
            .map(|j| diff(grid.state(t - 1, j), grid.state(t, j)))
            .collect();
        steps.push(StepAction { changes });
    }
    ActionSequence { steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: &str) -> Location {
        Location::span(s)
    }

    #[test]
    fn apply_covers_every_legal_transition() {
        let at_soil = EntityState::Exists(span("soil"));
        // Move relocates an existing entity regardless of the before slot.
        assert_eq!(
            apply(&at_soil, &StateChange::Move { before: Location::Unknown, after: span("leaf") }),
            Ok(EntityState::Exists(span("leaf")))
        );
        assert_eq!(
            apply(&EntityState::Nonexistent, &StateChange::Create { after: Location::Unknown }),
            Ok(EntityState::Exists(Location::Unknown))
        );
        assert_eq!(
            apply(&at_soil, &StateChange::Destroy { before: span("soil") }),
            Ok(EntityState::Nonexistent)
        );
        assert_eq!(apply(&EntityState::Nonexistent, &StateChange::NoChange), Ok(EntityState::Nonexistent));
    }

    #[test]
    fn apply_rejects_create_on_existing_and_move_destroy_on_nonexistent() {
        let at_soil = EntityState::Exists(span("soil"));
        assert_eq!(
            apply(&at_soil, &StateChange::Create { after: span("leaf") }),
            Err(IllegalTransition { kind: ChangeKind::Create, exists: true })
        );
        assert_eq!(
            apply(&EntityState::Nonexistent, &StateChange::Move { before: span("a"), after: span("b") }),
            Err(IllegalTransition { kind: ChangeKind::Move, exists: false })
        );
        assert_eq!(
            apply(&EntityState::Nonexistent, &StateChange::Destroy { before: span("a") }),
            Err(IllegalTransition { kind: ChangeKind::Destroy, exists: false })
        );
    }

    #[test]
    fn diff_is_total_and_normalized() {
        let a = EntityState::Exists(span("soil"));
        let b = EntityState::Exists(span("leaf"));
        assert_eq!(diff(&a, &b), StateChange::Move { before: span("soil"), after: span("leaf") });
        assert_eq!(diff(&a, &a), StateChange::NoChange);
        assert_eq!(diff(&EntityState::Nonexistent, &a), StateChange::Create { after: span("soil") });
        assert_eq!(diff(&a, &EntityState::Nonexistent), StateChange::Destroy { before: span("soil") });
        assert_eq!(diff(&EntityState::Nonexistent, &EntityState::Nonexistent), StateChange::NoChange);
    }

    #[test]
    fn degenerate_move_normalizes_to_nochange() {
        let m = StateChange::Move { before: span("x"), after: span("x") };
        assert_eq!(m.normalized(), StateChange::NoChange);
        let m = StateChange::Move { before: Location::Unknown, after: span("x") };
        assert_eq!(m.clone().normalized(), m);
    }

    #[test]
    fn apply_then_diff_recovers_the_normalized_change() {
        let states = [
            EntityState::Nonexistent,
            EntityState::Exists(Location::Unknown),
            EntityState::Exists(span("soil")),
        ];
        let changes = [
            StateChange::NoChange,
            StateChange::Create { after: span("leaf") },
            StateChange::Create { after: Location::Unknown },
            StateChange::Destroy { before: span("soil") },
            StateChange::Move { before: span("soil"), after: span("leaf") },
            StateChange::Move { before: Location::Unknown, after: span("leaf") },
        ];
        for s in &states {
            for c in &changes {
                if let Ok(next) = apply(s, c) {
                    // The diff must map s to next; it equals the applied change
                    // whenever the change's before slot matches the state.
                    assert_eq!(apply(s, &diff(s, &next)), Ok(next.clone()));
                }
            }
        }
    }

    #[test]
    fn grid_replay_reports_step_and_entity() {
        let initial = vec![EntityState::Nonexistent, EntityState::Exists(span("soil"))];
        let ids = vec!["water".to_string(), "root".to_string()];
        let seq = ActionSequence {
            steps: vec![
                StepAction {
                    changes: vec![StateChange::NoChange, StateChange::NoChange],
                },
                StepAction {
                    changes: vec![
                        StateChange::Move { before: span("a"), after: span("b") },
                        StateChange::NoChange,
                    ],
                },
            ],
        };
        let err = grid_from_sequence(&initial, &seq, &ids).unwrap_err();
        assert_eq!(err.step, 2);
        assert_eq!(err.entity, "water");
        assert_eq!(err.source.kind, ChangeKind::Move);
    }

    #[test]
    fn sequence_from_grid_round_trips_through_replay() {
        let rows = vec![
            vec![EntityState::Exists(Location::Unknown), EntityState::Nonexistent],
            vec![EntityState::Exists(span("turbine")), EntityState::Nonexistent],
            vec![EntityState::Exists(span("turbine")), EntityState::Exists(span("plant"))],
            vec![EntityState::Nonexistent, EntityState::Exists(span("plant"))],
        ];
        let grid = Grid::new(rows).unwrap();
        let seq = sequence_from_grid(&grid);
        let ids = vec!["water".to_string(), "power".to_string()];
        let replayed = grid_from_sequence(grid.initial_row(), &seq, &ids).unwrap();
        assert_eq!(replayed, grid);
        // And the derived sequence is already normalized.
        assert_eq!(seq.clone().normalized(), seq);
    }

    #[test]
    fn mention_matching_is_case_insensitive_and_multi_token() {
        let s = Sentence::new(1, "The moving water spins the turbines .");
        let water = Entity::new("water", ["moving water"]);
        assert_eq!(water.occurrences_in(&s), vec![(1, 2), (2, 1)]);
        let turbines = Entity::new("turbines", Vec::<String>::new());
        assert_eq!(turbines.occurrences_in(&s), vec![(5, 1)]);
        let generator = Entity::new("generator", Vec::<String>::new());
        assert!(!generator.mentioned_in(&s));
    }

    #[test]
    fn paragraph_validation_catches_structural_errors() {
        let s1 = Sentence::new(1, "Water flows .");
        assert!(Paragraph::new("p", "t", vec![], vec![Entity::new("w", Vec::<String>::new())]).is_err());
        assert!(Paragraph::new("p", "t", vec![s1.clone()], vec![]).is_err());
        let dup = Paragraph::new(
            "p",
            "t",
            vec![s1.clone()],
            vec![Entity::new("w", Vec::<String>::new()), Entity::new("w", Vec::<String>::new())],
        );
        assert!(dup.is_err());
        let bad_index = Paragraph::new("p", "t", vec![Sentence::new(7, "Water flows .")], vec![Entity::new("w", Vec::<String>::new())]);
        assert!(bad_index.is_err());
    }
}
