//! Constrained search over joint per-step change assignments.
//!
//! A search node is a prefix of kind rows (one kind per entity per completed
//! step). Expanding a node enumerates the joint assignments for the next
//! sentence, discards those the hard rules reject, scores the survivors by
//! mixing logits with log-priors, and normalizes the scores to weights with a
//! softmax; a child's cumulative score adds the log of its weight. Beam
//! search keeps the global top-k nodes per depth; [`exhaustive_search`] is
//! the brute-force oracle used to validate it on small instances.
//!
//! Normalizing with a softmax (rather than dividing raw mixed scores by
//! their sum, which is sign-unstable once log-priors push scores negative)
//! is the one deliberate departure from a plain ratio; it is monotone in the
//! raw score, so ranking within an expansion is unchanged.

use crate::constraints::{
    allowable_extension, build_mention_index, entity_kind_allowed, HardConstraintConfig,
    MentionIndex, NodeSummary,
};
use crate::domain::{
    grid_from_sequence_lenient, ActionSequence, ChangeKind, EntityState, Grid, Location,
    Paragraph, StateChange, StepAction, KIND_COUNT,
};
use crate::priors::PriorTable;
use crate::scorer::{ParamSlot, StepLogits};

/// Upper bound on `K^(|E|·T)` for the exhaustive oracle. Beyond this the
/// enumeration is refused rather than attempted.
pub const EXACT_SEQUENCE_CAP: f64 = 1e8;

/// Search hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    /// Global top-k kept per depth.
    pub beam_width: usize,
    /// Mixing weight on logits in [0, 1]; `1 - lambda` goes to log-priors.
    pub lambda: f64,
    /// Prune expansions with the hard rules.
    pub use_hard: bool,
    /// Mix priors into expansion scores.
    pub use_soft: bool,
    /// Entity cap for the exhaustive oracle.
    pub max_entities_for_exact: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam_width: 10,
            lambda: 0.5,
            use_hard: true,
            use_soft: true,
            max_entities_for_exact: 4,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::InvalidConfig("beam width must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(DecodeError::InvalidConfig(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.max_entities_for_exact == 0 {
            return Err(DecodeError::InvalidConfig(
                "max_entities_for_exact must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    /// No allowable expansion existed at `step` (unreachable under the six
    /// default rules, which always admit the all-`NoChange` row; surfaced
    /// rather than silently skipped for pathological configurations).
    #[error("no allowable expansion at step {step}")]
    DeadEnd { step: usize },
    /// The exhaustive oracle refused: the instance exceeds its caps.
    #[error(
        "exact search over {entities} entities x {steps} steps exceeds the cap \
         (entity limit {entity_limit}, sequence limit {sequence_cap:e})"
    )]
    InstanceTooLarge {
        entities: usize,
        steps: usize,
        entity_limit: usize,
        sequence_cap: f64,
    },
    #[error("invalid decode setup: {0}")]
    InvalidConfig(String),
}

/// Everything one paragraph decode reads. Immutable; decoding across
/// paragraphs may share one set of these per thread.
#[derive(Debug, Clone, Copy)]
pub struct DecodeContext<'a> {
    pub paragraph: &'a Paragraph,
    /// Entity states before sentence 1, aligned with `paragraph.entities`.
    pub initial: &'a [EntityState],
    pub logits: &'a StepLogits,
    /// Prior table; only consulted when `decoder.use_soft` is set.
    pub priors: Option<&'a PriorTable>,
    pub hard: &'a HardConstraintConfig,
    pub decoder: &'a DecoderConfig,
}

/// Per-entity log-priors over the four kinds, precomputed for one paragraph.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorGrid {
    log_p: Vec<[f64; KIND_COUNT]>,
}

impl PriorGrid {
    pub fn new(table: &PriorTable, paragraph: &Paragraph) -> PriorGrid {
        let log_p = paragraph
            .entities
            .iter()
            .map(|e| {
                let mut row = [0.0; KIND_COUNT];
                for kind in ChangeKind::ALL {
                    row[kind.index()] = table.prior(e, &paragraph.topic, kind).ln();
                }
                row
            })
            .collect();
        PriorGrid { log_p }
    }

    /// Build directly from probabilities (mainly for tests and calibration
    /// tables that bypass counting).
    pub fn from_probabilities(probs: Vec<[f64; KIND_COUNT]>) -> PriorGrid {
        PriorGrid {
            log_p: probs
                .into_iter()
                .map(|row| {
                    let mut out = [0.0; KIND_COUNT];
                    for (o, p) in out.iter_mut().zip(row) {
                        *o = p.ln();
                    }
                    out
                })
                .collect(),
        }
    }

    pub fn log_prior(&self, j: usize, kind: ChangeKind) -> f64 {
        self.log_p[j][kind.index()]
    }
}

/// Softmax with max-subtraction. Returns the probabilities and the absolute
/// deviation of their sum from 1 (the normalization defect, tracked in
/// [`SearchStats`]).
pub(crate) fn softmax(xs: &[f64]) -> (Vec<f64>, f64) {
    if xs.is_empty() {
        return (Vec::new(), 0.0);
    }
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let err = (probs.iter().sum::<f64>() - 1.0).abs();
    (probs, err)
}

/// Mixed score of one joint assignment at 0-based step offset `t0`:
/// `sum_j lambda * logit + (1 - lambda) * log prior`. With `soft` absent the
/// prior term is dropped and `lambda` is treated as 1.
pub fn expansion_score(
    logits: &StepLogits,
    soft: Option<(&PriorGrid, f64)>,
    kinds: &[ChangeKind],
    t0: usize,
) -> f64 {
    match soft {
        None => kinds
            .iter()
            .enumerate()
            .map(|(j, &k)| logits.logit(t0, j, k))
            .sum(),
        Some((grid, lambda)) => kinds
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                lambda * logits.logit(t0, j, k) + (1.0 - lambda) * grid.log_prior(j, k)
            })
            .sum(),
    }
}

/// Joint kind assignments for the next step that pass the hard rules (all
/// `K^|E|` of them when `hard` is `None`). Enumeration fixes each entity's
/// admissible kinds first — the factored prefilter — then walks their product
/// and applies the joint rule; this must match naive enumerate-then-filter
/// exactly, which the tests check.
pub(crate) fn step_survivors(
    summary: &NodeSummary,
    t: usize,
    mentions: &MentionIndex,
    hard: Option<&HardConstraintConfig>,
    entity_count: usize,
) -> Vec<Vec<ChangeKind>> {
    let allowed: Vec<Vec<ChangeKind>> = (0..entity_count)
        .map(|j| match hard {
            None => ChangeKind::ALL.to_vec(),
            Some(cfg) => ChangeKind::ALL
                .into_iter()
                .filter(|&k| entity_kind_allowed(summary, j, k, t, mentions, cfg))
                .collect(),
        })
        .collect();
    if allowed.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut survivors = Vec::new();
    let mut idx = vec![0usize; entity_count];
    loop {
        let kinds: Vec<ChangeKind> = idx.iter().zip(&allowed).map(|(&i, a)| a[i]).collect();
        let keep = match hard {
            None => true,
            Some(cfg) => allowable_extension(summary, &kinds, t, mentions, cfg),
        };
        if keep {
            survivors.push(kinds);
        }
        // Odometer increment, last entity fastest.
        let mut j = entity_count;
        loop {
            if j == 0 {
                return survivors;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < allowed[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// A partial decode: kind rows for the first `depth()` sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    /// One kind row per completed step.
    pub kinds: Vec<Vec<ChangeKind>>,
    /// Accumulated log of normalized expansion weights; 0 at the root.
    pub score: f64,
    /// Replay summary of `kinds` from the initial row (maintained
    /// incrementally, equal to a fresh replay by construction).
    pub summary: NodeSummary,
    /// Tie-break key: flattened canonical kind ranks, `NoChange` least.
    tie: Vec<u8>,
}

impl SearchNode {
    pub fn root(initial: &[EntityState], sentence_count: usize) -> SearchNode {
        SearchNode {
            kinds: Vec::new(),
            score: 0.0,
            summary: NodeSummary::new(initial, sentence_count),
            tie: Vec::new(),
        }
    }

    /// Number of completed steps.
    pub fn depth(&self) -> usize {
        self.kinds.len()
    }

    fn child(&self, kinds: Vec<ChangeKind>, score: f64) -> SearchNode {
        let summary = self.summary.advance(&kinds);
        let mut tie = self.tie.clone();
        tie.extend(kinds.iter().map(|k| k.tie_rank()));
        let mut rows = self.kinds.clone();
        rows.push(kinds);
        SearchNode { kinds: rows, score, summary, tie }
    }
}

/// One scored expansion of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    /// The kind row appended by this expansion.
    pub kinds: Vec<ChangeKind>,
    /// Normalized weight among this node's survivors; siblings sum to 1.
    pub weight: f64,
    pub child: SearchNode,
}

/// Prepared per-paragraph expansion machinery: mention index, log-prior grid,
/// and the flag-resolved scoring mode.
pub struct Expander<'a> {
    logits: &'a StepLogits,
    mentions: MentionIndex,
    prior_grid: Option<PriorGrid>,
    lambda: f64,
    hard: Option<&'a HardConstraintConfig>,
    entity_count: usize,
    step_count: usize,
    initial: &'a [EntityState],
}

impl<'a> Expander<'a> {
    pub fn new(ctx: &DecodeContext<'a>) -> Expander<'a> {
        let prior_grid = if ctx.decoder.use_soft {
            ctx.priors.map(|t| PriorGrid::new(t, ctx.paragraph))
        } else {
            None
        };
        Expander {
            logits: ctx.logits,
            mentions: build_mention_index(ctx.paragraph),
            prior_grid,
            lambda: ctx.decoder.lambda,
            hard: ctx.decoder.use_hard.then_some(ctx.hard),
            entity_count: ctx.paragraph.entity_count(),
            step_count: ctx.paragraph.step_count(),
            initial: ctx.initial,
        }
    }

    pub fn root(&self) -> SearchNode {
        SearchNode::root(self.initial, self.step_count)
    }

    /// All surviving one-step extensions of `node`, weighted. Requires
    /// `node.depth() < T`. Empty exactly when no assignment survives.
    pub fn expand(&self, node: &SearchNode) -> Vec<Expansion> {
        debug_assert!(node.depth() < self.step_count);
        let t = node.depth() + 1;
        let survivors =
            step_survivors(&node.summary, t, &self.mentions, self.hard, self.entity_count);
        let soft = self.prior_grid.as_ref().map(|g| (g, self.lambda));
        let phis: Vec<f64> = survivors
            .iter()
            .map(|kinds| expansion_score(self.logits, soft, kinds, t - 1))
            .collect();
        let (weights, _) = softmax(&phis);
        survivors
            .into_iter()
            .zip(weights)
            .map(|(kinds, weight)| {
                // Clamp so a numerically zero weight still yields a finite
                // (hugely negative) cumulative score.
                let score = node.score + weight.max(1e-300).ln();
                Expansion { child: node.child(kinds.clone(), score), kinds, weight }
            })
            .collect()
    }
}

/// Counters for search effort and numerical health.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchStats {
    /// Nodes whose expansions were enumerated.
    pub expansions: u64,
    /// Children generated across all expansions.
    pub nodes_generated: u64,
    /// Worst observed deviation of an expansion's weight sum from 1.
    pub max_weight_sum_err: f64,
}

impl SearchStats {
    fn absorb(&mut self, expansions: &[Expansion]) {
        self.expansions += 1;
        self.nodes_generated += expansions.len() as u64;
        if !expansions.is_empty() {
            let err = (expansions.iter().map(|e| e.weight).sum::<f64>() - 1.0).abs();
            self.max_weight_sum_err = self.max_weight_sum_err.max(err);
        }
    }
}

/// A completed decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    /// Kind rows with location parameters filled from the candidate rankings.
    pub sequence: ActionSequence,
    /// The sequence replayed over the initial row.
    pub grid: Grid,
    /// Accumulated log-weight of the winning sequence.
    pub score: f64,
    pub stats: SearchStats,
}

fn validate_inputs(ctx: &DecodeContext<'_>) -> Result<(), DecodeError> {
    ctx.decoder.validate()?;
    ctx.hard
        .validate()
        .map_err(|e| DecodeError::InvalidConfig(e.to_string()))?;
    if ctx.initial.len() != ctx.paragraph.entity_count() {
        return Err(DecodeError::InvalidConfig(format!(
            "initial row has {} states for {} entities",
            ctx.initial.len(),
            ctx.paragraph.entity_count()
        )));
    }
    if ctx.logits.step_count() != ctx.paragraph.step_count()
        || ctx.logits.entity_count() != ctx.paragraph.entity_count()
    {
        return Err(DecodeError::InvalidConfig(format!(
            "logit block is {} steps x {} entities but the paragraph is {} x {}",
            ctx.logits.step_count(),
            ctx.logits.entity_count(),
            ctx.paragraph.step_count(),
            ctx.paragraph.entity_count()
        )));
    }
    Ok(())
}

/// Highest cumulative score first; among exact ties, the lexicographically
/// least canonical kind encoding (all-`NoChange` sorts before everything).
fn rank(nodes: &mut [SearchNode]) {
    nodes.sort_unstable_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tie.cmp(&b.tie)));
}

fn finish(ctx: &DecodeContext<'_>, best: SearchNode, stats: SearchStats) -> DecodeOutcome {
    let sequence = decode_parameters(&best.kinds, ctx.logits);
    let grid = grid_from_sequence_lenient(ctx.initial, &sequence);
    DecodeOutcome { sequence, grid, score: best.score, stats }
}

/// Width-bounded best-first search. Deterministic: ties are broken by the
/// canonical kind encoding at every truncation.
pub fn beam_search(ctx: &DecodeContext<'_>) -> Result<DecodeOutcome, DecodeError> {
    validate_inputs(ctx)?;
    let expander = Expander::new(ctx);
    let mut stats = SearchStats::default();
    let mut frontier = vec![expander.root()];
    for t in 1..=ctx.paragraph.step_count() {
        let mut pool = Vec::new();
        for node in &frontier {
            let expansions = expander.expand(node);
            stats.absorb(&expansions);
            pool.extend(expansions.into_iter().map(|e| e.child));
        }
        if pool.is_empty() {
            return Err(DecodeError::DeadEnd { step: t });
        }
        rank(&mut pool);
        pool.truncate(ctx.decoder.beam_width);
        frontier = pool;
    }
    let best = frontier.into_iter().next().expect("frontier is never empty");
    Ok(finish(ctx, best, stats))
}

/// Brute-force oracle: depth-first enumeration of every surviving sequence,
/// keeping the best under the beam's exact comparator. Refuses instances
/// beyond `max_entities_for_exact` entities or [`EXACT_SEQUENCE_CAP`] raw
/// sequences.
pub fn exhaustive_search(ctx: &DecodeContext<'_>) -> Result<DecodeOutcome, DecodeError> {
    validate_inputs(ctx)?;
    let entities = ctx.paragraph.entity_count();
    let steps = ctx.paragraph.step_count();
    let raw_sequences = (KIND_COUNT as f64).powi((entities * steps) as i32);
    if entities > ctx.decoder.max_entities_for_exact || raw_sequences > EXACT_SEQUENCE_CAP {
        return Err(DecodeError::InstanceTooLarge {
            entities,
            steps,
            entity_limit: ctx.decoder.max_entities_for_exact,
            sequence_cap: EXACT_SEQUENCE_CAP,
        });
    }
    let expander = Expander::new(ctx);
    let mut stats = SearchStats::default();
    let mut best: Option<SearchNode> = None;
    let mut stack = vec![expander.root()];
    while let Some(node) = stack.pop() {
        if node.depth() == steps {
            let better = match &best {
                None => true,
                Some(b) => match node.score.total_cmp(&b.score) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Equal => node.tie < b.tie,
                    std::cmp::Ordering::Less => false,
                },
            };
            if better {
                best = Some(node);
            }
            continue;
        }
        let t = node.depth() + 1;
        let expansions = expander.expand(&node);
        stats.absorb(&expansions);
        if expansions.is_empty() {
            return Err(DecodeError::DeadEnd { step: t });
        }
        stack.extend(expansions.into_iter().map(|e| e.child));
    }
    let best = best.ok_or(DecodeError::DeadEnd { step: 1 })?;
    Ok(finish(ctx, best, stats))
}

/// Fill each change's location slots with the top-ranked candidate for that
/// (step, entity, slot); `NoChange` stays bare. The kinds are taken as given,
/// so a `Move` whose two top candidates coincide stays a (degenerate) `Move`.
pub fn decode_parameters(kinds: &[Vec<ChangeKind>], logits: &StepLogits) -> ActionSequence {
    let top = |t0: usize, j: usize, slot: ParamSlot| -> Location {
        logits.candidates(t0, j, slot)[0].0.clone()
    };
    let steps = kinds
        .iter()
        .enumerate()
        .map(|(t0, row)| StepAction {
            changes: row
                .iter()
                .enumerate()
                .map(|(j, &kind)| match kind {
                    ChangeKind::Move => StateChange::Move {
                        before: top(t0, j, ParamSlot::Before),
                        after: top(t0, j, ParamSlot::After),
                    },
                    ChangeKind::Create => StateChange::Create { after: top(t0, j, ParamSlot::After) },
                    ChangeKind::Destroy => {
                        StateChange::Destroy { before: top(t0, j, ParamSlot::Before) }
                    }
                    ChangeKind::NoChange => StateChange::NoChange,
                })
                .collect(),
        })
        .collect();
    ActionSequence { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Entity, Sentence};
    use crate::priors::PriorKey;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn two_entity_paragraph() -> Paragraph {
        Paragraph::new(
            "p",
            "testing",
            vec![
                Sentence::new(1, "The water hits the rock ."),
                Sentence::new(2, "The rock splits under the water ."),
            ],
            vec![
                Entity::new("water", Vec::<String>::new()),
                Entity::new("rock", Vec::<String>::new()),
            ],
        )
        .unwrap()
    }

    fn both_exist() -> Vec<EntityState> {
        vec![
            EntityState::Exists(Location::Unknown),
            EntityState::Exists(Location::Unknown),
        ]
    }

    #[test]
    fn expansion_score_closed_forms() {
        let p = two_entity_paragraph();
        let mut values = vec![vec![[0.0; KIND_COUNT]; 2]; 2];
        values[0][0][ChangeKind::Create.index()] = 2.0;
        let logits = StepLogits::with_default_spans(&p, values);

        // Priors ignored entirely without a grid.
        let s = expansion_score(&logits, None, &[ChangeKind::Create, ChangeKind::NoChange], 0);
        assert_eq!(s, 2.0);

        // lambda = 0, all priors 0.5: |E| * ln 0.5.
        let half = PriorGrid::from_probabilities(vec![[0.5; KIND_COUNT]; 2]);
        let s = expansion_score(
            &logits,
            Some((&half, 0.0)),
            &[ChangeKind::NoChange, ChangeKind::NoChange],
            0,
        );
        assert!((s - 2.0 * 0.5f64.ln()).abs() < 1e-12);

        // Single-entity mix: 0.5*2 + 0.5*ln 0.9.
        let p1 = Paragraph::new(
            "q",
            "testing",
            vec![Sentence::new(1, "A thing appears .")],
            vec![Entity::new("thing", Vec::<String>::new())],
        )
        .unwrap();
        let mut v = vec![vec![[0.0; KIND_COUNT]; 1]];
        v[0][0][ChangeKind::Create.index()] = 2.0;
        let l1 = StepLogits::with_default_spans(&p1, v);
        let g = PriorGrid::from_probabilities(vec![[0.9; KIND_COUNT]]);
        let s = expansion_score(&l1, Some((&g, 0.5)), &[ChangeKind::Create], 0);
        assert!((s - 0.9473197421710869).abs() < 1e-12, "got {s}");
    }

    #[test]
    fn factored_enumeration_matches_naive_filtering() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..200 {
            let e_count = rng.gen_range(1..=3);
            let t_total = rng.gen_range(1..=3);
            let entities: Vec<Entity> = (0..e_count)
                .map(|j| Entity::new(format!("e{j}"), Vec::<String>::new()))
                .collect();
            let sentences: Vec<Sentence> = (1..=t_total)
                .map(|t| {
                    // Mention a random subset of entities by id.
                    let named: Vec<String> = (0..e_count)
                        .filter(|_| rng.gen_bool(0.6))
                        .map(|j| format!("e{j}"))
                        .collect();
                    Sentence::new(t, format!("step {} {}", t, named.join(" ")))
                })
                .collect();
            let p = Paragraph::new("p", "t", sentences, entities).unwrap();
            let initial: Vec<EntityState> = (0..e_count)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        EntityState::Exists(Location::Unknown)
                    } else {
                        EntityState::Nonexistent
                    }
                })
                .collect();
            let mentions = build_mention_index(&p);
            let cfg = HardConstraintConfig::default();
            // A random (possibly deep) summary: advance through random
            // surviving prefixes so later steps see non-trivial budgets.
            let mut summary = NodeSummary::new(&initial, t_total);
            let depth = rng.gen_range(0..t_total);
            for t in 1..=depth {
                let survivors = step_survivors(&summary, t, &mentions, Some(&cfg), e_count);
                let pick = rng.gen_range(0..survivors.len());
                summary = summary.advance(&survivors[pick]);
            }
            let t = depth + 1;

            let factored = step_survivors(&summary, t, &mentions, Some(&cfg), e_count);
            // Naive: all K^E rows, then the joint filter.
            let naive: Vec<Vec<ChangeKind>> =
                step_survivors(&summary, t, &mentions, None, e_count)
                    .into_iter()
                    .filter(|kinds| allowable_extension(&summary, kinds, t, &mentions, &cfg))
                    .collect();
            assert_eq!(factored, naive);
        }
    }

    #[test]
    fn unconstrained_expansion_enumerates_all_rows() {
        let p = two_entity_paragraph();
        let logits = StepLogits::zeros(&p);
        let hard = HardConstraintConfig::default();
        let decoder = DecoderConfig { use_hard: false, ..DecoderConfig::default() };
        let ctx = DecodeContext {
            paragraph: &p,
            initial: &both_exist(),
            logits: &logits,
            priors: None,
            hard: &hard,
            decoder: &decoder,
        };
        let expander = Expander::new(&ctx);
        let exps = expander.expand(&expander.root());
        assert_eq!(exps.len(), 16);
        let total: f64 = exps.iter().map(|e| e.weight).sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn nonexistent_unmentioned_entity_is_forced_to_no_change() {
        // "dust" is never mentioned and starts Nonexistent: CS-3 alone forces
        // NoChange in every survivor.
        let p = Paragraph::new(
            "p",
            "t",
            vec![Sentence::new(1, "The water falls .")],
            vec![
                Entity::new("water", Vec::<String>::new()),
                Entity::new("dust", Vec::<String>::new()),
            ],
        )
        .unwrap();
        let initial = vec![EntityState::Exists(Location::Unknown), EntityState::Nonexistent];
        let logits = StepLogits::zeros(&p);
        let hard = HardConstraintConfig::default();
        let decoder = DecoderConfig::default();
        let ctx = DecodeContext {
            paragraph: &p,
            initial: &initial,
            logits: &logits,
            priors: None,
            hard: &hard,
            decoder: &decoder,
        };
        let expander = Expander::new(&ctx);
        let exps = expander.expand(&expander.root());
        assert!(!exps.is_empty());
        assert!(exps.iter().all(|e| e.kinds[1] == ChangeKind::NoChange));
    }

    #[test]
    fn all_ties_resolve_to_the_quietest_sequence() {
        // Path scores tie across sequences only when every node offers the
        // same number of survivors (normalized weights depend on the
        // survivor count, and constraints consumed early shrink later sets).
        // Two such settings: a single step, and a multi-step decode with
        // constraints off. In both, equal logits tie everything and the
        // canonical tie-break must pick all-NoChange.
        let p = two_entity_paragraph();
        let one_step =
            Paragraph::new("p1", "testing", vec![p.sentences[0].clone()], p.entities.clone())
                .unwrap();
        let logits1 = StepLogits::zeros(&one_step);
        let hard = HardConstraintConfig::default();
        let constrained = DecoderConfig { use_soft: false, ..DecoderConfig::default() };
        let ctx = DecodeContext {
            paragraph: &one_step,
            initial: &both_exist(),
            logits: &logits1,
            priors: None,
            hard: &hard,
            decoder: &constrained,
        };
        for result in [beam_search(&ctx).unwrap(), exhaustive_search(&ctx).unwrap()] {
            let kinds = result.sequence.kinds();
            assert!(
                kinds.iter().flatten().all(|&k| k == ChangeKind::NoChange),
                "expected all-NoChange, got {kinds:?}"
            );
        }

        let logits2 = StepLogits::zeros(&p);
        let unconstrained = DecoderConfig {
            use_hard: false,
            use_soft: false,
            beam_width: 4096,
            ..DecoderConfig::default()
        };
        let ctx = DecodeContext {
            paragraph: &p,
            initial: &both_exist(),
            logits: &logits2,
            priors: None,
            hard: &hard,
            decoder: &unconstrained,
        };
        for result in [beam_search(&ctx).unwrap(), exhaustive_search(&ctx).unwrap()] {
            let kinds = result.sequence.kinds();
            assert!(
                kinds.iter().flatten().all(|&k| k == ChangeKind::NoChange),
                "expected all-NoChange, got {kinds:?}"
            );
        }
    }

    #[test]
    fn single_step_argmax_decodes_create() {
        let p = Paragraph::new(
            "p",
            "t",
            vec![Sentence::new(1, "Steam forms above the pot .")],
            vec![Entity::new("steam", Vec::<String>::new())],
        )
        .unwrap();
        let initial = vec![EntityState::Nonexistent];
        let mut values = vec![vec![[0.0; KIND_COUNT]; 1]];
        values[0][0][ChangeKind::Create.index()] = 3.0;
        let logits = StepLogits::with_default_spans(&p, values);
        let hard = HardConstraintConfig::default();
        let decoder = DecoderConfig { beam_width: 4, ..DecoderConfig::default() };
        let ctx = DecodeContext {
            paragraph: &p,
            initial: &initial,
            logits: &logits,
            priors: None,
            hard: &hard,
            decoder: &decoder,
        };
        let out = beam_search(&ctx).unwrap();
        assert_eq!(out.sequence.kinds(), vec![vec![ChangeKind::Create]]);
        // The top-ranked candidate is Unknown (all default scores tie).
        assert_eq!(
            out.sequence.steps[0].changes[0],
            StateChange::Create { after: Location::Unknown }
        );
        assert!(out.grid.state(1, 0).exists());
    }

    #[test]
    fn create_after_exists_needs_hard_constraints_off() {
        // The entity already exists; logits push Create hard. CS-2 redirects
        // the decode; disabling hard constraints restores Create.
        let p = Paragraph::new(
            "p",
            "t",
            vec![Sentence::new(1, "Electricity is produced .")],
            vec![Entity::new("electricity", Vec::<String>::new())],
        )
        .unwrap();
        let initial = vec![EntityState::Exists(Location::span("generator"))];
        let mut values = vec![vec![[0.0; KIND_COUNT]; 1]];
        values[0][0][ChangeKind::Create.index()] = 5.0;
        values[0][0][ChangeKind::NoChange.index()] = 1.0;
        let logits = StepLogits::with_default_spans(&p, values);
        let hard = HardConstraintConfig::default();

        let on = DecoderConfig::default();
        let ctx = DecodeContext {
            paragraph: &p,
            initial: &initial,
            logits: &logits,
            priors: None,
            hard: &hard,
            decoder: &on,
        };
        let decoded = beam_search(&ctx).unwrap();
        assert_ne!(decoded.sequence.kinds()[0][0], ChangeKind::Create);

        let off = DecoderConfig { use_hard: false, ..DecoderConfig::default() };
        let ctx_off = DecodeContext { decoder: &off, ..ctx };
        let decoded = beam_search(&ctx_off).unwrap();
        assert_eq!(decoded.sequence.kinds()[0][0], ChangeKind::Create);
    }

    #[test]
    fn beam_matches_exhaustive_when_width_never_truncates() {
        let mut rng = StdRng::seed_from_u64(41);
        for round in 0..60 {
            let e_count = rng.gen_range(1..=2);
            let t_total = rng.gen_range(1..=3);
            let entities: Vec<Entity> = (0..e_count)
                .map(|j| Entity::new(format!("e{j}"), Vec::<String>::new()))
                .collect();
            let sentences: Vec<Sentence> = (1..=t_total)
                .map(|t| {
                    let named: Vec<String> = (0..e_count)
                        .filter(|_| rng.gen_bool(0.7))
                        .map(|j| format!("e{j}"))
                        .collect();
                    Sentence::new(t, format!("step {t} moves {}", named.join(" ")))
                })
                .collect();
            let p = Paragraph::new("p", "testing", sentences, entities).unwrap();
            let initial: Vec<EntityState> = (0..e_count)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        EntityState::Exists(Location::Unknown)
                    } else {
                        EntityState::Nonexistent
                    }
                })
                .collect();
            let values: Vec<Vec<[f64; KIND_COUNT]>> = (0..t_total)
                .map(|_| {
                    (0..e_count)
                        .map(|_| {
                            let mut row = [0.0; KIND_COUNT];
                            for v in &mut row {
                                *v = rng.gen_range(-2.0..2.0);
                            }
                            row
                        })
                        .collect()
                })
                .collect();
            let logits = StepLogits::with_default_spans(&p, values);
            let mut table = PriorTable::empty(3.0, 0.5);
            for j in 0..e_count {
                for kind in [ChangeKind::Move, ChangeKind::Create, ChangeKind::Destroy] {
                    table.set_count(
                        PriorKey {
                            topic: "testing".into(),
                            entity_lemma: format!("e{j}"),
                            kind,
                        },
                        rng.gen_range(0..8),
                    );
                }
            }
            let hard = HardConstraintConfig::default();
            let use_soft = rng.gen_bool(0.5);
            // Width 4096 >= 4^(2*3): nothing is ever truncated here.
            let decoder = DecoderConfig {
                beam_width: 4096,
                lambda: rng.gen_range(0.0..=1.0),
                use_soft,
                ..DecoderConfig::default()
            };
            let ctx = DecodeContext {
                paragraph: &p,
                initial: &initial,
                logits: &logits,
                priors: use_soft.then_some(&table),
                hard: &hard,
                decoder: &decoder,
            };
            let beam = beam_search(&ctx).unwrap();
            let exact = exhaustive_search(&ctx).unwrap();
            assert_eq!(
                beam.sequence.kinds(),
                exact.sequence.kinds(),
                "round {round} diverged"
            );
            assert!((beam.score - exact.score).abs() < 1e-9);
            assert!(beam.stats.max_weight_sum_err <= 1e-9);
            assert!(exact.stats.max_weight_sum_err <= 1e-9);
        }
    }

    #[test]
    fn priors_can_outvote_flat_logits() {
        // Zero logits everywhere; a strong Move history for water makes
        // Move-water the best single-step row at lambda = 0.5.
        let p = two_entity_paragraph();
        let mut table = PriorTable::empty(3.0, 0.5);
        table.set_count(
            PriorKey { topic: "testing".into(), entity_lemma: "water".into(), kind: ChangeKind::Move },
            4,
        );
        let hard = HardConstraintConfig::default();
        let decoder = DecoderConfig::default();
        let one_step = Paragraph::new(
            "p1",
            "testing",
            vec![p.sentences[0].clone()],
            p.entities.clone(),
        )
        .unwrap();
        let logits1 = StepLogits::zeros(&one_step);
        let ctx = DecodeContext {
            paragraph: &one_step,
            initial: &both_exist(),
            logits: &logits1,
            priors: Some(&table),
            hard: &hard,
            decoder: &decoder,
        };
        let out = beam_search(&ctx).unwrap();
        assert_eq!(out.sequence.kinds(), vec![vec![ChangeKind::Move, ChangeKind::NoChange]]);
    }

    #[test]
    fn lambda_one_matches_soft_off_bitwise() {
        let p = two_entity_paragraph();
        let mut table = PriorTable::empty(3.0, 0.5);
        table.set_count(
            PriorKey { topic: "testing".into(), entity_lemma: "rock".into(), kind: ChangeKind::Destroy },
            7,
        );
        let mut rng = StdRng::seed_from_u64(5);
        let values: Vec<Vec<[f64; KIND_COUNT]>> = (0..2)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let mut row = [0.0; KIND_COUNT];
                        for v in &mut row {
                            *v = rng.gen_range(-1.0..1.0);
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let logits = StepLogits::with_default_spans(&p, values);
        let hard = HardConstraintConfig::default();
        let lambda_one = DecoderConfig { lambda: 1.0, ..DecoderConfig::default() };
        let soft_off = DecoderConfig { use_soft: false, ..DecoderConfig::default() };
        let a = beam_search(&DecodeContext {
            paragraph: &p,
            initial: &both_exist(),
            logits: &logits,
            priors: Some(&table),
            hard: &hard,
            decoder: &lambda_one,
        })
        .unwrap();
        let b = beam_search(&DecodeContext {
            paragraph: &p,
            initial: &both_exist(),
            logits: &logits,
            priors: Some(&table),
            hard: &hard,
            decoder: &soft_off,
        })
        .unwrap();
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.score.to_bits(), b.score.to_bits());
    }

    #[test]
    fn exhaustive_refuses_oversized_instances() {
        let entities: Vec<Entity> =
            (0..6).map(|j| Entity::new(format!("e{j}"), Vec::<String>::new())).collect();
        let sentences: Vec<Sentence> =
            (1..=8).map(|t| Sentence::new(t, format!("step {t}"))).collect();
        let p = Paragraph::new("big", "t", sentences, entities).unwrap();
        let initial = vec![EntityState::Exists(Location::Unknown); 6];
        let logits = StepLogits::zeros(&p);
        let hard = HardConstraintConfig::default();
        let decoder = DecoderConfig::default();
        let ctx = DecodeContext {
            paragraph: &p,
            initial: &initial,
            logits: &logits,
            priors: None,
            hard: &hard,
            decoder: &decoder,
        };
        match exhaustive_search(&ctx) {
            Err(DecodeError::InstanceTooLarge { entities: 6, steps: 8, .. }) => {}
            other => panic!("expected InstanceTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn constrained_search_generates_no_more_nodes_than_unconstrained() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..20 {
            let p = two_entity_paragraph();
            let values: Vec<Vec<[f64; KIND_COUNT]>> = (0..2)
                .map(|_| {
                    (0..2)
                        .map(|_| {
                            let mut row = [0.0; KIND_COUNT];
                            for v in &mut row {
                                *v = rng.gen_range(-2.0..2.0);
                            }
                            row
                        })
                        .collect()
                })
                .collect();
            let logits = StepLogits::with_default_spans(&p, values);
            let hard = HardConstraintConfig::default();
            let on = DecoderConfig::default();
            let off = DecoderConfig { use_hard: false, ..DecoderConfig::default() };
            let base = DecodeContext {
                paragraph: &p,
                initial: &both_exist(),
                logits: &logits,
                priors: None,
                hard: &hard,
                decoder: &on,
            };
            let with = beam_search(&base).unwrap();
            let without = beam_search(&DecodeContext { decoder: &off, ..base }).unwrap();
            assert!(with.stats.nodes_generated <= without.stats.nodes_generated);
        }
    }

    #[test]
    fn decode_parameters_picks_top_ranked_candidates() {
        let p = Paragraph::new(
            "p",
            "t",
            vec![Sentence::new(1, "Water moves from the soil to the root .")],
            vec![Entity::new("water", Vec::<String>::new())],
        )
        .unwrap();
        let spans = vec![vec![crate::scorer::SlotCandidates {
            before: vec![
                (Location::span("soil"), 2.0),
                (Location::Unknown, 0.0),
            ],
            after: vec![
                (Location::span("root"), 1.5),
                (Location::Unknown, 0.0),
            ],
        }]];
        let logits = StepLogits::new(vec![vec![[0.0; KIND_COUNT]; 1]], spans);
        let seq = decode_parameters(&[vec![ChangeKind::Move]], &logits);
        assert_eq!(
            seq.steps[0].changes[0],
            StateChange::Move { before: Location::span("soil"), after: Location::span("root") }
        );
    }

    #[test]
    fn node_summary_matches_fresh_replay() {
        let mut rng = StdRng::seed_from_u64(3);
        let p = two_entity_paragraph();
        let mentions = build_mention_index(&p);
        let cfg = HardConstraintConfig::default();
        for _ in 0..50 {
            let initial = both_exist();
            let mut summary = NodeSummary::new(&initial, p.step_count());
            let mut rows: Vec<Vec<ChangeKind>> = Vec::new();
            for t in 1..=p.step_count() {
                let survivors = step_survivors(&summary, t, &mentions, Some(&cfg), 2);
                let pick = rng.gen_range(0..survivors.len());
                rows.push(survivors[pick].clone());
                summary = summary.advance(&survivors[pick]);
            }
            let mut fresh = NodeSummary::new(&initial, p.step_count());
            for row in &rows {
                fresh = fresh.advance(row);
            }
            assert_eq!(summary, fresh);
        }
    }
}
