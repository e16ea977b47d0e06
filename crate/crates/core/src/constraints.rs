//! Hard commonsense and pruning rules over candidate step actions.
//!
//! Six rules are enforced:
//!
//! * `CS-1` — an entity must exist to be moved or destroyed;
//! * `CS-2` — an entity that exists cannot be created;
//! * `CS-3` — an entity cannot change before the sentence that first mentions it;
//! * `D-1`  — existence toggles per entity are bounded (`max_toggles`);
//! * `D-2`  — entities changed in one sentence are bounded (`ceil(frac * |E|)`);
//! * `D-3`  — sentences in which one entity changes are bounded (`ceil(frac * T)`).
//!
//! [`allowable_extension`] is the incremental predicate the decoder calls on
//! every candidate expansion; [`violations`] is the offline audit over a full
//! sequence. The two agree: the audit of a sequence is empty exactly when
//! every prefix extension is allowable.

use crate::domain::{ActionSequence, ChangeKind, EntityState, Paragraph};
use std::fmt;

/// Which rules are active and their thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct HardConstraintConfig {
    pub cs1: bool,
    pub cs2: bool,
    pub cs3: bool,
    pub d1: bool,
    pub d2: bool,
    pub d3: bool,
    /// D-1: maximum counted existence toggles per entity. The first toggle is
    /// free when it is a creation, so a plain create-then-destroy lifecycle
    /// costs one toggle.
    pub max_toggles: u32,
    /// D-2: fraction of entities allowed to change in one sentence
    /// (cap = `ceil(frac * |E|)`).
    pub max_entities_frac: f64,
    /// D-3: fraction of sentences in which one entity may change
    /// (cap = `ceil(frac * T)`).
    pub max_sentences_frac: f64,
}

impl Default for HardConstraintConfig {
    fn default() -> Self {
        HardConstraintConfig {
            cs1: true,
            cs2: true,
            cs3: true,
            d1: true,
            d2: true,
            d3: true,
            max_toggles: 1,
            max_entities_frac: 0.5,
            max_sentences_frac: 0.5,
        }
    }
}

/// A fraction threshold was outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("constraint config: {field} must lie in [0, 1], got {value}")]
pub struct InvalidConstraintConfig {
    pub field: &'static str,
    pub value: f64,
}

impl HardConstraintConfig {
    pub fn validate(&self) -> Result<(), InvalidConstraintConfig> {
        for (field, value) in [
            ("max_entities_frac", self.max_entities_frac),
            ("max_sentences_frac", self.max_sentences_frac),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(InvalidConstraintConfig { field, value });
            }
        }
        Ok(())
    }

    /// Convenience: every rule disabled (thresholds untouched).
    pub fn disabled() -> Self {
        HardConstraintConfig {
            cs1: false,
            cs2: false,
            cs3: false,
            d1: false,
            d2: false,
            d3: false,
            ..HardConstraintConfig::default()
        }
    }
}

/// Identifier of one rule, as written in lint output and ablation flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    Cs1,
    Cs2,
    Cs3,
    D1,
    D2,
    D3,
}

impl RuleId {
    pub const ALL: [RuleId; 6] = [RuleId::Cs1, RuleId::Cs2, RuleId::Cs3, RuleId::D1, RuleId::D2, RuleId::D3];

    pub fn label(self) -> &'static str {
        match self {
            RuleId::Cs1 => "CS-1",
            RuleId::Cs2 => "CS-2",
            RuleId::Cs3 => "CS-3",
            RuleId::D1 => "D-1",
            RuleId::D2 => "D-2",
            RuleId::D3 => "D-3",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// First-mention sentence (1-based) per entity; `None` when never mentioned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionIndex {
    pub first_mention: Vec<Option<usize>>,
}

/// Scan each entity's mentions across the paragraph's sentences.
pub fn build_mention_index(paragraph: &Paragraph) -> MentionIndex {
    let first_mention = paragraph
        .entities
        .iter()
        .map(|e| {
            paragraph
                .sentences
                .iter()
                .find(|s| e.mentioned_in(s))
                .map(|s| s.index)
        })
        .collect();
    MentionIndex { first_mention }
}

/// Everything the rules need to know about one entity mid-sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySummary {
    pub exists: bool,
    /// Counted existence toggles so far (the first toggle is free when it is
    /// a creation).
    pub toggles: u32,
    /// Whether existence has flipped at least once.
    pub flipped: bool,
    /// Number of sentences in which this entity has changed so far.
    pub changed_steps: u32,
}

/// Per-entity rule state after a (possibly empty) prefix of steps, plus the
/// paragraph's step count for the D-3 cap. Cheap to clone; the decoder keeps
/// one per search node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSummary {
    pub entities: Vec<EntitySummary>,
    pub sentence_count: usize,
}

impl NodeSummary {
    /// Summary of the empty prefix over a given initial row.
    pub fn new(initial: &[EntityState], sentence_count: usize) -> NodeSummary {
        NodeSummary {
            entities: initial
                .iter()
                .map(|s| EntitySummary { exists: s.exists(), toggles: 0, flipped: false, changed_steps: 0 })
                .collect(),
            sentence_count,
        }
    }

    /// Advance by one joint kind assignment. Total and config-independent:
    /// inapplicable kinds follow the lenient transition semantics (existence
    /// is only flipped when the kind can actually flip it), so audits can walk
    /// straight through inconsistent sequences.
    pub fn advance(&self, kinds: &[ChangeKind]) -> NodeSummary {
        debug_assert_eq!(kinds.len(), self.entities.len());
        let entities = self
            .entities
            .iter()
            .zip(kinds)
            .map(|(e, &kind)| {
                let exists_after = match kind {
                    ChangeKind::NoChange | ChangeKind::Move => e.exists,
                    ChangeKind::Create => true,
                    ChangeKind::Destroy => false,
                };
                let flips = exists_after != e.exists;
                let free_flip = flips && !e.flipped && kind == ChangeKind::Create;
                EntitySummary {
                    exists: exists_after,
                    toggles: e.toggles + u32::from(flips && !free_flip),
                    flipped: e.flipped || flips,
                    changed_steps: e.changed_steps + u32::from(kind != ChangeKind::NoChange),
                }
            })
            .collect();
        NodeSummary { entities, sentence_count: self.sentence_count }
    }
}

/// `ceil(frac * n)` with a guard against float drift on exact products.
fn frac_cap(frac: f64, n: usize) -> usize {
    let v = frac * n as f64 - 1e-9;
    v.ceil().max(0.0) as usize
}

/// Rules violated by assigning `kind` to entity `j` at step `t`, given the
/// summary of the preceding prefix. D-2 is joint and is not checked here.
fn entity_rule_breaches(
    e: &EntitySummary,
    kind: ChangeKind,
    t: usize,
    first_mention: Option<usize>,
    sentence_count: usize,
    config: &HardConstraintConfig,
) -> impl Iterator<Item = RuleId> {
    let mut out = [None; 5];
    if config.cs1 && matches!(kind, ChangeKind::Move | ChangeKind::Destroy) && !e.exists {
        out[0] = Some(RuleId::Cs1);
    }
    if config.cs2 && kind == ChangeKind::Create && e.exists {
        out[1] = Some(RuleId::Cs2);
    }
    if config.cs3 && kind != ChangeKind::NoChange && first_mention.map_or(true, |m| t < m) {
        out[2] = Some(RuleId::Cs3);
    }
    if config.d1 {
        let exists_after = match kind {
            ChangeKind::NoChange | ChangeKind::Move => e.exists,
            ChangeKind::Create => true,
            ChangeKind::Destroy => false,
        };
        let flips = exists_after != e.exists;
        let free_flip = flips && !e.flipped && kind == ChangeKind::Create;
        if flips && !free_flip && e.toggles + 1 > config.max_toggles {
            out[3] = Some(RuleId::D1);
        }
    }
    if config.d3
        && kind != ChangeKind::NoChange
        && e.changed_steps + 1 > frac_cap(config.max_sentences_frac, sentence_count) as u32
    {
        out[4] = Some(RuleId::D3);
    }
    out.into_iter().flatten()
}

/// Whether assigning `kind` to entity `j` at step `t` passes every enabled
/// per-entity rule (D-2 excluded). This is the factored test the decoder uses
/// to fix forced-`NoChange` entities before enumerating joint assignments.
pub fn entity_kind_allowed(
    summary: &NodeSummary,
    j: usize,
    kind: ChangeKind,
    t: usize,
    mentions: &MentionIndex,
    config: &HardConstraintConfig,
) -> bool {
    entity_rule_breaches(
        &summary.entities[j],
        kind,
        t,
        mentions.first_mention[j],
        summary.sentence_count,
        config,
    )
    .next()
    .is_none()
}

/// The full incremental predicate: may the prefix summarized by `summary` be
/// extended with this joint kind assignment at step `t`?
pub fn allowable_extension(
    summary: &NodeSummary,
    kinds: &[ChangeKind],
    t: usize,
    mentions: &MentionIndex,
    config: &HardConstraintConfig,
) -> bool {
    debug_assert_eq!(kinds.len(), summary.entities.len());
    for (j, &kind) in kinds.iter().enumerate() {
        if !entity_kind_allowed(summary, j, kind, t, mentions, config) {
            return false;
        }
    }
    if config.d2 {
        let changed = kinds.iter().filter(|&&k| k != ChangeKind::NoChange).count();
        if changed > frac_cap(config.max_entities_frac, kinds.len()) {
            return false;
        }
    }
    true
}

/// One localized rule breach found by the audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: RuleId,
    /// 1-based step (sentence) index.
    pub step: usize,
    /// Entity id the breach is attributed to.
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at step {} ({}): {}", self.rule, self.step, self.entity, self.message)
    }
}

/// Audit a full sequence against every enabled rule.
///
/// Each rule is checked independently at every step, so toggling one rule on
/// or off never changes another rule's findings; the walk advances leniently
/// through breaches so later steps are still audited. The result is empty
/// exactly when [`allowable_extension`] accepts every prefix extension of the
/// sequence.
pub fn violations(
    seq: &ActionSequence,
    paragraph: &Paragraph,
    initial: &[EntityState],
    config: &HardConstraintConfig,
) -> Vec<Violation> {
    let mentions = build_mention_index(paragraph);
    let mut summary = NodeSummary::new(initial, paragraph.step_count());
    let mut out = Vec::new();
    for (t0, step) in seq.steps.iter().enumerate() {
        let t = t0 + 1;
        let kinds = step.kinds();
        for (j, &kind) in kinds.iter().enumerate() {
            let entity = &paragraph.entities[j].id;
            for rule in entity_rule_breaches(
                &summary.entities[j],
                kind,
                t,
                mentions.first_mention[j],
                summary.sentence_count,
                config,
            ) {
                let message = match rule {
                    RuleId::Cs1 => format!("{kind} on a nonexistent entity"),
                    RuleId::Cs2 => "CREATE on an entity that already exists".to_string(),
                    RuleId::Cs3 => match mentions.first_mention[j] {
                        Some(m) => format!("{kind} before first mention at sentence {m}"),
                        None => format!("{kind} on an entity never mentioned"),
                    },
                    RuleId::D1 => format!(
                        "existence toggle {} exceeds cap {}",
                        summary.entities[j].toggles + 1,
                        config.max_toggles
                    ),
                    RuleId::D3 => format!(
                        "changed in {} sentences, cap {}",
                        summary.entities[j].changed_steps + 1,
                        frac_cap(config.max_sentences_frac, summary.sentence_count)
                    ),
                    RuleId::D2 => unreachable!("D-2 is checked jointly"),
                };
                out.push(Violation { rule, step: t, entity: entity.clone(), message });
            }
        }
        if config.d2 {
            let cap = frac_cap(config.max_entities_frac, kinds.len());
            let changed: Vec<usize> =
                (0..kinds.len()).filter(|&j| kinds[j] != ChangeKind::NoChange).collect();
            if changed.len() > cap {
                // Attributed to the first entity past the cap.
                let j = changed[cap];
                out.push(Violation {
                    rule: RuleId::D2,
                    step: t,
                    entity: paragraph.entities[j].id.clone(),
                    message: format!("{} entities changed, cap {}", changed.len(), cap),
                });
            }
        }
        summary = summary.advance(&kinds);
    }
    out
}
