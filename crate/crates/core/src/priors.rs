//! Soft priors: how plausible is a change kind for an entity under a topic,
//! judged from co-occurrence counts mined out of role-labeled frames.
//!
//! A rulebase maps verb frames to (entity text, change kind) events;
//! [`build_priors`] tallies them into a count table keyed by
//! `(topic, entity head token, kind)`. At decode time [`PriorTable::prior`]
//! squashes a raw count through a shifted logistic so that `x0` counts mean
//! "even odds" and zero counts mean "unlikely but never impossible".
//! `NoChange` has no mined evidence and gets a flat prior instead.

use crate::domain::{ChangeKind, Entity};
use std::collections::BTreeMap;

/// One role-labeled argument of a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameArg {
    pub role: String,
    pub text: String,
}

/// One extracted verb frame from a background corpus sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub topic: String,
    pub verb_lemma: String,
    pub args: Vec<FrameArg>,
}

impl FrameRecord {
    /// Structurally usable: non-empty verb and topic, every arg non-empty.
    fn well_formed(&self) -> bool {
        !self.verb_lemma.is_empty()
            && !self.topic.is_empty()
            && !self.args.is_empty()
            && self.args.iter().all(|a| !a.role.is_empty() && !a.text.is_empty())
    }
}

/// One rulebase entry: when `verb_lemma` appears with all `required_roles`,
/// the argument filling `target_role` undergoes `change_kind`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub verb_lemma: String,
    pub required_roles: Vec<String>,
    pub target_role: String,
    pub change_kind: ChangeKind,
}

/// A rulebase entry failed validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule for verb {verb:?}: {msg}")]
pub struct InvalidRule {
    pub verb: String,
    pub msg: String,
}

impl Rule {
    pub fn new(
        verb_lemma: impl Into<String>,
        required_roles: Vec<String>,
        target_role: impl Into<String>,
        change_kind: ChangeKind,
    ) -> Result<Rule, InvalidRule> {
        let verb_lemma = verb_lemma.into();
        let target_role = target_role.into();
        let fail = |msg: &str| InvalidRule { verb: verb_lemma.clone(), msg: msg.to_string() };
        if verb_lemma.is_empty() {
            return Err(fail("verb lemma must be non-empty"));
        }
        if change_kind == ChangeKind::NoChange {
            return Err(fail("rules assert a change; NONE is not a rule kind"));
        }
        if required_roles.is_empty() || required_roles.iter().any(String::is_empty) {
            return Err(fail("required roles must be non-empty"));
        }
        if !required_roles.contains(&target_role) {
            return Err(fail("target role must be one of the required roles"));
        }
        Ok(Rule { verb_lemma, required_roles, target_role, change_kind })
    }
}

/// Key of one count cell: topic, entity head token (lowercased), kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PriorKey {
    pub topic: String,
    pub entity_lemma: String,
    pub kind: ChangeKind,
}

/// Count table plus the calibration parameters it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    counts: BTreeMap<PriorKey, u64>,
    /// Count at which the logistic crosses one half.
    pub x0: f64,
    /// Flat prior for `NoChange`, which has no mined counts. Must lie
    /// strictly inside (0, 1).
    pub none_prior: f64,
}

/// Defaults: even odds at three observations, flat one-half for `NoChange`.
pub const DEFAULT_X0: f64 = 3.0;
pub const DEFAULT_NONE_PRIOR: f64 = 0.5;

/// Probabilities are clamped this far away from {0, 1} so their logs stay
/// finite no matter how large a count gets.
const PROB_CLAMP: f64 = 1e-12;

/// The shifted logistic `1 / (1 + exp(-(x - x0)))`, clamped to the open unit
/// interval. Exactly one half at `x = x0`; strictly increasing in `x` until
/// the clamp saturates.
pub fn logistic(x: f64, x0: f64) -> f64 {
    let p = 1.0 / (1.0 + (-(x - x0)).exp());
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Lowercased head token of a mention: the last whitespace token. English
/// noun phrases are head-final, and an exact-token tally is deterministic
/// and auditable; no stemming is attempted.
pub fn head_token(text: &str) -> String {
    text.split_whitespace().last().unwrap_or("").to_lowercase()
}

/// Result of mining a frame stream: the table plus a tally of records that
/// were skipped as malformed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorBuild {
    pub table: PriorTable,
    pub skipped: usize,
}

/// Apply the rulebase to one frame: every rule whose verb matches and whose
/// required roles are all present emits (target argument text, kind).
/// Duplicates are preserved; a role filled several times binds its first
/// occurrence.
pub fn match_rules(frame: &FrameRecord, rules: &[Rule]) -> Vec<(String, ChangeKind)> {
    let verb = frame.verb_lemma.to_lowercase();
    let mut out = Vec::new();
    for rule in rules {
        if rule.verb_lemma.to_lowercase() != verb {
            continue;
        }
        let has_role =
            |role: &str| frame.args.iter().any(|a| a.role.eq_ignore_ascii_case(role));
        if !rule.required_roles.iter().all(|r| has_role(r)) {
            continue;
        }
        let target = frame
            .args
            .iter()
            .find(|a| a.role.eq_ignore_ascii_case(&rule.target_role))
            .expect("target role is required, so it is present");
        out.push((target.text.clone(), rule.change_kind));
    }
    out
}

/// Tally rule matches over a frame stream into a count table. Commutative in
/// the stream order; malformed records are skipped and counted, not fatal.
pub fn build_priors(
    frames: impl IntoIterator<Item = FrameRecord>,
    rules: &[Rule],
    x0: f64,
    none_prior: f64,
) -> PriorBuild {
    let mut table = PriorTable::empty(x0, none_prior);
    let mut skipped = 0usize;
    for frame in frames {
        if !frame.well_formed() {
            skipped += 1;
            continue;
        }
        for (text, kind) in match_rules(&frame, rules) {
            let key = PriorKey {
                topic: frame.topic.to_lowercase(),
                entity_lemma: head_token(&text),
                kind,
            };
            if key.entity_lemma.is_empty() {
                skipped += 1;
                continue;
            }
            *table.counts.entry(key).or_insert(0) += 1;
        }
    }
    PriorBuild { table, skipped }
}

impl PriorTable {
    pub fn empty(x0: f64, none_prior: f64) -> PriorTable {
        debug_assert!(none_prior > 0.0 && none_prior < 1.0, "none prior must lie inside (0, 1)");
        PriorTable { counts: BTreeMap::new(), x0, none_prior }
    }

    /// Raw count for a fully resolved key (zero when unseen).
    pub fn count(&self, topic: &str, entity_lemma: &str, kind: ChangeKind) -> u64 {
        self.counts
            .get(&PriorKey {
                topic: topic.to_lowercase(),
                entity_lemma: entity_lemma.to_lowercase(),
                kind,
            })
            .copied()
            .unwrap_or(0)
    }

    /// Insert or overwrite one count cell (used by the table parser).
    pub fn set_count(&mut self, key: PriorKey, count: u64) {
        self.counts.insert(
            PriorKey {
                topic: key.topic.to_lowercase(),
                entity_lemma: key.entity_lemma.to_lowercase(),
                kind: key.kind,
            },
            count,
        );
    }

    /// Iterate cells in deterministic key order.
    pub fn iter(&self) -> impl Iterator<Item = (&PriorKey, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// The calibrated prior `P(kind | entity, topic)`.
    ///
    /// For change kinds this is the logistic of the best supporting count
    /// across the entity's mentions (their head tokens share evidence, so
    /// synonymous mentions like "leaf"/"leaves" each get a shot). For
    /// `NoChange` it is the flat configured prior. Never exactly 0 or 1.
    pub fn prior(&self, entity: &Entity, topic: &str, kind: ChangeKind) -> f64 {
        if kind == ChangeKind::NoChange {
            return self.none_prior.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        }
        let x = entity
            .mentions()
            .iter()
            .map(|m| self.count(topic, &head_token(m), kind))
            .max()
            .unwrap_or(0);
        logistic(x as f64, self.x0)
    }
}
