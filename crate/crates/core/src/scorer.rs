//! Per-step change-kind scores and location-candidate rankings.
//!
//! A [`StepLogits`] block holds one real score per (sentence, entity, kind)
//! plus, per (sentence, entity, parameter slot), a ranked list of candidate
//! locations. Blocks either come from an external model via a logits file
//! ([`load_logits`]) or from the built-in featurized baseline
//! ([`LexicalScorerModel`] + [`score`]), which exists so the whole pipeline —
//! training included — runs without any neural dependency.
//!
//! Training minimizes, over gold sequences, the negative log-probability of
//! each gold step among the constraint-surviving expansions of the gold
//! prefix, plus the negative log-likelihood of each gold location parameter
//! under a softmax over its candidate ranking ([`loss`], [`train`]).

use crate::constraints::{build_mention_index, HardConstraintConfig, NodeSummary};
use crate::decoder::{softmax, step_survivors, PriorGrid};
use crate::domain::{
    ActionSequence, ChangeKind, EntityState, Location, Paragraph, Sentence, StateChange,
    KIND_COUNT,
};
use crate::priors::PriorTable;
use std::collections::{BTreeMap, BTreeSet};

/// Longest candidate span, in tokens, when spans are enumerated from the
/// sentence rather than supplied by a file.
pub const MAX_SPAN_TOKENS: usize = 3;

/// A location parameter slot of a change: where it came from or where it went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSlot {
    Before,
    After,
}

impl ParamSlot {
    pub fn label(self) -> &'static str {
        match self {
            ParamSlot::Before => "before",
            ParamSlot::After => "after",
        }
    }

    pub fn from_label(s: &str) -> Option<ParamSlot> {
        match s {
            "before" => Some(ParamSlot::Before),
            "after" => Some(ParamSlot::After),
            _ => None,
        }
    }
}

/// Ranked location candidates for both slots of one (sentence, entity) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotCandidates {
    pub before: Vec<(Location, f64)>,
    pub after: Vec<(Location, f64)>,
}

/// All contiguous token spans up to [`MAX_SPAN_TOKENS`] long, preceded by
/// `Unknown`, all at score zero. `Unknown` leads so that an absent or
/// all-tied ranking resolves to it. Span texts equal to the reserved file
/// tokens `?` / `-` are skipped, and duplicate texts keep their first slot.
pub fn default_candidates(sentence: &Sentence) -> Vec<(Location, f64)> {
    let mut out = vec![(Location::Unknown, 0.0)];
    let mut seen = BTreeSet::new();
    let n = sentence.tokens.len();
    for start in 0..n {
        for len in 1..=MAX_SPAN_TOKENS.min(n - start) {
            let text = sentence.tokens[start..start + len].join(" ");
            if text == "?" || text == "-" || !seen.insert(text.clone()) {
                continue;
            }
            out.push((Location::Span(text), 0.0));
        }
    }
    out
}

/// The score block for one paragraph: a `T x |E| x 4` tensor of kind logits
/// plus per-cell candidate rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLogits {
    /// `values[t][j][k]` for 0-based step offset `t` (sentence `t + 1`).
    values: Vec<Vec<[f64; KIND_COUNT]>>,
    /// `spans[t][j]`, same indexing.
    spans: Vec<Vec<SlotCandidates>>,
}

impl StepLogits {
    /// Assemble from parts. Candidate lists must already be ranked (callers
    /// are the file loader and the baseline scorer, which both guarantee it).
    pub fn new(values: Vec<Vec<[f64; KIND_COUNT]>>, spans: Vec<Vec<SlotCandidates>>) -> StepLogits {
        debug_assert_eq!(values.len(), spans.len());
        debug_assert!(values.iter().zip(&spans).all(|(v, s)| v.len() == s.len()));
        debug_assert!(spans
            .iter()
            .flatten()
            .all(|c| !c.before.is_empty() && !c.after.is_empty()));
        StepLogits { values, spans }
    }

    /// Assemble a block over a paragraph with default candidate rankings.
    pub fn with_default_spans(paragraph: &Paragraph, values: Vec<Vec<[f64; KIND_COUNT]>>) -> StepLogits {
        let spans = paragraph
            .sentences
            .iter()
            .map(|s| {
                let cands = default_candidates(s);
                (0..paragraph.entity_count())
                    .map(|_| SlotCandidates { before: cands.clone(), after: cands.clone() })
                    .collect()
            })
            .collect();
        StepLogits::new(values, spans)
    }

    /// Zero logits everywhere, default candidates: the "know nothing" block.
    pub fn zeros(paragraph: &Paragraph) -> StepLogits {
        let values =
            vec![vec![[0.0; KIND_COUNT]; paragraph.entity_count()]; paragraph.step_count()];
        StepLogits::with_default_spans(paragraph, values)
    }

    pub fn step_count(&self) -> usize {
        self.values.len()
    }

    pub fn entity_count(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Kind logit at 0-based step offset `t` (sentence `t + 1`), entity `j`.
    pub fn logit(&self, t: usize, j: usize, kind: ChangeKind) -> f64 {
        self.values[t][j][kind.index()]
    }

    /// Ranked candidates for one slot, best first.
    pub fn candidates(&self, t: usize, j: usize, slot: ParamSlot) -> &[(Location, f64)] {
        match slot {
            ParamSlot::Before => &self.spans[t][j].before,
            ParamSlot::After => &self.spans[t][j].after,
        }
    }
}

// ---------------------------------------------------------------------------
// Featurized baseline model
// ---------------------------------------------------------------------------

/// Tokens too grammatical to be treated as action words by the baseline's
/// features.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "of", "in", "on", "at", "to", "from", "into", "onto", "by",
    "with", "for", "as", "is", "are", "was", "were", "be", "been", "being", "it", "its", "this",
    "that", "these", "those", "then", "when", "after", "before", "up", "down", "out", "off",
];

/// Weight key for an action-token x kind feature.
pub fn act_feature(token: &str, kind: ChangeKind) -> String {
    format!("act:{token}|{}", kind.label())
}

/// Weight key for the entity-mentioned-in-sentence indicator x kind.
pub fn mention_feature(kind: ChangeKind) -> String {
    format!("mention|{}", kind.label())
}

/// Weight key for the entity-adjacent-to-action-token indicator x kind.
pub fn adjacency_feature(kind: ChangeKind) -> String {
    format!("adj|{}", kind.label())
}

/// Weight key for the per-kind bias.
pub fn bias_feature(kind: ChangeKind) -> String {
    format!("bias|{}", kind.label())
}

/// A sparse linear model over lexical indicator features. Four families:
/// action token x kind (shared by every entity in the sentence), mentioned
/// x kind, adjacent-to-action-token x kind, and a bias per kind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LexicalScorerModel {
    pub weights: BTreeMap<String, f64>,
}

impl LexicalScorerModel {
    pub fn weight(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(0.0)
    }
}

/// Per-paragraph feature precomputation shared by scoring and gradients.
#[derive(Debug)]
pub(crate) struct FeatureContext {
    /// Deduplicated lowercased action tokens per sentence: tokens that carry
    /// at least one alphanumeric character, are not stopwords, and fall
    /// outside every entity-mention occurrence.
    pub action_tokens: Vec<Vec<String>>,
    /// `mentioned[t][j]`: entity j has a mention occurrence in sentence t+1.
    pub mentioned: Vec<Vec<bool>>,
    /// `adjacent[t][j]`: some occurrence of entity j sits immediately next to
    /// an action token.
    pub adjacent: Vec<Vec<bool>>,
}

impl FeatureContext {
    pub fn build(paragraph: &Paragraph) -> FeatureContext {
        let e_count = paragraph.entity_count();
        let mut action_tokens = Vec::with_capacity(paragraph.step_count());
        let mut mentioned = Vec::with_capacity(paragraph.step_count());
        let mut adjacent = Vec::with_capacity(paragraph.step_count());
        for sentence in &paragraph.sentences {
            let n = sentence.tokens.len();
            let occurrences: Vec<Vec<(usize, usize)>> =
                paragraph.entities.iter().map(|e| e.occurrences_in(sentence)).collect();
            let mut inside_mention = vec![false; n];
            for occs in &occurrences {
                for &(start, len) in occs {
                    for flag in &mut inside_mention[start..start + len] {
                        *flag = true;
                    }
                }
            }
            let is_action: Vec<bool> = (0..n)
                .map(|i| {
                    let tok = &sentence.tokens_lower()[i];
                    !inside_mention[i]
                        && tok.chars().any(|c| c.is_alphanumeric())
                        && !STOPWORDS.contains(&tok.as_str())
                })
                .collect();
            let mut toks: Vec<String> = (0..n)
                .filter(|&i| is_action[i])
                .map(|i| sentence.tokens_lower()[i].clone())
                .collect();
            toks.sort_unstable();
            toks.dedup();
            action_tokens.push(toks);

            let mut row_mentioned = vec![false; e_count];
            let mut row_adjacent = vec![false; e_count];
            for (j, occs) in occurrences.iter().enumerate() {
                row_mentioned[j] = !occs.is_empty();
                row_adjacent[j] = occs.iter().any(|&(start, len)| {
                    (start > 0 && is_action[start - 1])
                        || (start + len < n && is_action[start + len])
                });
            }
            mentioned.push(row_mentioned);
            adjacent.push(row_adjacent);
        }
        FeatureContext { action_tokens, mentioned, adjacent }
    }
}

/// Evaluate the baseline: `values[t][j][k]` is the dot product of the model
/// weights with the indicator features of (sentence t+1, entity j, kind k).
/// Candidate rankings are the defaults. Permuting the entity list permutes
/// the output's entity axis and nothing else.
pub fn score(model: &LexicalScorerModel, paragraph: &Paragraph) -> StepLogits {
    let ctx = FeatureContext::build(paragraph);
    let e_count = paragraph.entity_count();
    let mut values = Vec::with_capacity(paragraph.step_count());
    for t in 0..paragraph.step_count() {
        // The action-token sum is shared by every entity of the sentence.
        let mut shared = [0.0; KIND_COUNT];
        for kind in ChangeKind::ALL {
            let mut sum = model.weight(&bias_feature(kind));
            for tok in &ctx.action_tokens[t] {
                sum += model.weight(&act_feature(tok, kind));
            }
            shared[kind.index()] = sum;
        }
        let mut row = Vec::with_capacity(e_count);
        for j in 0..e_count {
            let mut cell = shared;
            for kind in ChangeKind::ALL {
                if ctx.mentioned[t][j] {
                    cell[kind.index()] += model.weight(&mention_feature(kind));
                }
                if ctx.adjacent[t][j] {
                    cell[kind.index()] += model.weight(&adjacency_feature(kind));
                }
            }
            row.push(cell);
        }
        values.push(row);
    }
    StepLogits::with_default_spans(paragraph, values)
}

// ---------------------------------------------------------------------------
// Loss and training
// ---------------------------------------------------------------------------

/// Soft-prior mixing for scoring: the table and the mixing weight on logits.
#[derive(Debug, Clone, Copy)]
pub struct SoftScoring<'a> {
    pub table: &'a PriorTable,
    pub lambda: f64,
}

/// Everything the loss needs besides the logits and the gold sequence.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext<'a> {
    pub paragraph: &'a Paragraph,
    pub initial: &'a [EntityState],
    pub hard: &'a HardConstraintConfig,
    pub soft: Option<SoftScoring<'a>>,
}

/// The gold step at `step` was rejected by the hard constraints, so no
/// normalized probability exists for it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("gold step {step} is pruned by the hard constraints")]
pub struct GoldPathPruned {
    /// 1-based step index.
    pub step: usize,
}

/// Slots carried by a gold change, paired with their gold values.
fn gold_params(change: &StateChange) -> Vec<(ParamSlot, &Location)> {
    match change {
        StateChange::Move { before, after } => {
            vec![(ParamSlot::Before, before), (ParamSlot::After, after)]
        }
        StateChange::Create { after } => vec![(ParamSlot::After, after)],
        StateChange::Destroy { before } => vec![(ParamSlot::Before, before)],
        StateChange::NoChange => vec![],
    }
}

/// Negative log-likelihood of `gold_loc` under a softmax over the candidate
/// ranking. A gold location missing from the ranking falls back to `Unknown`,
/// which is always present, so the loss stays finite.
fn param_nll(cands: &[(Location, f64)], gold_loc: &Location) -> f64 {
    let idx = cands
        .iter()
        .position(|(l, _)| l == gold_loc)
        .or_else(|| cands.iter().position(|(l, _)| *l == Location::Unknown))
        .expect("candidate rankings always contain Unknown");
    let scores: Vec<f64> = cands.iter().map(|&(_, s)| s).collect();
    let (probs, _) = softmax(&scores);
    -probs[idx].max(f64::MIN_POSITIVE).ln()
}

/// One step of the gold-path walk: the surviving expansions of the gold
/// prefix, their normalized probabilities, and the gold step's position.
pub(crate) struct GoldStep {
    pub survivors: Vec<Vec<ChangeKind>>,
    pub probs: Vec<f64>,
    pub gold_index: usize,
}

/// Walk the gold path, yielding each step's survivor distribution. Shared by
/// the loss and its gradient so both see identical normalization sets.
fn walk_gold_path(
    logits: &StepLogits,
    gold_kinds: &[Vec<ChangeKind>],
    ctx: &ScoreContext<'_>,
    mut visit: impl FnMut(usize, &GoldStep),
) -> Result<(), GoldPathPruned> {
    let mentions = build_mention_index(ctx.paragraph);
    let prior_grid = ctx.soft.map(|s| PriorGrid::new(s.table, ctx.paragraph));
    let mut summary = NodeSummary::new(ctx.initial, ctx.paragraph.step_count());
    for (t0, gold) in gold_kinds.iter().enumerate() {
        let survivors = step_survivors(
            &summary,
            t0 + 1,
            &mentions,
            Some(ctx.hard),
            ctx.paragraph.entity_count(),
        );
        let phis: Vec<f64> = survivors
            .iter()
            .map(|kinds| {
                crate::decoder::expansion_score(
                    logits,
                    prior_grid.as_ref().map(|g| (g, ctx.soft.unwrap().lambda)),
                    kinds,
                    t0,
                )
            })
            .collect();
        let (probs, _) = softmax(&phis);
        let gold_index = survivors
            .iter()
            .position(|k| k == gold)
            .ok_or(GoldPathPruned { step: t0 + 1 })?;
        visit(t0, &GoldStep { survivors, probs, gold_index });
        summary = summary.advance(gold);
    }
    Ok(())
}

/// Sequence loss: for each step, the negative log of the gold expansion's
/// normalized weight among the allowable expansions of the gold prefix, plus
/// the negative log-likelihood of every gold location parameter under its
/// candidate ranking. Finite and non-negative whenever the gold path survives.
pub fn loss(
    logits: &StepLogits,
    gold: &ActionSequence,
    ctx: &ScoreContext<'_>,
) -> Result<f64, GoldPathPruned> {
    let gold = gold.clone().normalized();
    let gold_kinds = gold.kinds();
    let mut total = 0.0;
    walk_gold_path(logits, &gold_kinds, ctx, |t0, step| {
        total += -step.probs[step.gold_index].max(f64::MIN_POSITIVE).ln();
        for (j, change) in gold.steps[t0].changes.iter().enumerate() {
            for (slot, gold_loc) in gold_params(change) {
                total += param_nll(logits.candidates(t0, j, slot), gold_loc);
            }
        }
    })?;
    Ok(total)
}

/// Loss of the baseline model on one gold paragraph, with its analytic
/// gradient with respect to every firing weight.
///
/// Only the kind term depends on the weights (candidate scores are not part
/// of the baseline), so the gradient is the classic expected-minus-gold
/// feature difference, scaled by the logit mixing weight when priors are on.
pub fn loss_and_gradient(
    model: &LexicalScorerModel,
    gold: &ActionSequence,
    ctx: &ScoreContext<'_>,
) -> Result<(f64, BTreeMap<String, f64>), GoldPathPruned> {
    let logits = score(model, ctx.paragraph);
    let feats = FeatureContext::build(ctx.paragraph);
    let lambda_eff = ctx.soft.map_or(1.0, |s| s.lambda);
    let gold = gold.clone().normalized();
    let gold_kinds = gold.kinds();
    let e_count = ctx.paragraph.entity_count();

    let mut grad: BTreeMap<String, f64> = BTreeMap::new();
    let mut total = 0.0;
    walk_gold_path(&logits, &gold_kinds, ctx, |t0, step| {
        total += -step.probs[step.gold_index].max(f64::MIN_POSITIVE).ln();
        for (j, change) in gold.steps[t0].changes.iter().enumerate() {
            for (slot, gold_loc) in gold_params(change) {
                total += param_nll(logits.candidates(t0, j, slot), gold_loc);
            }
        }
        // Per-entity marginals of the survivor distribution.
        let mut marginal = vec![[0.0; KIND_COUNT]; e_count];
        for (kinds, &p) in step.survivors.iter().zip(&step.probs) {
            for (j, k) in kinds.iter().enumerate() {
                marginal[j][k.index()] += p;
            }
        }
        for (j, m) in marginal.iter().enumerate() {
            for kind in ChangeKind::ALL {
                let gold_hit = if gold_kinds[t0][j] == kind { 1.0 } else { 0.0 };
                let delta = m[kind.index()] - gold_hit;
                if delta == 0.0 {
                    continue;
                }
                let coeff = lambda_eff * delta;
                *grad.entry(bias_feature(kind)).or_insert(0.0) += coeff;
                for tok in &feats.action_tokens[t0] {
                    *grad.entry(act_feature(tok, kind)).or_insert(0.0) += coeff;
                }
                if feats.mentioned[t0][j] {
                    *grad.entry(mention_feature(kind)).or_insert(0.0) += coeff;
                }
                if feats.adjacent[t0][j] {
                    *grad.entry(adjacency_feature(kind)).or_insert(0.0) += coeff;
                }
            }
        }
    })?;
    Ok((total, grad))
}

/// Gradient-descent hyperparameters. Full-batch descent is deterministic;
/// the seed is recorded for reproducibility of any future stochastic variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, learning_rate: 0.5, seed: 0 }
    }
}

/// One training paragraph: structure, initial row, gold sequence.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub paragraph: &'a Paragraph,
    pub initial: &'a [EntityState],
    pub gold: &'a ActionSequence,
}

/// Training failed because a gold step is impossible under the constraints.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("paragraph {paragraph_id}: {source}")]
pub struct TrainError {
    pub paragraph_id: String,
    pub source: GoldPathPruned,
}

/// Trained model plus the mean loss recorded at the start of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LexicalScorerModel,
    pub epoch_losses: Vec<f64>,
}

/// Full-batch gradient descent on the mean loss of a gold corpus. With zero
/// epochs the model is returned unchanged and the trace is empty.
pub fn train(
    model: &LexicalScorerModel,
    corpus: &[TrainItem<'_>],
    priors: Option<SoftScoring<'_>>,
    hard: &HardConstraintConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let mut model = model.clone();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let n = corpus.len().max(1) as f64;
    for _ in 0..cfg.epochs {
        let mut grad_total: BTreeMap<String, f64> = BTreeMap::new();
        let mut loss_total = 0.0;
        for item in corpus {
            let ctx = ScoreContext {
                paragraph: item.paragraph,
                initial: item.initial,
                hard,
                soft: priors,
            };
            let (l, g) = loss_and_gradient(&model, item.gold, &ctx).map_err(|source| TrainError {
                paragraph_id: item.paragraph.id.clone(),
                source,
            })?;
            loss_total += l;
            for (k, v) in g {
                *grad_total.entry(k).or_insert(0.0) += v;
            }
        }
        epoch_losses.push(loss_total / n);
        for (k, g) in grad_total {
            *model.weights.entry(k).or_insert(0.0) -= cfg.learning_rate * g / n;
        }
    }
    Ok(TrainOutcome { model, epoch_losses })
}
