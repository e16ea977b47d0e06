//! Scoring predicted grids against gold: four question families, set- and
//! tuple-F1 with partial credit, micro-pooled per question across paragraphs
//! and macro-averaged across questions.
//!
//! The four questions ask what a process consumes (inputs), what it produces
//! (outputs), what it converts (destroy + create at one step), and what it
//! moves. All four are derived mechanically from a state grid, so gold and
//! prediction are compared answer-by-answer rather than cell-by-cell.

use crate::domain::{EntityState, Grid, Location, Paragraph};
use std::collections::{BTreeMap, BTreeSet};

/// A step where something was destroyed and something else created: the
/// process turned `from` into `to` at `sentence`, at `location` (the created
/// entities' location when they agree on one, else Unknown).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversion {
    pub from: BTreeSet<String>,
    pub to: BTreeSet<String>,
    pub location: Location,
    /// 1-based sentence index.
    pub sentence: usize,
}

/// One entity changing location across a step while existing throughout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveEvent {
    pub entity: String,
    pub from: Location,
    pub to: Location,
    /// 1-based sentence index.
    pub sentence: usize,
}

/// Everything the four questions ask, derived from one grid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerTuples {
    /// Existed before the process, gone after it.
    pub inputs: BTreeSet<String>,
    /// Absent before, present after.
    pub outputs: BTreeSet<String>,
    pub conversions: Vec<Conversion>,
    pub moves: Vec<MoveEvent>,
}

/// Derive the four answer families from a grid. Deterministic: events are
/// ordered by step, then entity position.
pub fn derive_answers(grid: &Grid, paragraph: &Paragraph) -> AnswerTuples {
    let e_count = grid.entity_count();
    let t_count = grid.step_count();
    let id = |j: usize| paragraph.entities[j].id.clone();

    let mut answers = AnswerTuples::default();
    for j in 0..e_count {
        let at_start = grid.state(0, j).exists();
        let at_end = grid.state(t_count, j).exists();
        if at_start && !at_end {
            answers.inputs.insert(id(j));
        }
        if !at_start && at_end {
            answers.outputs.insert(id(j));
        }
    }
    for t in 1..=t_count {
        let mut destroyed = BTreeSet::new();
        let mut created = BTreeSet::new();
        let mut created_locations: Vec<&Location> = Vec::new();
        for j in 0..e_count {
            let before = grid.state(t - 1, j);
            let after = grid.state(t, j);
            match (before.exists(), after.exists()) {
                (true, false) => {
                    destroyed.insert(id(j));
                }
                (false, true) => {
                    created.insert(id(j));
                    if let EntityState::Exists(loc) = after {
                        created_locations.push(loc);
                    }
                }
                (true, true) => {
                    let from = before.location().expect("exists");
                    let to = after.location().expect("exists");
                    if from != to {
                        answers.moves.push(MoveEvent {
                            entity: id(j),
                            from: from.clone(),
                            to: to.clone(),
                            sentence: t,
                        });
                    }
                }
                (false, false) => {}
            }
        }
        if !destroyed.is_empty() && !created.is_empty() {
            let first = created_locations[0];
            let location = if created_locations.iter().all(|l| *l == first) {
                first.clone()
            } else {
                Location::Unknown
            };
            answers.conversions.push(Conversion { from: destroyed, to: created, location, sentence: t });
        }
    }
    answers
}

/// Precision/recall/F1 for one question.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestionScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores for the four questions plus their macro averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub inputs: QuestionScore,
    pub outputs: QuestionScore,
    pub conversions: QuestionScore,
    pub moves: QuestionScore,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl ScoreReport {
    pub fn questions(&self) -> [(&'static str, QuestionScore); 4] {
        [
            ("inputs", self.inputs),
            ("outputs", self.outputs),
            ("conversions", self.conversions),
            ("moves", self.moves),
        ]
    }
}

/// Credit mass and item counts pooled over paragraphs for one question.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    mass: f64,
    pred: u64,
    gold: u64,
}

impl Tally {
    fn add(&mut self, mass: f64, pred: usize, gold: usize) {
        self.mass += mass;
        self.pred += pred as u64;
        self.gold += gold as u64;
    }

    fn score(self) -> QuestionScore {
        let precision = if self.pred == 0 {
            if self.gold == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.mass / self.pred as f64
        };
        let recall = if self.gold == 0 {
            if self.pred == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.mass / self.gold as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        QuestionScore { precision, recall, f1 }
    }
}

/// Exact-match set scoring with the empty-side conventions: an empty
/// prediction is perfectly precise against an empty gold and worthless
/// otherwise, and symmetrically for recall.
pub fn score_sets(gold: &BTreeSet<String>, pred: &BTreeSet<String>) -> QuestionScore {
    let mut tally = Tally::default();
    tally.add(gold.intersection(pred).count() as f64, pred.len(), gold.len());
    tally.score()
}

/// Similarity of two same-sentence tuples: matching non-id fields out of 3.
pub trait EvalTuple {
    /// 1-based sentence index; equality is the pairing precondition.
    fn sentence(&self) -> usize;
    /// Fraction of the 3 non-id fields that match.
    fn similarity(&self, other: &Self) -> f64;
}

impl EvalTuple for Conversion {
    fn sentence(&self) -> usize {
        self.sentence
    }

    fn similarity(&self, other: &Self) -> f64 {
        let mut hits = 0;
        hits += usize::from(self.from == other.from);
        hits += usize::from(self.to == other.to);
        hits += usize::from(self.location == other.location);
        hits as f64 / 3.0
    }
}

impl EvalTuple for MoveEvent {
    fn sentence(&self) -> usize {
        self.sentence
    }

    fn similarity(&self, other: &Self) -> f64 {
        let mut hits = 0;
        hits += usize::from(self.entity == other.entity);
        hits += usize::from(self.from == other.from);
        hits += usize::from(self.to == other.to);
        hits as f64 / 3.0
    }
}

/// Maximum-weight one-to-one assignment over a similarity matrix, by subset
/// dynamic programming over the smaller side (candidate groups are per
/// sentence, so they stay tiny).
fn max_weight_match(sim: &[Vec<f64>]) -> f64 {
    let rows = sim.len();
    let cols = sim.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if cols > rows {
        let transposed: Vec<Vec<f64>> =
            (0..cols).map(|c| (0..rows).map(|r| sim[r][c]).collect()).collect();
        return max_weight_match(&transposed);
    }
    debug_assert!(cols <= 24, "per-sentence tuple groups are expected to be small");
    let full = 1usize << cols;
    // dp[mask]: best mass with the masked columns consumed, rows processed so
    // far each matched at most once. Skipping a row carries dp forward.
    let mut dp = vec![0.0f64; full];
    for row in sim {
        let mut next = dp.clone();
        for (mask, &base) in dp.iter().enumerate() {
            for (c, &s) in row.iter().enumerate() {
                let bit = 1usize << c;
                if mask & bit == 0 {
                    let cand = base + s;
                    if cand > next[mask | bit] {
                        next[mask | bit] = cand;
                    }
                }
            }
        }
        dp = next;
    }
    dp.iter().copied().fold(0.0, f64::max)
}

/// Total matched similarity between two tuple lists: pairs must share a
/// sentence index; within each sentence a maximum-weight one-to-one matching
/// assigns the credit.
fn matched_mass<T: EvalTuple>(gold: &[T], pred: &[T]) -> f64 {
    let mut sentences: BTreeSet<usize> = gold.iter().map(EvalTuple::sentence).collect();
    sentences.extend(pred.iter().map(EvalTuple::sentence));
    let mut total = 0.0;
    for s in sentences {
        let g: Vec<&T> = gold.iter().filter(|t| t.sentence() == s).collect();
        let p: Vec<&T> = pred.iter().filter(|t| t.sentence() == s).collect();
        if g.is_empty() || p.is_empty() {
            continue;
        }
        let sim: Vec<Vec<f64>> =
            g.iter().map(|gt| p.iter().map(|pt| gt.similarity(pt)).collect()).collect();
        total += max_weight_match(&sim);
    }
    total
}

/// Partial-credit tuple scoring for one paragraph's tuple lists.
pub fn score_tuples<T: EvalTuple>(gold: &[T], pred: &[T]) -> QuestionScore {
    let mut tally = Tally::default();
    tally.add(matched_mass(gold, pred), pred.len(), gold.len());
    tally.score()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("predictions missing for paragraphs: {}", ids.join(", "))]
    MissingPrediction { ids: Vec<String> },
    #[error("gold grids missing for paragraphs: {}", ids.join(", "))]
    MissingGold { ids: Vec<String> },
    #[error("predictions for unknown paragraphs: {}", ids.join(", "))]
    UnknownPrediction { ids: Vec<String> },
    #[error("grid for paragraph {id} is {found_steps} steps x {found_entities} entities, expected {expected_steps} x {expected_entities}")]
    GridShape {
        id: String,
        found_steps: usize,
        found_entities: usize,
        expected_steps: usize,
        expected_entities: usize,
    },
}

fn check_shape(id: &str, grid: &Grid, paragraph: &Paragraph) -> Result<(), EvalError> {
    if grid.step_count() != paragraph.step_count()
        || grid.entity_count() != paragraph.entity_count()
    {
        return Err(EvalError::GridShape {
            id: id.to_string(),
            found_steps: grid.step_count(),
            found_entities: grid.entity_count(),
            expected_steps: paragraph.step_count(),
            expected_entities: paragraph.entity_count(),
        });
    }
    Ok(())
}

/// Score predicted grids against gold grids over a corpus. Per question the
/// credit mass and item counts are pooled over paragraphs (micro), then the
/// four question F1s are averaged (macro). Prediction and gold maps must
/// cover exactly the corpus's paragraph ids.
pub fn evaluate(
    paragraphs: &[Paragraph],
    gold: &BTreeMap<String, Grid>,
    pred: &BTreeMap<String, Grid>,
) -> Result<ScoreReport, EvalError> {
    let wanted: BTreeSet<&str> = paragraphs.iter().map(|p| p.id.as_str()).collect();
    let missing: Vec<String> = paragraphs
        .iter()
        .filter(|p| !pred.contains_key(&p.id))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPrediction { ids: missing });
    }
    let missing_gold: Vec<String> = paragraphs
        .iter()
        .filter(|p| !gold.contains_key(&p.id))
        .map(|p| p.id.clone())
        .collect();
    if !missing_gold.is_empty() {
        return Err(EvalError::MissingGold { ids: missing_gold });
    }
    let unknown: Vec<String> = pred
        .keys()
        .filter(|id| !wanted.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownPrediction { ids: unknown });
    }

    let mut tallies = [Tally::default(); 4];
    for p in paragraphs {
        let g_grid = &gold[&p.id];
        let p_grid = &pred[&p.id];
        check_shape(&p.id, g_grid, p)?;
        check_shape(&p.id, p_grid, p)?;
        let g = derive_answers(g_grid, p);
        let r = derive_answers(p_grid, p);
        tallies[0].add(
            g.inputs.intersection(&r.inputs).count() as f64,
            r.inputs.len(),
            g.inputs.len(),
        );
        tallies[1].add(
            g.outputs.intersection(&r.outputs).count() as f64,
            r.outputs.len(),
            g.outputs.len(),
        );
        tallies[2].add(
            matched_mass(&g.conversions, &r.conversions),
            r.conversions.len(),
            g.conversions.len(),
        );
        tallies[3].add(matched_mass(&g.moves, &r.moves), r.moves.len(), g.moves.len());
    }
    let scores: Vec<QuestionScore> = tallies.iter().map(|t| t.score()).collect();
    Ok(ScoreReport {
        inputs: scores[0],
        outputs: scores[1],
        conversions: scores[2],
        moves: scores[3],
        macro_precision: scores.iter().map(|s| s.precision).sum::<f64>() / 4.0,
        macro_recall: scores.iter().map(|s| s.recall).sum::<f64>() / 4.0,
        macro_f1: scores.iter().map(|s| s.f1).sum::<f64>() / 4.0,
    })
}
