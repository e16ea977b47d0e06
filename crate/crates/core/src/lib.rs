//! Globally consistent entity state-change decoding for procedural text.
//!
//! A paragraph describing a process ("water flows down, spins the turbine,
//! ...") implies, for each entity and each sentence, one of four state
//! changes: move, create, destroy, or no change. Scoring each cell
//! independently produces globally nonsensical stories — things destroyed
//! twice, created while they exist, moved before they appear. This crate
//! decodes the whole grid jointly:
//!
//! - [`domain`] — entities, states, changes, grids, and the replay algebra
//!   connecting action sequences to state grids;
//! - [`constraints`] — six hard commonsense rules that prune impossible
//!   sequences during search and audit finished ones;
//! - [`priors`] — corpus-derived soft priors P(change | entity, topic) with
//!   logistic calibration, mixed into scores to bias the search;
//! - [`scorer`] — per-step change scores: a featurized lexical baseline with
//!   training (gold-path negative log-likelihood), or scores loaded from
//!   files produced by any external model;
//! - [`decoder`] — constrained beam search over joint per-step assignments,
//!   with an exhaustive oracle for verification;
//! - [`eval`] — the four-question evaluation (inputs, outputs, conversions,
//!   moves) with partial-credit tuple F1;
//! - [`ingest`] — versioned, tab-separated file formats for everything
//!   above.

pub mod constraints;
pub mod decoder;
pub mod domain;
pub mod eval;
pub mod ingest;
pub mod priors;
pub mod scorer;

pub use constraints::{
    build_mention_index, violations, HardConstraintConfig, MentionIndex, NodeSummary, RuleId,
    Violation,
};
pub use decoder::{
    beam_search, decode_parameters, exhaustive_search, DecodeContext, DecodeError, DecodeOutcome,
    DecoderConfig, SearchNode, SearchStats,
};
pub use domain::{
    apply, apply_lenient, diff, grid_from_sequence, grid_from_sequence_lenient,
    sequence_from_grid, ActionSequence, ChangeKind, Entity, EntityState, Grid, Location,
    Paragraph, Sentence, StateChange, StepAction, KIND_COUNT,
};
pub use eval::{derive_answers, evaluate, AnswerTuples, EvalError, QuestionScore, ScoreReport};
pub use priors::{build_priors, logistic, FrameRecord, PriorKey, PriorTable, Rule};
pub use scorer::{
    loss, loss_and_gradient, score, train, LexicalScorerModel, ScoreContext, SoftScoring,
    StepLogits, TrainConfig, TrainItem, TrainOutcome,
};
