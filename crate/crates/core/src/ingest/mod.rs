//! Versioned file formats.
//!
//! Every format is UTF-8 with LF line endings and tab-separated fields, and
//! starts with a version line (`dataset-v1`, `predictions-v1`, ...). Lines
//! that are empty or start with `#` are skipped everywhere, so tools may
//! echo their effective configuration into any artifact's header without
//! breaking readers. Parsers reject rather than repair: every failure names
//! the file and line (frames are the one sanctioned exception — mined frame
//! streams are noisy, so malformed frame lines are skipped and tallied).
//!
//! Writers are canonical: parse(write(parse(x))) == parse(x), and writing
//! the same value twice yields identical bytes.

mod common;
pub mod dataset;
pub mod frames;
pub mod logits;
pub mod model_io;
pub mod predictions;
pub mod priors_io;
pub mod report;
pub mod rules;

pub use common::IngestError;
pub use dataset::{parse_dataset, read_dataset, write_dataset, Dataset, DatasetRecord};
pub use frames::{parse_frames, read_frames, write_frames, ParsedFrames};
pub use logits::{parse_logits, read_logits, write_logits};
pub use model_io::{parse_model, read_model, write_model};
pub use predictions::{
    parse_predictions, prediction_grids, read_predictions, write_predictions, PredictedParagraph,
    PredictionSet,
};
pub use priors_io::{parse_priors, read_priors, write_priors};
pub use report::{render_report_table, write_lint, write_report};
pub use rules::{parse_rules, read_rules, write_rules};
