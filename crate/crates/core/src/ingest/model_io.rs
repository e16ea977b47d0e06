//! `model-v1`: trained scorer weights.
//!
//! ```text
//! model-v1
//! feature_name <TAB> weight
//! ```
//!
//! Weights are written with Rust's shortest round-trip float rendering, so a
//! write/read cycle reproduces every bit. Rows may appear in any order;
//! duplicate feature names are rejected. Feature names may contain any
//! non-tab characters.

use super::common::{fields, read_file, schema, IngestError};
use crate::scorer::LexicalScorerModel;
use std::collections::BTreeMap;
use std::path::Path;

const VERSION: &str = "model-v1";

pub fn read_model(path: &Path) -> Result<LexicalScorerModel, IngestError> {
    parse_model(&read_file(path)?, &path.display().to_string())
}

pub fn parse_model(text: &str, path: &str) -> Result<LexicalScorerModel, IngestError> {
    let mut weights = BTreeMap::new();
    for (line_no, line) in super::common::content_lines(text, path, VERSION)? {
        let parts = fields(line, 2, path, line_no, "weight line")?;
        if parts[0].is_empty() {
            return Err(schema(path, line_no, "feature name must be non-empty"));
        }
        let value = super::common::parse_f64(parts[1], path, line_no, "weight")?;
        if weights.insert(parts[0].to_string(), value).is_some() {
            return Err(schema(path, line_no, format!("duplicate weight for feature {:?}", parts[0])));
        }
    }
    Ok(LexicalScorerModel { weights })
}

/// Canonical serialization: one row per feature in name order.
pub fn write_model(model: &LexicalScorerModel) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    for (name, value) in &model.weights {
        debug_assert!(!name.contains('\t') && !name.starts_with('#'), "unserializable feature name");
        out.push_str(&format!("{name}\t{}\n", super::common::fmt_f64(*value)));
    }
    out
}
