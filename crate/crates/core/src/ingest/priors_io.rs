//! `priors-v1`: a mined count table plus its calibration parameters.
//!
//! ```text
//! priors-v1
//! x0 <TAB> 3.0
//! none_prior <TAB> 0.5
//! topic <TAB> entity_lemma <TAB> KIND <TAB> count
//! ...
//! ```
//!
//! The two header lines are mandatory and come first, in that order. Count
//! rows use change kinds only (`NONE` carries no mined counts), may appear
//! in any order, and may not repeat a (topic, lemma, kind) key. Keys are
//! lowercased on read, so a file that differs only by case is a duplicate.

use super::common::{fields, read_file, schema, IngestError};
use crate::domain::ChangeKind;
use crate::priors::{PriorKey, PriorTable};
use std::path::Path;

const VERSION: &str = "priors-v1";

pub fn read_priors(path: &Path) -> Result<PriorTable, IngestError> {
    parse_priors(&read_file(path)?, &path.display().to_string())
}

pub fn parse_priors(text: &str, path: &str) -> Result<PriorTable, IngestError> {
    let lines = super::common::content_lines(text, path, VERSION)?;
    let header = |i: usize, name: &str| -> Result<f64, IngestError> {
        let (line_no, line) = *lines
            .get(i)
            .ok_or_else(|| schema(path, 1, format!("missing `{name}` header line")))?;
        let parts = fields(line, 2, path, line_no, "header line")?;
        if parts[0] != name {
            return Err(schema(path, line_no, format!("expected `{name}` header, found {:?}", parts[0])));
        }
        super::common::parse_f64(parts[1], path, line_no, name)
    };
    let x0 = header(0, "x0")?;
    let none_prior = header(1, "none_prior")?;
    if !(none_prior > 0.0 && none_prior < 1.0) {
        return Err(schema(path, 1, format!("none_prior must lie inside (0, 1), found {none_prior}")));
    }

    let mut table = PriorTable::empty(x0, none_prior);
    for &(line_no, line) in &lines[2..] {
        let parts = fields(line, 4, path, line_no, "count line")?;
        let kind = ChangeKind::from_label(parts[2]).ok_or_else(|| {
            schema(path, line_no, format!("unknown change kind {:?}", parts[2]))
        })?;
        if kind == ChangeKind::NoChange {
            return Err(schema(path, line_no, "NONE has no mined counts; use the none_prior header"));
        }
        if parts[0].is_empty() || parts[1].is_empty() {
            return Err(schema(path, line_no, "topic and entity lemma must be non-empty"));
        }
        let count = super::common::parse_u64(parts[3], path, line_no, "count")?;
        let key = PriorKey {
            topic: parts[0].to_lowercase(),
            entity_lemma: parts[1].to_lowercase(),
            kind,
        };
        // count() reports zero for absent keys, so explicit-zero rows need a
        // presence check to be caught as duplicates.
        if table.iter().any(|(k, _)| *k == key) {
            return Err(schema(
                path,
                line_no,
                format!("duplicate count for ({:?}, {:?}, {})", parts[0], parts[1], kind.label()),
            ));
        }
        table.set_count(key, count);
    }
    Ok(table)
}

/// Canonical serialization: headers, then rows in key order.
pub fn write_priors(table: &PriorTable) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    out.push_str(&format!("x0\t{}\n", super::common::fmt_f64(table.x0)));
    out.push_str(&format!("none_prior\t{}\n", super::common::fmt_f64(table.none_prior)));
    for (key, count) in table.iter() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            key.topic,
            key.entity_lemma,
            key.kind.label(),
            count
        ));
    }
    out
}
