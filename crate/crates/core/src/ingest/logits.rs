//! `logits-v1`: per-paragraph score blocks produced by an external model.
//!
//! ```text
//! paragraph <TAB> id
//! dims <TAB> T <TAB> E <TAB> K
//! row  <TAB> t <TAB> j <TAB> v_move <TAB> v_create <TAB> v_destroy <TAB> v_none
//! span <TAB> t <TAB> j <TAB> before|after <TAB> text <TAB> score
//! end
//! ```
//!
//! `t` is the 1-based sentence index, `j` the 0-based entity column. K must
//! be 4 and each (t, j) cell must appear exactly once (any order). `span`
//! lines are optional: a slot with no lines falls back to the default
//! candidate enumeration over the sentence; a slot with lines uses exactly
//! those candidates (plus `Unknown`, injected at score 0 when missing), with
//! file order breaking score ties. The text `?` names the Unknown location;
//! `-` is reserved and rejected.

use super::common::{dimension, fields, read_file, schema, IngestError};
use crate::domain::{ChangeKind, Location, Paragraph, KIND_COUNT};
use crate::scorer::{default_candidates, ParamSlot, SlotCandidates, StepLogits};
use std::collections::BTreeMap;
use std::path::Path;

const VERSION: &str = "logits-v1";

pub fn read_logits(
    path: &Path,
    paragraphs: &[Paragraph],
) -> Result<BTreeMap<String, StepLogits>, IngestError> {
    parse_logits(&read_file(path)?, &path.display().to_string(), paragraphs)
}

/// Rank a slot's file candidates: inject Unknown at score 0 when absent,
/// then stable-sort by score descending (file order breaks ties).
fn finalize_slot(mut cands: Vec<(Location, f64)>) -> Vec<(Location, f64)> {
    if !cands.iter().any(|(l, _)| *l == Location::Unknown) {
        cands.push((Location::Unknown, 0.0));
    }
    cands.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("scores are finite"));
    cands
}

pub fn parse_logits(
    text: &str,
    path: &str,
    paragraphs: &[Paragraph],
) -> Result<BTreeMap<String, StepLogits>, IngestError> {
    let lines = super::common::content_lines(text, path, VERSION)?;
    let by_id: BTreeMap<&str, &Paragraph> =
        paragraphs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut out: BTreeMap<String, StepLogits> = BTreeMap::new();

    let mut i = 0;
    while i < lines.len() {
        let (line_no, line) = lines[i];
        let parts = fields(line, 2, path, line_no, "paragraph line")?;
        if parts[0] != "paragraph" {
            return Err(schema(path, line_no, format!("expected `paragraph`, found {:?}", parts[0])));
        }
        let id = parts[1];
        let paragraph = *by_id.get(id).ok_or_else(|| {
            schema(path, line_no, format!("logits for unknown paragraph {id:?}"))
        })?;
        if out.contains_key(id) {
            return Err(schema(path, line_no, format!("duplicate logits block for {id:?}")));
        }
        i += 1;

        let (dims_no, dims_line) = *lines
            .get(i)
            .ok_or_else(|| schema(path, line_no, "truncated block: missing dims"))?;
        let parts = fields(dims_line, 4, path, dims_no, "dims line")?;
        if parts[0] != "dims" {
            return Err(schema(path, dims_no, format!("expected `dims`, found {:?}", parts[0])));
        }
        let t_total = super::common::parse_index(parts[1], path, dims_no, "step count")?;
        let e_total = super::common::parse_index(parts[2], path, dims_no, "entity count")?;
        let k_total = super::common::parse_index(parts[3], path, dims_no, "kind count")?;
        if k_total != KIND_COUNT {
            return Err(dimension(
                path,
                dims_no,
                format!("expected {KIND_COUNT} kinds, found {k_total}"),
            ));
        }
        if t_total != paragraph.step_count() || e_total != paragraph.entity_count() {
            return Err(dimension(
                path,
                dims_no,
                format!(
                    "block is {t_total} x {e_total} but paragraph {id:?} is {} x {}",
                    paragraph.step_count(),
                    paragraph.entity_count()
                ),
            ));
        }
        i += 1;

        let mut values = vec![vec![None::<[f64; KIND_COUNT]>; e_total]; t_total];
        let mut file_spans: Vec<Vec<[Option<Vec<(Location, f64)>>; 2]>> =
            vec![(0..e_total).map(|_| [None, None]).collect(); t_total];

        loop {
            let (n, l) = *lines
                .get(i)
                .ok_or_else(|| schema(path, line_no, "truncated block: missing `end`"))?;
            if l == "end" {
                i += 1;
                break;
            }
            let tag = l.split('\t').next().unwrap_or("");
            match tag {
                "row" => {
                    let parts = fields(l, 3 + KIND_COUNT, path, n, "row line")?;
                    let t = super::common::parse_index(parts[1], path, n, "sentence index")?;
                    let j = super::common::parse_index(parts[2], path, n, "entity column")?;
                    if t == 0 || t > t_total || j >= e_total {
                        return Err(schema(
                            path,
                            n,
                            format!("cell ({t}, {j}) outside the {t_total} x {e_total} block"),
                        ));
                    }
                    if values[t - 1][j].is_some() {
                        return Err(schema(path, n, format!("duplicate row for cell ({t}, {j})")));
                    }
                    let mut cell = [0.0; KIND_COUNT];
                    for (k, field) in parts[3..].iter().enumerate() {
                        cell[k] = super::common::parse_f64(field, path, n, "logit")?;
                    }
                    values[t - 1][j] = Some(cell);
                }
                "span" => {
                    let parts = fields(l, 6, path, n, "span line")?;
                    let t = super::common::parse_index(parts[1], path, n, "sentence index")?;
                    let j = super::common::parse_index(parts[2], path, n, "entity column")?;
                    if t == 0 || t > t_total || j >= e_total {
                        return Err(schema(
                            path,
                            n,
                            format!("cell ({t}, {j}) outside the {t_total} x {e_total} block"),
                        ));
                    }
                    let slot = ParamSlot::from_label(parts[3]).ok_or_else(|| {
                        schema(path, n, format!("slot must be `before` or `after`, found {:?}", parts[3]))
                    })?;
                    let location = match parts[4] {
                        "-" => {
                            return Err(schema(path, n, "`-` is reserved; spans name a location or `?`"))
                        }
                        "" => return Err(schema(path, n, "span text must be non-empty")),
                        "?" => Location::Unknown,
                        text => Location::span(text),
                    };
                    let score = super::common::parse_f64(parts[5], path, n, "span score")?;
                    let list = file_spans[t - 1][j][slot as usize].get_or_insert_with(Vec::new);
                    if list.iter().any(|(l, _)| *l == location) {
                        return Err(schema(
                            path,
                            n,
                            format!("duplicate span {:?} for cell ({t}, {j}) {}", parts[4], parts[3]),
                        ));
                    }
                    list.push((location, score));
                }
                other => {
                    return Err(schema(
                        path,
                        n,
                        format!("expected `row`, `span`, or `end`, found {other:?}"),
                    ));
                }
            }
            i += 1;
        }

        let mut cells = Vec::with_capacity(t_total);
        for (t0, row) in values.into_iter().enumerate() {
            let mut filled = Vec::with_capacity(e_total);
            for (j, cell) in row.into_iter().enumerate() {
                filled.push(cell.ok_or_else(|| {
                    dimension(path, line_no, format!("missing row for cell ({}, {j})", t0 + 1))
                })?);
            }
            cells.push(filled);
        }
        let spans: Vec<Vec<SlotCandidates>> = file_spans
            .into_iter()
            .enumerate()
            .map(|(t0, row)| {
                let defaults = default_candidates(&paragraph.sentences[t0]);
                row.into_iter()
                    .map(|[before, after]| SlotCandidates {
                        before: before.map_or_else(|| defaults.clone(), finalize_slot),
                        after: after.map_or_else(|| defaults.clone(), finalize_slot),
                    })
                    .collect()
            })
            .collect();
        out.insert(id.to_string(), StepLogits::new(cells, spans));
    }
    Ok(out)
}

/// Canonical serialization: rows in (t, j) order; span lines only for slots
/// whose ranking differs from the sentence's default enumeration.
pub fn write_logits(items: &[(&Paragraph, &StepLogits)]) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    for (paragraph, logits) in items {
        out.push_str(&format!("paragraph\t{}\n", paragraph.id));
        let (t_total, e_total) = (logits.step_count(), logits.entity_count());
        out.push_str(&format!("dims\t{t_total}\t{e_total}\t{KIND_COUNT}\n"));
        for t0 in 0..t_total {
            for j in 0..e_total {
                out.push_str(&format!("row\t{}\t{j}", t0 + 1));
                for kind in ChangeKind::ALL {
                    out.push('\t');
                    out.push_str(&super::common::fmt_f64(logits.logit(t0, j, kind)));
                }
                out.push('\n');
            }
        }
        for t0 in 0..t_total {
            let defaults = default_candidates(&paragraph.sentences[t0]);
            for j in 0..e_total {
                for slot in [ParamSlot::Before, ParamSlot::After] {
                    let cands = logits.candidates(t0, j, slot);
                    if cands == defaults.as_slice() {
                        continue;
                    }
                    for (loc, score) in cands {
                        out.push_str(&format!(
                            "span\t{}\t{j}\t{}\t{}\t{}\n",
                            t0 + 1,
                            slot.label(),
                            loc.as_token(),
                            super::common::fmt_f64(*score)
                        ));
                    }
                }
            }
        }
        out.push_str("end\n");
    }
    out
}
