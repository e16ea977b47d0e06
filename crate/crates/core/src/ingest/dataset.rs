//! `dataset-v1`: paragraphs with their initial state row and, optionally, a
//! full gold grid.
//!
//! One record per paragraph, lines in fixed order:
//!
//! ```text
//! paragraph <TAB> id
//! topic     <TAB> topic text
//! sentence  <TAB> 1 <TAB> text            (repeated, indices 1..T in order)
//! entity    <TAB> id [<TAB> mention]...   (repeated; extra mention aliases)
//! state     <TAB> cell...                 (|E| cells per row)
//! end
//! ```
//!
//! State cells: `-` nonexistent, `?` exists at an unknown location, anything
//! else a location span. One state row means "initial row only"; `T + 1`
//! rows mean the full gold grid (row 0 is the initial row); any other count
//! is a dimension error.

use super::common::{dimension, fields, read_file, schema, IngestError};
use crate::domain::{Entity, EntityState, Grid, Paragraph, Sentence};
use std::collections::BTreeSet;
use std::path::Path;

/// One paragraph with its initial row and optional gold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub paragraph: Paragraph,
    pub initial: Vec<EntityState>,
    pub gold: Option<Grid>,
}

/// A parsed dataset: records in file order, ids unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn record(&self, id: &str) -> Option<&DatasetRecord> {
        self.records.iter().find(|r| r.paragraph.id == id)
    }

    pub fn paragraphs(&self) -> Vec<Paragraph> {
        self.records.iter().map(|r| r.paragraph.clone()).collect()
    }
}

const VERSION: &str = "dataset-v1";

pub fn read_dataset(path: &Path) -> Result<Dataset, IngestError> {
    parse_dataset(&read_file(path)?, &path.display().to_string())
}

pub fn parse_dataset(text: &str, path: &str) -> Result<Dataset, IngestError> {
    let lines = super::common::content_lines(text, path, VERSION)?;
    let mut records = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    let mut i = 0;

    while i < lines.len() {
        let (line_no, line) = lines[i];
        let parts = fields(line, 2, path, line_no, "paragraph line")?;
        if parts[0] != "paragraph" {
            return Err(schema(path, line_no, format!("expected `paragraph`, found {:?}", parts[0])));
        }
        let id = parts[1];
        if id.is_empty() {
            return Err(schema(path, line_no, "paragraph id must be non-empty"));
        }
        if !seen_ids.insert(id.to_string()) {
            return Err(schema(path, line_no, format!("duplicate paragraph id {id:?}")));
        }
        i += 1;

        let (topic_line_no, topic_line) = *lines.get(i).ok_or_else(|| {
            schema(path, line_no, format!("paragraph {id:?} is truncated: missing topic"))
        })?;
        let parts = fields(topic_line, 2, path, topic_line_no, "topic line")?;
        if parts[0] != "topic" {
            return Err(schema(path, topic_line_no, format!("expected `topic`, found {:?}", parts[0])));
        }
        if parts[1].is_empty() {
            return Err(schema(path, topic_line_no, "topic must be non-empty"));
        }
        let topic = parts[1].to_string();
        i += 1;

        let mut sentences: Vec<Sentence> = Vec::new();
        while let Some(&(n, l)) = lines.get(i) {
            if !l.starts_with("sentence\t") {
                break;
            }
            let parts = fields(l, 3, path, n, "sentence line")?;
            let index = super::common::parse_index(parts[1], path, n, "sentence index")?;
            if index != sentences.len() + 1 {
                return Err(schema(
                    path,
                    n,
                    format!("sentence index {index} out of order; expected {}", sentences.len() + 1),
                ));
            }
            if parts[2].is_empty() {
                return Err(schema(path, n, "sentence text must be non-empty"));
            }
            sentences.push(Sentence::new(index, parts[2]));
            i += 1;
        }

        let mut entities: Vec<Entity> = Vec::new();
        while let Some(&(n, l)) = lines.get(i) {
            if !l.starts_with("entity\t") {
                break;
            }
            let parts: Vec<&str> = l.split('\t').collect();
            if parts.len() < 2 || parts[1].is_empty() {
                return Err(schema(path, n, "entity line needs a non-empty id"));
            }
            if parts.iter().skip(2).any(|m| m.is_empty()) {
                return Err(schema(path, n, "entity mentions must be non-empty"));
            }
            entities.push(Entity::new(parts[1], parts[2..].iter().map(|s| s.to_string())));
            i += 1;
        }

        let mut state_rows: Vec<(usize, Vec<EntityState>)> = Vec::new();
        while let Some(&(n, l)) = lines.get(i) {
            if !l.starts_with("state\t") {
                break;
            }
            let parts: Vec<&str> = l.split('\t').collect();
            if parts.len() != entities.len() + 1 {
                return Err(dimension(
                    path,
                    n,
                    format!(
                        "state row has {} cells for {} entities",
                        parts.len() - 1,
                        entities.len()
                    ),
                ));
            }
            let mut row = Vec::with_capacity(entities.len());
            for cell in &parts[1..] {
                if cell.is_empty() {
                    return Err(schema(path, n, "state cells must be non-empty"));
                }
                row.push(EntityState::from_token(cell));
            }
            state_rows.push((n, row));
            i += 1;
        }

        let (end_line_no, end_line) = *lines.get(i).ok_or_else(|| {
            schema(path, line_no, format!("paragraph {id:?} is truncated: missing `end`"))
        })?;
        if end_line != "end" {
            return Err(schema(path, end_line_no, format!("expected `end`, found {end_line:?}")));
        }
        i += 1;

        let paragraph = Paragraph::new(id, topic, sentences, entities)
            .map_err(|e| schema(path, line_no, e.to_string()))?;
        let t = paragraph.step_count();
        let record = match state_rows.len() {
            1 => DatasetRecord {
                initial: state_rows.pop().expect("one row").1,
                gold: None,
                paragraph,
            },
            n if n == t + 1 => {
                let rows: Vec<Vec<EntityState>> = state_rows.into_iter().map(|(_, r)| r).collect();
                let grid = Grid::new(rows).map_err(|e| schema(path, line_no, e.to_string()))?;
                DatasetRecord { initial: grid.initial_row().to_vec(), gold: Some(grid), paragraph }
            }
            n => {
                return Err(dimension(
                    path,
                    line_no,
                    format!(
                        "paragraph {id:?} has {n} state rows; expected 1 (initial only) or {} (T + 1)",
                        t + 1
                    ),
                ));
            }
        };
        records.push(record);
    }
    Ok(Dataset { records })
}

/// Canonical serialization. Entity mention aliases are emitted in sorted
/// order, the id itself omitted (it is always implicitly a mention).
pub fn write_dataset(dataset: &Dataset) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    for record in &dataset.records {
        let p = &record.paragraph;
        out.push_str(&format!("paragraph\t{}\n", p.id));
        out.push_str(&format!("topic\t{}\n", p.topic));
        for s in &p.sentences {
            out.push_str(&format!("sentence\t{}\t{}\n", s.index, s.text));
        }
        for e in &p.entities {
            out.push_str("entity\t");
            out.push_str(&e.id);
            for m in e.mentions() {
                if *m != e.id {
                    out.push('\t');
                    out.push_str(m);
                }
            }
            out.push('\n');
        }
        let rows: Vec<&[EntityState]> = match &record.gold {
            Some(grid) => grid.rows().iter().map(Vec::as_slice).collect(),
            None => vec![record.initial.as_slice()],
        };
        for row in rows {
            out.push_str("state");
            for cell in row {
                out.push('\t');
                out.push_str(&cell.as_token());
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    out
}
