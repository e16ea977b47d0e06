//! `predictions-v1`: decoded action sequences, one row per
//! (paragraph, sentence, entity) cell.
//!
//! ```text
//! paragraph_id <TAB> sentence <TAB> entity <TAB> kind <TAB> before <TAB> after
//! ```
//!
//! `kind` is `MOVE | CREATE | DESTROY | NONE`. Location slots use `?` for an
//! unknown location and `-` for a slot the kind does not carry (`NONE` has
//! neither, `CREATE` no before, `DESTROY` no after). Rows are grouped by
//! paragraph, then sentence (1..T contiguous), with every sentence block
//! repeating the same entities in the same order; that order is the
//! paragraph's entity column order.

use super::common::{fields, read_file, schema, IngestError};
use super::dataset::Dataset;
use crate::domain::{
    grid_from_sequence_lenient, ActionSequence, ChangeKind, Grid, Location, StateChange,
    StepAction,
};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// One paragraph's decoded sequence plus the entity column order it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedParagraph {
    pub id: String,
    pub entity_ids: Vec<String>,
    pub sequence: ActionSequence,
}

/// All predictions of one run, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub paragraphs: Vec<PredictedParagraph>,
}

const VERSION: &str = "predictions-v1";

fn location_token(loc: &Location) -> &str {
    loc.as_token()
}

fn parse_location(tok: &str, path: &str, line: usize, slot: &str) -> Result<Location, IngestError> {
    match tok {
        "-" => Err(schema(path, line, format!("{slot} location is required for this kind"))),
        "?" => Ok(Location::Unknown),
        "" => Err(schema(path, line, format!("{slot} location must be non-empty"))),
        text => Ok(Location::span(text)),
    }
}

fn require_absent(tok: &str, path: &str, line: usize, slot: &str, kind: &str) -> Result<(), IngestError> {
    if tok != "-" {
        return Err(schema(
            path,
            line,
            format!("{kind} carries no {slot} location; the slot must be `-`, found {tok:?}"),
        ));
    }
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<PredictionSet, IngestError> {
    parse_predictions(&read_file(path)?, &path.display().to_string())
}

pub fn parse_predictions(text: &str, path: &str) -> Result<PredictionSet, IngestError> {
    let lines = super::common::content_lines(text, path, VERSION)?;

    // Raw rows: (line, id, sentence, entity, change).
    struct Row {
        line: usize,
        id: String,
        sentence: usize,
        entity: String,
        change: StateChange,
    }
    let mut rows = Vec::with_capacity(lines.len());
    for (line_no, line) in lines {
        let parts = fields(line, 6, path, line_no, "prediction row")?;
        let (id, sentence_tok, entity, kind_tok, before_tok, after_tok) =
            (parts[0], parts[1], parts[2], parts[3], parts[4], parts[5]);
        if id.is_empty() || entity.is_empty() {
            return Err(schema(path, line_no, "paragraph and entity ids must be non-empty"));
        }
        let sentence = super::common::parse_index(sentence_tok, path, line_no, "sentence index")?;
        let kind = ChangeKind::from_label(kind_tok).ok_or_else(|| {
            schema(path, line_no, format!("unknown change kind {kind_tok:?}"))
        })?;
        let change = match kind {
            ChangeKind::Move => StateChange::Move {
                before: parse_location(before_tok, path, line_no, "before")?,
                after: parse_location(after_tok, path, line_no, "after")?,
            },
            ChangeKind::Create => {
                require_absent(before_tok, path, line_no, "before", "CREATE")?;
                StateChange::Create { after: parse_location(after_tok, path, line_no, "after")? }
            }
            ChangeKind::Destroy => {
                require_absent(after_tok, path, line_no, "after", "DESTROY")?;
                StateChange::Destroy {
                    before: parse_location(before_tok, path, line_no, "before")?,
                }
            }
            ChangeKind::NoChange => {
                require_absent(before_tok, path, line_no, "before", "NONE")?;
                require_absent(after_tok, path, line_no, "after", "NONE")?;
                StateChange::NoChange
            }
        };
        rows.push(Row {
            line: line_no,
            id: id.to_string(),
            sentence,
            entity: entity.to_string(),
            change,
        });
    }

    // Group into paragraphs, enforcing contiguity and rectangular shape.
    let mut set = PredictionSet::default();
    let mut closed: BTreeSet<String> = BTreeSet::new();
    let mut i = 0;
    while i < rows.len() {
        let id = rows[i].id.clone();
        if closed.contains(&id) {
            return Err(schema(
                path,
                rows[i].line,
                format!("rows for paragraph {id:?} must be contiguous"),
            ));
        }
        let mut j = i;
        while j < rows.len() && rows[j].id == id {
            j += 1;
        }
        let block = &rows[i..j];

        // Entity order is fixed by the first sentence block.
        let mut entity_ids: Vec<String> = Vec::new();
        for row in block.iter().take_while(|r| r.sentence == block[0].sentence) {
            if entity_ids.contains(&row.entity) {
                return Err(schema(
                    path,
                    row.line,
                    format!("entity {:?} repeats within a sentence", row.entity),
                ));
            }
            entity_ids.push(row.entity.clone());
        }
        if block[0].sentence != 1 {
            return Err(schema(path, block[0].line, "sentence indices must start at 1"));
        }
        let e = entity_ids.len();
        if block.len() % e != 0 {
            return Err(schema(
                path,
                block[0].line,
                format!("paragraph {id:?} has {} rows, not a multiple of {e} entities", block.len()),
            ));
        }
        let t = block.len() / e;
        let mut steps = Vec::with_capacity(t);
        for s in 0..t {
            let chunk = &block[s * e..(s + 1) * e];
            let mut changes = Vec::with_capacity(e);
            for (k, row) in chunk.iter().enumerate() {
                if row.sentence != s + 1 {
                    return Err(schema(
                        path,
                        row.line,
                        format!("expected sentence {}, found {}", s + 1, row.sentence),
                    ));
                }
                if row.entity != entity_ids[k] {
                    return Err(schema(
                        path,
                        row.line,
                        format!(
                            "entity order must repeat per sentence: expected {:?}, found {:?}",
                            entity_ids[k], row.entity
                        ),
                    ));
                }
                changes.push(row.change.clone());
            }
            steps.push(StepAction { changes });
        }
        set.paragraphs.push(PredictedParagraph {
            id: id.clone(),
            entity_ids,
            sequence: ActionSequence { steps },
        });
        closed.insert(id);
        i = j;
    }
    Ok(set)
}

/// Canonical serialization; lossless against [`parse_predictions`].
pub fn write_predictions(set: &PredictionSet) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    for p in &set.paragraphs {
        for (s, step) in p.sequence.steps.iter().enumerate() {
            for (j, change) in step.changes.iter().enumerate() {
                let (kind, before, after) = match change {
                    StateChange::Move { before, after } => {
                        ("MOVE", location_token(before), location_token(after))
                    }
                    StateChange::Create { after } => ("CREATE", "-", location_token(after)),
                    StateChange::Destroy { before } => ("DESTROY", location_token(before), "-"),
                    StateChange::NoChange => ("NONE", "-", "-"),
                };
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    p.id,
                    s + 1,
                    p.entity_ids[j],
                    kind,
                    before,
                    after
                ));
            }
        }
    }
    out
}

/// Replay predictions over the dataset's initial rows, producing grids keyed
/// by paragraph id (the shape [`crate::eval::evaluate`] consumes). Sequences
/// from unconstrained decodes may be physically impossible; replay is
/// lenient so they still yield a grid. Entity columns must match the
/// dataset's paragraphs exactly.
pub fn prediction_grids(
    set: &PredictionSet,
    dataset: &Dataset,
) -> Result<BTreeMap<String, Grid>, IngestError> {
    let mut grids = BTreeMap::new();
    for p in &set.paragraphs {
        let record = dataset.record(&p.id).ok_or_else(|| IngestError::Alignment {
            message: format!("predictions cover unknown paragraph {:?}", p.id),
        })?;
        let expected: Vec<&str> =
            record.paragraph.entities.iter().map(|e| e.id.as_str()).collect();
        let found: Vec<&str> = p.entity_ids.iter().map(String::as_str).collect();
        if expected != found {
            return Err(IngestError::Alignment {
                message: format!(
                    "paragraph {:?}: prediction entities [{}] do not match the dataset's [{}]",
                    p.id,
                    found.join(", "),
                    expected.join(", ")
                ),
            });
        }
        if p.sequence.steps.len() != record.paragraph.step_count() {
            return Err(IngestError::Alignment {
                message: format!(
                    "paragraph {:?}: {} predicted steps for {} sentences",
                    p.id,
                    p.sequence.steps.len(),
                    record.paragraph.step_count()
                ),
            });
        }
        grids.insert(p.id.clone(), grid_from_sequence_lenient(&record.initial, &p.sequence));
    }
    Ok(grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Location;

    fn sample() -> PredictionSet {
        PredictionSet {
            paragraphs: vec![PredictedParagraph {
                id: "hydro".into(),
                entity_ids: vec!["water".into(), "electricity".into()],
                sequence: ActionSequence {
                    steps: vec![
                        StepAction {
                            changes: vec![
                                StateChange::Move {
                                    before: Location::Unknown,
                                    after: Location::span("turbine"),
                                },
                                StateChange::NoChange,
                            ],
                        },
                        StepAction {
                            changes: vec![
                                StateChange::NoChange,
                                StateChange::Create { after: Location::span("generator") },
                            ],
                        },
                    ],
                },
            }],
        }
    }

    #[test]
    fn round_trips_losslessly() {
        let set = sample();
        let text = write_predictions(&set);
        let parsed = parse_predictions(&text, "<mem>").unwrap();
        assert_eq!(parsed, set);
        assert_eq!(write_predictions(&parsed), text);
    }

    #[test]
    fn empty_corpus_is_a_bare_header() {
        let set = PredictionSet::default();
        let text = write_predictions(&set);
        assert_eq!(text, "predictions-v1\n");
        assert_eq!(parse_predictions(&text, "<mem>").unwrap(), set);
    }

    #[test]
    fn unknown_kind_token_is_named_in_the_error() {
        let text = "predictions-v1\nhydro\t1\twater\tMAKE\t-\t-\n";
        let err = parse_predictions(text, "<mem>").unwrap_err();
        assert!(err.to_string().contains("MAKE"), "{err}");
    }

    #[test]
    fn slot_discipline_is_enforced_per_kind() {
        // NONE with a location present.
        let text = "predictions-v1\np\t1\te\tNONE\tsoil\t-\n";
        let err = parse_predictions(text, "<mem>").unwrap_err();
        assert!(err.to_string().contains("NONE carries no before location"));

        // CREATE missing its after location.
        let text = "predictions-v1\np\t1\te\tCREATE\t-\t-\n";
        let err = parse_predictions(text, "<mem>").unwrap_err();
        assert!(err.to_string().contains("after location is required"));

        // MOVE with `?` on both sides is legal (unknown but present).
        let text = "predictions-v1\np\t1\te\tMOVE\t?\t?\n";
        let set = parse_predictions(text, "<mem>").unwrap();
        assert_eq!(
            set.paragraphs[0].sequence.steps[0].changes[0],
            StateChange::Move { before: Location::Unknown, after: Location::Unknown }
        );
    }

    #[test]
    fn grouping_violations_are_rejected() {
        // Non-contiguous paragraph rows.
        let text = concat!(
            "predictions-v1\n",
            "a\t1\te\tNONE\t-\t-\n",
            "b\t1\te\tNONE\t-\t-\n",
            "a\t2\te\tNONE\t-\t-\n",
        );
        let err = parse_predictions(text, "<mem>").unwrap_err();
        assert!(err.to_string().contains("contiguous"));

        // Entity order changes between sentences.
        let text = concat!(
            "predictions-v1\n",
            "a\t1\tx\tNONE\t-\t-\n",
            "a\t1\ty\tNONE\t-\t-\n",
            "a\t2\ty\tNONE\t-\t-\n",
            "a\t2\tx\tNONE\t-\t-\n",
        );
        let err = parse_predictions(text, "<mem>").unwrap_err();
        assert!(err.to_string().contains("entity order"));

        // Sentences must start at 1.
        let text = "predictions-v1\na\t2\tx\tNONE\t-\t-\n";
        let err = parse_predictions(text, "<mem>").unwrap_err();
        assert!(err.to_string().contains("start at 1"));
    }

    #[test]
    fn grids_replay_over_dataset_initial_rows() {
        let doc = concat!(
            "dataset-v1\n",
            "paragraph\thydro\n",
            "topic\tt\n",
            "sentence\t1\tWater moves .\n",
            "sentence\t2\tPower appears .\n",
            "entity\twater\n",
            "entity\telectricity\n",
            "state\t?\t-\n",
            "end\n",
        );
        let ds = super::super::dataset::parse_dataset(doc, "<mem>").unwrap();
        let grids = prediction_grids(&sample(), &ds).unwrap();
        let g = &grids["hydro"];
        assert_eq!(g.state(1, 0), &crate::domain::EntityState::Exists(Location::span("turbine")));
        assert_eq!(g.state(2, 1), &crate::domain::EntityState::Exists(Location::span("generator")));

        // Entity mismatch is an alignment failure.
        let mut set = sample();
        set.paragraphs[0].entity_ids.swap(0, 1);
        match prediction_grids(&set, &ds) {
            Err(IngestError::Alignment { message }) => {
                assert!(message.contains("do not match"), "{message}");
            }
            other => panic!("expected Alignment, got {other:?}"),
        }
    }
}
