//! The six subcommand implementations.
//!
//! Shared conventions: inputs are read fully before any output is produced,
//! per-paragraph work runs on the rayon pool in dataset order, and artifacts
//! are written through a temporary file in the destination directory so a
//! crash never leaves a half-written output.

use crate::config::{render_header, render_toml, RunConfig};
use crate::{CliError, DecodeArgs, EvalArgs, LintArgs, PriorsArgs, TrainArgs, TuneArgs};
use rayon::prelude::*;
use stategrid::ingest::{
    prediction_grids, read_dataset, read_frames, read_logits, read_model, read_predictions,
    read_priors, read_rules, render_report_table, write_lint, write_model, write_predictions,
    write_priors, write_report, Dataset, PredictedParagraph, PredictionSet,
};
use stategrid::{
    beam_search, build_priors, evaluate, sequence_from_grid, violations, DecodeContext,
    DecodeOutcome, Grid, LexicalScorerModel, PriorTable, SoftScoring, StepLogits, TrainItem,
    Violation,
};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

/// Write `contents` to `path` atomically: a uniquely named temporary file in
/// the same directory, then a rename over the destination.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err =
        |source: std::io::Error| CliError::Io { path: path.display().to_string(), source };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Every paragraph must carry a gold grid; name the offenders otherwise.
fn require_gold(dataset: &Dataset, task: &str) -> Result<(), CliError> {
    let missing: Vec<&str> = dataset
        .records
        .iter()
        .filter(|r| r.gold.is_none())
        .map(|r| r.paragraph.id.as_str())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{task} requires gold grids; missing for paragraphs: {}",
            missing.join(", ")
        )))
    }
}

fn gold_grids(dataset: &Dataset) -> BTreeMap<String, Grid> {
    dataset
        .records
        .iter()
        .filter_map(|r| r.gold.clone().map(|g| (r.paragraph.id.clone(), g)))
        .collect()
}

/// Resolve the score source into one logit block per record, dataset order.
fn load_scores(
    logits: Option<&Path>,
    model: Option<&Path>,
    dataset: &Dataset,
) -> Result<Vec<StepLogits>, CliError> {
    if let Some(path) = logits {
        let paragraphs = dataset.paragraphs();
        let map = read_logits(path, &paragraphs)?;
        let missing: Vec<&str> = dataset
            .records
            .iter()
            .filter(|r| !map.contains_key(&r.paragraph.id))
            .map(|r| r.paragraph.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Data(format!(
                "logit blocks missing for paragraphs: {}",
                missing.join(", ")
            )));
        }
        Ok(dataset.records.iter().map(|r| map[&r.paragraph.id].clone()).collect())
    } else {
        let model = read_model(model.expect("clap requires exactly one score source"))?;
        Ok(dataset.records.iter().map(|r| stategrid::score(&model, &r.paragraph)).collect())
    }
}

/// Beam-decode every record in parallel; results come back in dataset order.
fn decode_all(
    dataset: &Dataset,
    scores: &[StepLogits],
    priors: Option<&PriorTable>,
    cfg: &RunConfig,
) -> Result<Vec<DecodeOutcome>, CliError> {
    dataset
        .records
        .par_iter()
        .zip(scores.par_iter())
        .map(|(record, logits)| {
            let ctx = DecodeContext {
                paragraph: &record.paragraph,
                initial: &record.initial,
                logits,
                priors,
                hard: &cfg.hard,
                decoder: &cfg.decoder,
            };
            beam_search(&ctx).map_err(CliError::from)
        })
        .collect()
}

pub fn decode(args: &DecodeArgs, mut cfg: RunConfig) -> Result<i32, CliError> {
    if let Some(beam) = args.beam {
        cfg.decoder.beam_width = beam;
    }
    if let Some(lambda) = args.lambda {
        cfg.decoder.lambda = lambda;
    }
    if args.no_hard {
        cfg.decoder.use_hard = false;
    }
    if args.no_soft {
        cfg.decoder.use_soft = false;
    }
    cfg.validate()?;

    let dataset = read_dataset(&args.dataset)?;
    let scores = load_scores(args.logits.as_deref(), args.model.as_deref(), &dataset)?;
    let priors = args.priors.as_deref().map(read_priors).transpose()?;
    let outcomes = decode_all(&dataset, &scores, priors.as_ref(), &cfg)?;

    let mut set = PredictionSet::default();
    let mut trace = String::new();
    for (record, outcome) in dataset.records.iter().zip(&outcomes) {
        set.paragraphs.push(PredictedParagraph {
            id: record.paragraph.id.clone(),
            entity_ids: record.paragraph.entities.iter().map(|e| e.id.clone()).collect(),
            sequence: outcome.sequence.clone(),
        });
        trace.push_str(&format!("{}\t{:?}\n", record.paragraph.id, outcome.score));
    }
    let artifact = format!("{}{}", render_header("decode", &cfg), write_predictions(&set));
    write_atomic(&args.out, &artifact)?;
    print!("{trace}");
    Ok(0)
}

pub fn train(args: &TrainArgs, mut cfg: RunConfig) -> Result<i32, CliError> {
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(rate) = args.learning_rate {
        cfg.train.learning_rate = rate;
    }
    if let Some(lambda) = args.lambda {
        cfg.decoder.lambda = lambda;
    }
    cfg.validate()?;

    let dataset = read_dataset(&args.dataset)?;
    require_gold(&dataset, "train")?;
    let priors = args.priors.as_deref().map(read_priors).transpose()?;
    let soft =
        priors.as_ref().map(|table| SoftScoring { table, lambda: cfg.decoder.lambda });

    let gold: Vec<_> = dataset
        .records
        .iter()
        .map(|r| sequence_from_grid(r.gold.as_ref().expect("gold checked above")))
        .collect();
    let corpus: Vec<TrainItem<'_>> = dataset
        .records
        .iter()
        .zip(&gold)
        .map(|(r, g)| TrainItem { paragraph: &r.paragraph, initial: &r.initial, gold: g })
        .collect();
    let outcome =
        stategrid::train(&LexicalScorerModel::default(), &corpus, soft, &cfg.hard, &cfg.train)?;

    let artifact = format!("{}{}", render_header("train", &cfg), write_model(&outcome.model));
    write_atomic(&args.out, &artifact)?;
    let mut trace = String::new();
    for (epoch, loss) in outcome.epoch_losses.iter().enumerate() {
        trace.push_str(&format!("epoch\t{}\t{:?}\n", epoch + 1, loss));
    }
    print!("{trace}");
    Ok(0)
}

pub fn eval(args: &EvalArgs, cfg: RunConfig) -> Result<i32, CliError> {
    cfg.validate()?;
    let dataset = read_dataset(&args.dataset)?;
    require_gold(&dataset, "eval")?;
    let set = read_predictions(&args.pred)?;
    let pred = prediction_grids(&set, &dataset)?;
    let gold = gold_grids(&dataset);
    let paragraphs = dataset.paragraphs();
    let report = evaluate(&paragraphs, &gold, &pred)?;
    if let Some(out) = &args.out {
        let artifact = format!("{}{}", render_header("eval", &cfg), write_report(&report));
        write_atomic(out, &artifact)?;
    }
    print!("{}", render_report_table(&report));
    Ok(0)
}

pub fn priors(args: &PriorsArgs, mut cfg: RunConfig) -> Result<i32, CliError> {
    if let Some(x0) = args.x0 {
        cfg.x0 = x0;
    }
    if let Some(none_prior) = args.none_prior {
        cfg.none_prior = none_prior;
    }
    cfg.validate()?;

    let parsed = read_frames(&args.frames)?;
    let rules = read_rules(&args.rules)?;
    let frame_count = parsed.frames.len();
    let build = build_priors(parsed.frames, &rules, cfg.x0, cfg.none_prior);
    let artifact = format!("{}{}", render_header("priors", &cfg), write_priors(&build.table));
    write_atomic(&args.out, &artifact)?;
    println!("frames\t{frame_count}");
    println!("skipped\t{}", parsed.skipped + build.skipped);
    println!("entries\t{}", build.table.iter().count());
    Ok(0)
}

pub fn lint(args: &LintArgs, cfg: RunConfig) -> Result<i32, CliError> {
    cfg.validate()?;
    let dataset = read_dataset(&args.dataset)?;
    let per_paragraph: Vec<Vec<(String, Violation)>> = match &args.pred {
        Some(pred) => {
            let set = read_predictions(pred)?;
            // Replay validates id/entity/shape alignment; the grids are not
            // needed because predictions carry the sequences directly.
            prediction_grids(&set, &dataset)?;
            set.paragraphs
                .par_iter()
                .map(|p| {
                    let record = dataset.record(&p.id).expect("alignment checked above");
                    violations(&p.sequence, &record.paragraph, &record.initial, &cfg.hard)
                        .into_iter()
                        .map(|v| (p.id.clone(), v))
                        .collect()
                })
                .collect()
        }
        None => {
            require_gold(&dataset, "lint without --pred")?;
            dataset
                .records
                .par_iter()
                .map(|r| {
                    let seq = sequence_from_grid(r.gold.as_ref().expect("gold checked above"));
                    violations(&seq, &r.paragraph, &r.initial, &cfg.hard)
                        .into_iter()
                        .map(|v| (r.paragraph.id.clone(), v))
                        .collect()
                })
                .collect()
        }
    };
    let findings: Vec<(String, Violation)> = per_paragraph.into_iter().flatten().collect();
    let artifact = format!("{}{}", render_header("lint", &cfg), write_lint(&findings));
    match &args.out {
        Some(path) => write_atomic(path, &artifact)?,
        None => print!("{artifact}"),
    }
    eprintln!("lint: {} violation(s)", findings.len());
    Ok(if findings.is_empty() { 0 } else { 3 })
}

pub fn tune(args: &TuneArgs, mut cfg: RunConfig) -> Result<i32, CliError> {
    if let Some(beam) = args.beam {
        cfg.decoder.beam_width = beam;
    }
    cfg.validate()?;

    let dataset = read_dataset(&args.dataset)?;
    require_gold(&dataset, "tune")?;
    let scores = load_scores(args.logits.as_deref(), args.model.as_deref(), &dataset)?;
    let base_priors = args.priors.as_deref().map(read_priors).transpose()?;
    let gold = gold_grids(&dataset);
    let paragraphs = dataset.paragraphs();

    let lambdas = grid_or(&args.lambdas, || (0..=10).map(|i| i as f64 / 10.0).collect());
    let x0s = grid_or(&args.x0s, || vec![cfg.x0]);
    let entity_fracs = grid_or(&args.entity_fracs, || vec![cfg.hard.max_entities_frac]);
    let sentence_fracs = grid_or(&args.sentence_fracs, || vec![cfg.hard.max_sentences_frac]);

    // Ascending iteration with a strictly-greater update keeps the earliest
    // maximum, so ties resolve to the smallest lambda, then the smallest x0,
    // and so on inward.
    println!("# lambda\tx0\tentities_frac\tsentences_frac\tmacro_f1");
    let mut best: Option<(RunConfig, f64)> = None;
    for &lambda in &lambdas {
        for &x0 in &x0s {
            for &entities_frac in &entity_fracs {
                for &sentences_frac in &sentence_fracs {
                    let mut trial = cfg.clone();
                    trial.decoder.lambda = lambda;
                    trial.x0 = x0;
                    trial.hard.max_entities_frac = entities_frac;
                    trial.hard.max_sentences_frac = sentences_frac;
                    trial.validate()?;
                    let table = base_priors.as_ref().map(|t| {
                        let mut t = t.clone();
                        t.x0 = x0;
                        t
                    });
                    let outcomes = decode_all(&dataset, &scores, table.as_ref(), &trial)?;
                    let pred: BTreeMap<String, Grid> = dataset
                        .records
                        .iter()
                        .zip(&outcomes)
                        .map(|(r, o)| (r.paragraph.id.clone(), o.grid.clone()))
                        .collect();
                    let report = evaluate(&paragraphs, &gold, &pred)?;
                    println!(
                        "trial\t{lambda:?}\t{x0:?}\t{entities_frac:?}\t{sentences_frac:?}\t{:?}",
                        report.macro_f1
                    );
                    if best.as_ref().is_none_or(|(_, b)| report.macro_f1 > *b) {
                        best = Some((trial, report.macro_f1));
                    }
                }
            }
        }
    }
    let (best_cfg, best_f1) = best.expect("every grid has at least one point");
    println!(
        "best\t{:?}\t{:?}\t{:?}\t{:?}\t{best_f1:?}",
        best_cfg.decoder.lambda,
        best_cfg.x0,
        best_cfg.hard.max_entities_frac,
        best_cfg.hard.max_sentences_frac
    );
    let artifact = format!(
        "# stategrid tune\n# best dev macro-F1 = {best_f1:?}\n{}",
        render_toml(&best_cfg)
    );
    write_atomic(&args.out, &artifact)?;
    Ok(0)
}

fn grid_or(given: &[f64], default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
    if given.is_empty() {
        default()
    } else {
        given.to_vec()
    }
}
