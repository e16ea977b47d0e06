//! Write-only outputs: `report-v1` score summaries, a human-readable table
//! rendering, and `lint-v1` constraint-violation listings.
//!
//! ```text
//! report-v1
//! question <TAB> name <TAB> precision <TAB> recall <TAB> f1
//! macro <TAB> precision <TAB> recall <TAB> f1
//! ```
//!
//! ```text
//! lint-v1
//! violation <TAB> paragraph <TAB> rule <TAB> step <TAB> entity <TAB> message
//! ```
//!
//! Nothing reads these formats back; they exist for pipelines (tabs) and for
//! people (the table).

use super::common::fmt_f64;
use crate::constraints::Violation;
use crate::eval::ScoreReport;

pub fn write_report(report: &ScoreReport) -> String {
    let mut out = String::from("report-v1\n");
    for (name, q) in report.questions() {
        out.push_str(&format!(
            "question\t{name}\t{}\t{}\t{}\n",
            fmt_f64(q.precision),
            fmt_f64(q.recall),
            fmt_f64(q.f1)
        ));
    }
    out.push_str(&format!(
        "macro\t{}\t{}\t{}\n",
        fmt_f64(report.macro_precision),
        fmt_f64(report.macro_recall),
        fmt_f64(report.macro_f1)
    ));
    out
}

/// An aligned, human-oriented rendering of the same numbers, three decimal
/// places, suitable for a terminal.
pub fn render_report_table(report: &ScoreReport) -> String {
    let mut rows: Vec<(String, f64, f64, f64)> = report
        .questions()
        .iter()
        .map(|(name, q)| (name.to_string(), q.precision, q.recall, q.f1))
        .collect();
    rows.push(("macro".to_string(), report.macro_precision, report.macro_recall, report.macro_f1));
    let name_width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("question".len());
    let mut out = format!(
        "{:<name_width$}  {:>9}  {:>9}  {:>9}\n",
        "question", "precision", "recall", "f1"
    );
    for (name, p, r, f1) in rows {
        out.push_str(&format!("{name:<name_width$}  {p:>9.3}  {r:>9.3}  {f1:>9.3}\n"));
    }
    out
}

/// One row per violation: paragraph, rule id, 1-based step, entity id, and
/// the human-readable explanation.
pub fn write_lint(violations: &[(String, Violation)]) -> String {
    let mut out = String::from("lint-v1\n");
    for (paragraph, v) in violations {
        debug_assert!(!v.message.contains('\t'), "violation messages must be tab-free");
        out.push_str(&format!(
            "violation\t{paragraph}\t{}\t{}\t{}\t{}\n",
            v.rule, v.step, v.entity, v.message
        ));
    }
    out
}
