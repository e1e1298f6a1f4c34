//! Report rendering: aligned plain-text comparison tables, machine-readable
//! CSVs, the scale-sweep table, and paired-significance lines.
//!
//! Everything here is a pure function of already-aggregated reports, so for
//! a fixed record set the rendered bytes are identical across runs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::corpus::Dimension;
use crate::error::Error;
use crate::eval::stats::paired_t_test;
use crate::eval::{EvalReport, MethodTag, MetricCell};

/// Placeholder for cells with nothing to report (dimension not covered, or
/// no ordinal records for an error cell).
const EMPTY_CELL: &str = "n/a";

fn fmt_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => EMPTY_CELL.to_string(),
    }
}

/// The union of dimensions covered by any of the reports, in taxonomy order.
fn covered_dimensions(reports: &[EvalReport]) -> Vec<Dimension> {
    let covered: BTreeSet<Dimension> = reports
        .iter()
        .flat_map(|r| r.per_dimension.keys().copied())
        .collect();
    Dimension::ALL
        .into_iter()
        .filter(|d| covered.contains(d))
        .collect()
}

fn render_one_table(
    title: &str,
    reports: &[EvalReport],
    dimensions: &[Dimension],
    cell_value: impl Fn(&MetricCell) -> Option<f64>,
) -> String {
    let mut header: Vec<String> = vec!["method".to_string()];
    header.extend(dimensions.iter().map(|d| d.abbrev().to_string()));
    header.push("Overall".to_string());

    let mut rows: Vec<Vec<String>> = vec![header];
    for report in reports {
        let mut row = vec![report.method.label().to_string()];
        for dim in dimensions {
            row.push(fmt_metric(
                report.per_dimension.get(dim).and_then(&cell_value),
            ));
        }
        row.push(fmt_metric(cell_value(&report.overall)));
        rows.push(row);
    }

    let n_cols = rows[0].len();
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    for row in &rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                line.push_str(&format!("{cell:<width$}", width = widths[0]));
            } else {
                line.push_str(&format!("  {cell:>width$}", width = widths[c]));
            }
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out
}

/// Render the accuracy and normalized-MAE comparison tables for one model.
pub fn render_comparison_tables(model_id: &str, reports: &[EvalReport]) -> String {
    let dimensions = covered_dimensions(reports);
    let mut out = String::new();
    out.push_str(&render_one_table(
        &format!("Accuracy by dimension (model: {model_id})"),
        reports,
        &dimensions,
        |cell| Some(cell.accuracy),
    ));
    out.push('\n');
    out.push_str(&render_one_table(
        &format!("Normalized MAE by dimension (model: {model_id})"),
        reports,
        &dimensions,
        |cell| cell.norm_mae,
    ));
    out
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// One row per (model, method, dimension, metric). `overall` appears as its
/// own dimension; counts are emitted as additional metrics so the CSV alone
/// can reconstruct coverage.
pub fn comparison_csv(model_id: &str, reports: &[EvalReport]) -> String {
    let mut out = String::from("model,method,dimension,metric,value\n");
    let mut push_cell = |method: MethodTag, dimension: &str, cell: &MetricCell| {
        let base = format!(
            "{},{},{}",
            csv_field(model_id),
            method.label(),
            csv_field(dimension)
        );
        let _ = writeln!(out, "{base},accuracy,{:.6}", cell.accuracy);
        let _ = writeln!(out, "{base},norm_mae,{}", match cell.norm_mae {
            Some(v) => format!("{v:.6}"),
            None => String::new(),
        });
        let _ = writeln!(out, "{base},n_respondents,{}", cell.n_respondents);
        let _ = writeln!(out, "{base},n_records,{}", cell.n_records);
    };
    for report in reports {
        push_cell(report.method, "overall", &report.overall);
        for (dim, cell) in &report.per_dimension {
            push_cell(report.method, dim.name(), cell);
        }
    }
    out
}

/// The profile-scale sweep table: one row per step.
pub fn scale_csv(steps: &[(usize, &EvalReport)]) -> String {
    let mut out = String::from("step,accuracy,norm_mae,n_respondents,n_records\n");
    for (step, report) in steps {
        let _ = writeln!(
            out,
            "{step},{:.6},{},{},{}",
            report.overall.accuracy,
            match report.overall.norm_mae {
                Some(v) => format!("{v:.6}"),
                None => String::new(),
            },
            report.overall.n_respondents,
            report.overall.n_records
        );
    }
    out
}

/// Paired per-respondent vectors for two reports, aligned by respondent id;
/// respondents present in only one report are dropped.
fn paired_vectors(
    a: &EvalReport,
    b: &EvalReport,
    value: impl Fn(&crate::eval::IndividualScore) -> Option<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for score_a in &a.per_respondent {
        let Some(score_b) = b
            .per_respondent
            .iter()
            .find(|s| s.respondent_id == score_a.respondent_id)
        else {
            continue;
        };
        let (Some(va), Some(vb)) = (value(score_a), value(score_b)) else {
            continue;
        };
        left.push(va);
        right.push(vb);
    }
    (left, right)
}

fn significance_line(
    reference: &EvalReport,
    other: &EvalReport,
    metric: &str,
    value: impl Fn(&crate::eval::IndividualScore) -> Option<f64>,
) -> String {
    let (a, b) = paired_vectors(reference, other, value);
    let label = format!(
        "{} vs {}",
        reference.method.label(),
        other.method.label()
    );
    match paired_t_test(&a, &b) {
        Ok(result) => format!(
            "{label:<42}  {metric:<9}  t={:+.4}  p={:.4}  n={}",
            result.t_statistic, result.p_value, result.n_pairs
        ),
        Err(Error::DegenerateTest(note)) => {
            format!("{label:<42}  {metric:<9}  degenerate: {note}")
        }
        Err(e) => format!("{label:<42}  {metric:<9}  unavailable: {e}"),
    }
}

/// Paired t-test lines comparing the full pipeline against every other
/// method in the bundle, on per-respondent accuracy and normalized MAE.
pub fn render_significance(reports: &[EvalReport]) -> String {
    let Some(reference) = reports.iter().find(|r| r.method == MethodTag::ValueSim) else {
        return String::from(
            "no valuesim report present; paired significance tests skipped\n",
        );
    };
    let mut out =
        String::from("Paired t-tests against valuesim (per-respondent pairing, two-sided)\n");
    for other in reports.iter().filter(|r| r.method != MethodTag::ValueSim) {
        let _ = writeln!(
            out,
            "{}",
            significance_line(reference, other, "accuracy", |s| Some(s.accuracy))
        );
        let _ = writeln!(
            out,
            "{}",
            significance_line(reference, other, "norm_mae", |s| s.norm_mae)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{aggregate, Prediction, SimulationRecord};
    use crate::corpus::{AnswerOption, QuestionBank, QuestionKind, RawQuestion, Taxonomy};

    fn bank() -> QuestionBank {
        let raw = vec![
            RawQuestion {
                id: "Q46".to_string(),
                text: "Happiness?".to_string(),
                options: (1..=4)
                    .map(|c| AnswerOption { code: c, label: format!("H{c}") })
                    .collect(),
                kind: QuestionKind::MultipleChoiceOrdinal,
            },
            RawQuestion {
                id: "Q57".to_string(),
                text: "Trust?".to_string(),
                options: (1..=10)
                    .map(|c| AnswerOption { code: c, label: format!("{c}") })
                    .collect(),
                kind: QuestionKind::MultipleChoiceOrdinal,
            },
        ];
        QuestionBank::build(raw, &Taxonomy::builtin()).unwrap()
    }

    fn record(
        respondent: &str,
        qid: &str,
        method: MethodTag,
        predicted: i64,
        true_code: i64,
    ) -> SimulationRecord {
        SimulationRecord {
            respondent_id: respondent.to_string(),
            question_id: qid.to_string(),
            method,
            predicted: Prediction::Code(predicted),
            true_code,
            fold_index: 0,
        }
    }

    fn reports() -> Vec<EvalReport> {
        let bank = bank();
        let valuesim = aggregate(
            &[
                record("r1", "Q46", MethodTag::ValueSim, 2, 2),
                record("r1", "Q57", MethodTag::ValueSim, 4, 6),
                record("r2", "Q46", MethodTag::ValueSim, 1, 2),
                record("r2", "Q57", MethodTag::ValueSim, 6, 6),
            ],
            &bank,
        )
        .unwrap();
        let full_info = aggregate(
            &[
                record("r1", "Q46", MethodTag::FullInfo, 4, 2),
                record("r1", "Q57", MethodTag::FullInfo, 1, 6),
                record("r2", "Q46", MethodTag::FullInfo, 2, 2),
                record("r2", "Q57", MethodTag::FullInfo, 2, 6),
            ],
            &bank,
        )
        .unwrap();
        vec![valuesim, full_info]
    }

    #[test]
    fn tables_have_aligned_columns_and_expected_cells() {
        let text = render_comparison_tables("mock-model", &reports());
        assert!(text.contains("Accuracy by dimension (model: mock-model)"));
        assert!(text.contains("Normalized MAE by dimension (model: mock-model)"));
        assert!(text.contains("Hap."));
        assert!(text.contains("Trust"));
        assert!(text.contains("Overall"));
        // r1 accuracy 0.5, r2 accuracy 0.5 → overall 0.500 for valuesim.
        let acc_table = text.split("Normalized MAE").next().unwrap();
        let valuesim_line = acc_table
            .lines()
            .find(|l| l.starts_with("valuesim"))
            .unwrap();
        assert!(valuesim_line.ends_with("0.500"));
        // Every non-title line in a table block has the same width pattern:
        // columns are two-space separated and right-aligned.
        let lines: Vec<&str> = acc_table
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .collect();
        let header_cols: Vec<usize> = lines[0]
            .char_indices()
            .filter(|(_, c)| *c == ' ')
            .map(|(i, _)| i)
            .collect();
        assert!(!header_cols.is_empty());
        for line in &lines[1..] {
            assert_eq!(line.len(), lines[0].len(), "ragged line: {line:?}");
        }
    }

    #[test]
    fn csv_is_deterministic_and_covers_overall_plus_dimensions() {
        let reports = reports();
        let a = comparison_csv("mock-model", &reports);
        let b = comparison_csv("mock-model", &reports);
        assert_eq!(a, b);
        assert!(a.starts_with("model,method,dimension,metric,value\n"));
        assert!(a.contains("mock-model,valuesim,overall,accuracy,0.500000"));
        assert!(a.contains("mock-model,valuesim,Happiness and Well-being,accuracy,0.500000"));
        // Dimension names containing commas are quoted.
        assert!(a.contains(
            "mock-model,full_info,\"Social Capital, Trust and Organizational Membership\",norm_mae,"
        ));
        // Q57 errors: valuesim r1 |4-6|/9, r2 0 → mean of (2/9, 0) = 1/9.
        assert!(a.contains(
            "mock-model,valuesim,\"Social Capital, Trust and Organizational Membership\",norm_mae,0.111111"
        ));
    }

    #[test]
    fn scale_csv_renders_one_row_per_step() {
        let reports = reports();
        let text = scale_csv(&[(0, &reports[0]), (58, &reports[1])]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "step,accuracy,norm_mae,n_respondents,n_records");
        assert!(lines[1].starts_with("0,0.500000,"));
        assert!(lines[2].starts_with("58,0.250000,"));
    }

    #[test]
    fn significance_compares_valuesim_to_each_baseline() {
        let text = render_significance(&reports());
        assert!(text.contains("valuesim vs full_info"));
        assert!(text.contains("accuracy"));
        assert!(text.contains("norm_mae"));
        // Accuracy differences r1: 0.5-0.5=0, r2: 1.0-0.5=0.5 → non-degenerate.
        assert!(text.contains("t="));
    }

    #[test]
    fn significance_flags_degenerate_comparisons() {
        let reports = reports();
        let identical = vec![reports[0].clone(), {
            let mut clone = reports[0].clone();
            clone.method = MethodTag::Rag;
            clone
        }];
        let text = render_significance(&identical);
        assert!(text.contains("degenerate"));
    }

    #[test]
    fn significance_without_valuesim_is_a_note() {
        let reports = vec![reports().remove(1)];
        let text = render_significance(&reports);
        assert!(text.contains("skipped"));
    }
}
