//! Scoring and aggregation: per-record metrics, respondent-level means, and
//! dimension-level report cells.
//!
//! Aggregation is exactly invariant to record order and to respondent
//! renaming: every mean is computed over a value-sorted copy of its inputs,
//! so equal multisets produce bit-identical f64 results.

pub mod experiment;
pub mod report;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{chance_accuracy, chance_expected_norm_abs_err, Dimension, QuestionBank, QuestionKind};
use crate::error::{Error, Result};

/// Identifies which pipeline variant produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "valuesim")]
    ValueSim,
    #[serde(rename = "full_info")]
    FullInfo,
    #[serde(rename = "rag")]
    Rag,
    #[serde(rename = "chance")]
    Chance,
    #[serde(rename = "valuesim_no_story")]
    NoStory,
    #[serde(rename = "valuesim_no_cab")]
    NoCab,
    #[serde(rename = "valuesim_avg_integrate")]
    AvgIntegrate,
    #[serde(rename = "valuesim_drop_cognitive")]
    DropCognitive,
    #[serde(rename = "valuesim_drop_affective")]
    DropAffective,
    #[serde(rename = "valuesim_drop_behavioral")]
    DropBehavioral,
}

impl MethodTag {
    pub const ALL: [MethodTag; 10] = [
        MethodTag::ValueSim,
        MethodTag::FullInfo,
        MethodTag::Rag,
        MethodTag::Chance,
        MethodTag::NoStory,
        MethodTag::NoCab,
        MethodTag::AvgIntegrate,
        MethodTag::DropCognitive,
        MethodTag::DropAffective,
        MethodTag::DropBehavioral,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MethodTag::ValueSim => "valuesim",
            MethodTag::FullInfo => "full_info",
            MethodTag::Rag => "rag",
            MethodTag::Chance => "chance",
            MethodTag::NoStory => "valuesim_no_story",
            MethodTag::NoCab => "valuesim_no_cab",
            MethodTag::AvgIntegrate => "valuesim_avg_integrate",
            MethodTag::DropCognitive => "valuesim_drop_cognitive",
            MethodTag::DropAffective => "valuesim_drop_affective",
            MethodTag::DropBehavioral => "valuesim_drop_behavioral",
        }
    }

    /// Whether the method consumes a generated backstory (as perspective
    /// context or as the profile text of a direct prompt).
    pub fn needs_backstory(&self) -> bool {
        matches!(
            self,
            MethodTag::ValueSim
                | MethodTag::NoCab
                | MethodTag::AvgIntegrate
                | MethodTag::DropCognitive
                | MethodTag::DropAffective
                | MethodTag::DropBehavioral
        )
    }

    /// Accepts the canonical label, hyphens for underscores, and the
    /// ablation shorthand without the `valuesim_` prefix.
    pub fn parse(s: &str) -> Option<MethodTag> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        MethodTag::ALL
            .iter()
            .copied()
            .find(|m| m.label() == norm || m.label() == format!("valuesim_{norm}"))
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What a method predicted for one (respondent, question) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// A concrete option code.
    Code(i64),
    /// The pipeline abstained after exhausting its fallbacks. Scored as
    /// incorrect with maximal normalized error.
    Unanswerable,
    /// The analytic uniform-guess baseline; scored in expectation.
    UniformGuess,
}

/// One scored simulation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub respondent_id: String,
    pub question_id: String,
    pub method: MethodTag,
    pub predicted: Prediction,
    pub true_code: i64,
    pub fold_index: usize,
}

/// Per-record metric contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordScore {
    /// 1.0 / 0.0 for concrete predictions; the expected value for chance.
    pub correct: f64,
    /// Normalized absolute error in [0, 1]; `None` on nominal questions.
    pub norm_abs_err: Option<f64>,
}

/// Score one record against the bank.
pub fn score_record(record: &SimulationRecord, bank: &QuestionBank) -> Result<RecordScore> {
    let q = bank.get(&record.question_id).ok_or_else(|| {
        Error::Validation(format!("record references unknown question '{}'", record.question_id))
    })?;
    if !q.kind.is_multiple_choice() {
        return Err(Error::UnsupportedQuestion(format!(
            "question '{}' is fill-in and cannot be scored",
            q.id
        )));
    }
    if !q.has_option(record.true_code) {
        return Err(Error::Validation(format!(
            "true code {} is not an option of question '{}'",
            record.true_code, q.id
        )));
    }
    let ordinal = q.kind == QuestionKind::MultipleChoiceOrdinal;
    let range = q.max_code().unwrap() - q.min_code().unwrap();
    if ordinal && range == 0 {
        return Err(Error::Scoring(format!(
            "question '{}' has a single option; the error normalizer is zero",
            q.id
        )));
    }
    match record.predicted {
        Prediction::Code(code) => {
            if !q.has_option(code) {
                return Err(Error::Validation(format!(
                    "predicted code {code} is not an option of question '{}'",
                    q.id
                )));
            }
            let err = ordinal.then(|| (code - record.true_code).abs() as f64 / range as f64);
            Ok(RecordScore {
                correct: if code == record.true_code { 1.0 } else { 0.0 },
                norm_abs_err: err,
            })
        }
        Prediction::Unanswerable => Ok(RecordScore {
            correct: 0.0,
            norm_abs_err: ordinal.then_some(1.0),
        }),
        Prediction::UniformGuess => Ok(RecordScore {
            correct: chance_accuracy(q)?,
            norm_abs_err: chance_expected_norm_abs_err(q, record.true_code)?,
        }),
    }
}

/// Mean over a value-sorted copy of `values`, so the result depends only on
/// the multiset of inputs. `None` when empty.
pub fn stable_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted.iter().sum::<f64>() / sorted.len() as f64)
}

/// One respondent's mean metrics over their scored records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualScore {
    pub respondent_id: String,
    pub accuracy: f64,
    /// `None` when the respondent had no ordinal records.
    pub norm_mae: Option<f64>,
    pub n_records: usize,
    pub n_ordinal_records: usize,
    pub counts_per_dimension: BTreeMap<Dimension, usize>,
}

/// An (accuracy, error) pair aggregated over some slice of the records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub accuracy: f64,
    /// `None` when no contributing record was ordinal.
    pub norm_mae: Option<f64>,
    pub n_respondents: usize,
    pub n_records: usize,
}

/// Aggregated results for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: MethodTag,
    pub overall: MetricCell,
    pub per_dimension: BTreeMap<Dimension, MetricCell>,
    /// Sorted by respondent id.
    pub per_respondent: Vec<IndividualScore>,
    /// Fold indices the records came from.
    pub fold_coverage: BTreeSet<usize>,
}

struct ScoredRecord {
    dimension: Dimension,
    score: RecordScore,
}

fn cell_over(by_respondent: &BTreeMap<&str, Vec<&ScoredRecord>>) -> MetricCell {
    let mut accuracies = Vec::new();
    let mut maes = Vec::new();
    let mut n_records = 0;
    for records in by_respondent.values() {
        n_records += records.len();
        let corrects: Vec<f64> = records.iter().map(|r| r.score.correct).collect();
        accuracies.push(stable_mean(&corrects).expect("group is non-empty"));
        let errs: Vec<f64> = records.iter().filter_map(|r| r.score.norm_abs_err).collect();
        if let Some(mae) = stable_mean(&errs) {
            maes.push(mae);
        }
    }
    MetricCell {
        accuracy: stable_mean(&accuracies).expect("at least one respondent"),
        norm_mae: stable_mean(&maes),
        n_respondents: by_respondent.len(),
        n_records,
    }
}

/// Aggregate records of a single method: respondent-level means first, then
/// an unweighted mean across respondents, overall and per dimension.
pub fn aggregate(records: &[SimulationRecord], bank: &QuestionBank) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Scoring("no records to aggregate".to_string()));
    }
    let method = records[0].method;
    if records.iter().any(|r| r.method != method) {
        return Err(Error::Scoring(
            "records mix methods; aggregate one method at a time".to_string(),
        ));
    }

    let mut scored: BTreeMap<&str, Vec<ScoredRecord>> = BTreeMap::new();
    for record in records {
        let q = bank.get(&record.question_id).ok_or_else(|| {
            Error::Validation(format!("record references unknown question '{}'", record.question_id))
        })?;
        scored.entry(&record.respondent_id).or_default().push(ScoredRecord {
            dimension: q.dimension,
            score: score_record(record, bank)?,
        });
    }

    let all_refs: BTreeMap<&str, Vec<&ScoredRecord>> = scored
        .iter()
        .map(|(rid, rs)| (*rid, rs.iter().collect()))
        .collect();
    let overall = cell_over(&all_refs);

    let mut per_dimension = BTreeMap::new();
    for dim in Dimension::ALL {
        let dim_refs: BTreeMap<&str, Vec<&ScoredRecord>> = scored
            .iter()
            .filter_map(|(rid, rs)| {
                let subset: Vec<&ScoredRecord> =
                    rs.iter().filter(|r| r.dimension == dim).collect();
                (!subset.is_empty()).then_some((*rid, subset))
            })
            .collect();
        if !dim_refs.is_empty() {
            per_dimension.insert(dim, cell_over(&dim_refs));
        }
    }

    let per_respondent = all_refs
        .iter()
        .map(|(rid, rs)| {
            let corrects: Vec<f64> = rs.iter().map(|r| r.score.correct).collect();
            let errs: Vec<f64> = rs.iter().filter_map(|r| r.score.norm_abs_err).collect();
            let mut counts_per_dimension = BTreeMap::new();
            for r in rs {
                *counts_per_dimension.entry(r.dimension).or_insert(0) += 1;
            }
            IndividualScore {
                respondent_id: rid.to_string(),
                accuracy: stable_mean(&corrects).expect("non-empty"),
                norm_mae: stable_mean(&errs),
                n_records: rs.len(),
                n_ordinal_records: errs.len(),
                counts_per_dimension,
            }
        })
        .collect();

    Ok(EvalReport {
        method,
        overall,
        per_dimension,
        per_respondent,
        fold_coverage: records.iter().map(|r| r.fold_index).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerOption, QuestionBank, RawQuestion, Taxonomy};

    fn bank() -> QuestionBank {
        let ordinal = |id: &str, n: i64| RawQuestion {
            id: id.to_string(),
            text: format!("Item {id}"),
            options: (1..=n)
                .map(|c| AnswerOption { code: c, label: format!("Level {c}") })
                .collect(),
            kind: QuestionKind::MultipleChoiceOrdinal,
        };
        let nominal = RawQuestion {
            id: "Q260".to_string(),
            text: "Region?".to_string(),
            options: (1..=4)
                .map(|c| AnswerOption { code: c, label: format!("Region {c}") })
                .collect(),
            kind: QuestionKind::MultipleChoiceNominal,
        };
        QuestionBank::build(
            vec![ordinal("Q1", 5), ordinal("Q46", 10), nominal],
            &Taxonomy::builtin(),
        )
        .unwrap()
    }

    fn record(rid: &str, qid: &str, predicted: Prediction, true_code: i64) -> SimulationRecord {
        SimulationRecord {
            respondent_id: rid.to_string(),
            question_id: qid.to_string(),
            method: MethodTag::ValueSim,
            predicted,
            true_code,
            fold_index: 0,
        }
    }

    #[test]
    fn exact_prediction_scores_one_and_zero() {
        let bank = bank();
        let s = score_record(&record("r1", "Q1", Prediction::Code(3), 3), &bank).unwrap();
        assert_eq!(s.correct, 1.0);
        assert_eq!(s.norm_abs_err, Some(0.0));
    }

    #[test]
    fn ordinal_error_is_distance_over_range() {
        let bank = bank();
        let s = score_record(&record("r1", "Q1", Prediction::Code(1), 5), &bank).unwrap();
        assert_eq!(s.correct, 0.0);
        assert_eq!(s.norm_abs_err, Some(1.0));
        let s = score_record(&record("r1", "Q46", Prediction::Code(4), 1), &bank).unwrap();
        assert_eq!(s.norm_abs_err, Some(3.0 / 9.0));
    }

    #[test]
    fn nominal_records_have_no_error_metric() {
        let bank = bank();
        let s = score_record(&record("r1", "Q260", Prediction::Code(2), 2), &bank).unwrap();
        assert_eq!(s.correct, 1.0);
        assert_eq!(s.norm_abs_err, None);
    }

    #[test]
    fn unanswerable_scores_incorrect_with_maximal_error() {
        let bank = bank();
        let s = score_record(&record("r1", "Q1", Prediction::Unanswerable, 2), &bank).unwrap();
        assert_eq!(s.correct, 0.0);
        assert_eq!(s.norm_abs_err, Some(1.0));
        let s = score_record(&record("r1", "Q260", Prediction::Unanswerable, 2), &bank).unwrap();
        assert_eq!(s.norm_abs_err, None);
    }

    #[test]
    fn uniform_guess_scores_in_expectation() {
        let bank = bank();
        let s = score_record(&record("r1", "Q46", Prediction::UniformGuess, 1), &bank).unwrap();
        assert_eq!(s.correct, 0.1);
        assert_eq!(s.norm_abs_err, Some(0.5));
    }

    #[test]
    fn invalid_codes_are_rejected() {
        let bank = bank();
        assert!(score_record(&record("r1", "Q1", Prediction::Code(9), 2), &bank).is_err());
        assert!(score_record(&record("r1", "Q1", Prediction::Code(2), 9), &bank).is_err());
    }

    #[test]
    fn aggregate_uses_respondent_level_means() {
        let bank = bank();
        // r1: one right, one wrong (accuracy 0.5); r2: one right (accuracy 1.0).
        // Respondent-mean convention gives (0.5 + 1.0) / 2 = 0.75, not the
        // record-weighted 2/3.
        let records = vec![
            record("r1", "Q1", Prediction::Code(2), 2),
            record("r1", "Q46", Prediction::Code(1), 10),
            record("r2", "Q1", Prediction::Code(4), 4),
        ];
        let report = aggregate(&records, &bank).unwrap();
        assert_eq!(report.overall.accuracy, 0.75);
        assert_eq!(report.overall.n_respondents, 2);
        assert_eq!(report.overall.n_records, 3);
        // r1 error mean = (0 + 1) / 2 = 0.5, r2 = 0.0; overall 0.25.
        assert_eq!(report.overall.norm_mae, Some(0.25));
    }

    #[test]
    fn aggregate_is_exactly_order_invariant() {
        let bank = bank();
        let mut records = vec![
            record("r1", "Q1", Prediction::Code(2), 3),
            record("r1", "Q46", Prediction::Code(7), 2),
            record("r2", "Q1", Prediction::Code(5), 1),
            record("r2", "Q260", Prediction::Code(2), 2),
            record("r3", "Q46", Prediction::UniformGuess, 4),
        ];
        let a = aggregate(&records, &bank).unwrap();
        records.reverse();
        let b = aggregate(&records, &bank).unwrap();
        records.swap(0, 2);
        let c = aggregate(&records, &bank).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn aggregate_is_exactly_relabel_invariant() {
        let bank = bank();
        let records = vec![
            record("r1", "Q1", Prediction::Code(2), 3),
            record("r1", "Q46", Prediction::Code(7), 2),
            record("r2", "Q1", Prediction::Code(5), 1),
        ];
        let relabeled: Vec<SimulationRecord> = records
            .iter()
            .map(|r| SimulationRecord {
                respondent_id: format!("zz-{}", r.respondent_id),
                ..r.clone()
            })
            .collect();
        let a = aggregate(&records, &bank).unwrap();
        let b = aggregate(&relabeled, &bank).unwrap();
        assert_eq!(a.overall, b.overall);
        assert_eq!(a.per_dimension, b.per_dimension);
    }

    #[test]
    fn aggregate_fills_per_dimension_cells() {
        let bank = bank();
        let records = vec![
            record("r1", "Q1", Prediction::Code(2), 2),
            record("r1", "Q46", Prediction::Code(1), 1),
            record("r1", "Q260", Prediction::Code(3), 1),
        ];
        let report = aggregate(&records, &bank).unwrap();
        assert_eq!(report.per_dimension.len(), 3);
        let core = &report.per_dimension[&Dimension::Core];
        assert_eq!(core.accuracy, 1.0);
        let demo = &report.per_dimension[&Dimension::Demographics];
        assert_eq!(demo.accuracy, 0.0);
        assert_eq!(demo.norm_mae, None);
    }

    #[test]
    fn aggregate_rejects_empty_and_mixed_method_input() {
        let bank = bank();
        assert!(aggregate(&[], &bank).is_err());
        let mut records = vec![
            record("r1", "Q1", Prediction::Code(2), 2),
            record("r1", "Q46", Prediction::Code(1), 1),
        ];
        records[1].method = MethodTag::Rag;
        assert!(aggregate(&records, &bank).is_err());
    }

    #[test]
    fn stable_mean_is_permutation_exact() {
        let values = [0.1, 0.2, 0.3, 1.0 / 3.0, 0.7];
        let a = stable_mean(&values).unwrap();
        let mut shuffled = values;
        shuffled.reverse();
        shuffled.swap(1, 3);
        let b = stable_mean(&shuffled).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(stable_mean(&[]), None);
    }

    #[test]
    fn method_tag_labels_round_trip() {
        for tag in MethodTag::ALL {
            assert_eq!(MethodTag::parse(tag.label()), Some(tag));
        }
        assert_eq!(MethodTag::parse("drop-cognitive"), Some(MethodTag::DropCognitive));
        assert_eq!(MethodTag::parse("nope"), None);
    }
}
