//! Canonical data model: question banks, respondent profiles, the value
//! dimension taxonomy, cross-validation folds, profile subsetting, and the
//! analytic chance baseline.
//!
//! Everything in this module is immutable after load and safe to share across
//! worker threads. Fold construction and subset sampling are pure functions of
//! their inputs and a seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{aggregate, EvalReport, Prediction, SimulationRecord};

// ---------------------------------------------------------------------------
// Dimensions
// ---------------------------------------------------------------------------

/// The nine consolidated value dimensions used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Core,
    Happiness,
    Trust,
    EconomicIntegrity,
    Security,
    Technology,
    MoralReligious,
    PoliticalEngagement,
    Demographics,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::Core,
        Dimension::Happiness,
        Dimension::Trust,
        Dimension::EconomicIntegrity,
        Dimension::Security,
        Dimension::Technology,
        Dimension::MoralReligious,
        Dimension::PoliticalEngagement,
        Dimension::Demographics,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dimension::Core => "Core Value Orientations",
            Dimension::Happiness => "Happiness and Well-being",
            Dimension::Trust => "Social Capital, Trust and Organizational Membership",
            Dimension::EconomicIntegrity => "Economic Integrity",
            Dimension::Security => "Security-Migration Nexus",
            Dimension::Technology => "Science and Technology",
            Dimension::MoralReligious => "Moral-Religious Framework",
            Dimension::PoliticalEngagement => "Political Engagement",
            Dimension::Demographics => "Demographics",
        }
    }

    /// Short column header used in report tables.
    pub fn abbrev(&self) -> &'static str {
        match self {
            Dimension::Core => "Core",
            Dimension::Happiness => "Hap.",
            Dimension::Trust => "Trust",
            Dimension::EconomicIntegrity => "Econ.Int",
            Dimension::Security => "Security",
            Dimension::Technology => "Tech",
            Dimension::MoralReligious => "Mo.&Rel.",
            Dimension::PoliticalEngagement => "Pol.Eng",
            Dimension::Demographics => "Demo",
        }
    }

    pub fn parse(s: &str) -> Option<Dimension> {
        let norm = s.trim().to_ascii_lowercase();
        Dimension::ALL.iter().copied().find(|d| {
            norm == d.name().to_ascii_lowercase()
                || norm == d.abbrev().to_ascii_lowercase()
                || norm == format!("{d:?}").to_ascii_lowercase()
        })
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// Maps ordinal question indices to dimensions via inclusive ranges.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    ranges: Vec<(Dimension, Vec<(u32, u32)>)>,
}

#[derive(Deserialize)]
struct TaxonomyEntry {
    name: String,
    ranges: Vec<(u32, u32)>,
}

impl Taxonomy {
    /// The built-in mapping covering ordinal indices 1..=290.
    pub fn builtin() -> Taxonomy {
        let ranges = vec![
            (Dimension::Core, vec![(1, 45), (152, 157)]),
            (Dimension::Happiness, vec![(46, 56)]),
            (Dimension::Trust, vec![(57, 105)]),
            (Dimension::EconomicIntegrity, vec![(106, 111), (112, 120)]),
            (Dimension::Security, vec![(121, 130), (131, 151)]),
            (Dimension::Technology, vec![(158, 163)]),
            (Dimension::MoralReligious, vec![(164, 175), (176, 198)]),
            (Dimension::PoliticalEngagement, vec![(199, 234), (235, 259)]),
            (Dimension::Demographics, vec![(260, 290)]),
        ];
        let tax = Taxonomy { ranges };
        tax.validate().expect("builtin taxonomy is a partition");
        tax
    }

    /// Load an override table from a JSON file of `[{name, ranges}, ...]`.
    pub fn from_file(path: &Path) -> Result<Taxonomy> {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<TaxonomyEntry> = serde_json::from_str(&text)?;
        let mut ranges = Vec::new();
        for entry in entries {
            let dim = Dimension::parse(&entry.name).ok_or_else(|| {
                Error::Taxonomy(format!("unknown dimension name '{}'", entry.name))
            })?;
            ranges.push((dim, entry.ranges));
        }
        let tax = Taxonomy { ranges };
        tax.validate()?;
        Ok(tax)
    }

    /// Checks that the ranges partition 1..=max with no gaps or overlaps.
    pub fn validate(&self) -> Result<()> {
        let mut flat: Vec<(u32, u32)> = Vec::new();
        for (dim, ranges) in &self.ranges {
            if ranges.is_empty() {
                return Err(Error::Taxonomy(format!("dimension {dim} has no ranges")));
            }
            for &(lo, hi) in ranges {
                if lo < 1 || lo > hi {
                    return Err(Error::Taxonomy(format!(
                        "dimension {dim} has invalid range [{lo}, {hi}]"
                    )));
                }
                flat.push((lo, hi));
            }
        }
        flat.sort_unstable();
        let mut expected = 1;
        for (lo, hi) in flat {
            if lo != expected {
                return Err(Error::Taxonomy(format!(
                    "ranges do not partition the index space: expected next range to start at {expected}, found {lo}"
                )));
            }
            expected = hi + 1;
        }
        Ok(())
    }

    /// Highest ordinal index covered by the taxonomy.
    pub fn max_index(&self) -> u32 {
        self.ranges
            .iter()
            .flat_map(|(_, rs)| rs.iter().map(|&(_, hi)| hi))
            .max()
            .unwrap_or(0)
    }

    /// The unique dimension whose ranges contain `ordinal_index`.
    pub fn dimension_of(&self, ordinal_index: u32) -> Result<Dimension> {
        for (dim, ranges) in &self.ranges {
            if ranges
                .iter()
                .any(|&(lo, hi)| ordinal_index >= lo && ordinal_index <= hi)
            {
                return Ok(*dim);
            }
        }
        Err(Error::Taxonomy(format!(
            "ordinal index {ordinal_index} is outside the taxonomy (1..={})",
            self.max_index()
        )))
    }
}

/// The unique dimension for `ordinal_index` under the built-in taxonomy.
pub fn dimension_of(ordinal_index: u32) -> Result<Dimension> {
    Taxonomy::builtin().dimension_of(ordinal_index)
}

// ---------------------------------------------------------------------------
// Questions and profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultipleChoiceOrdinal,
    MultipleChoiceNominal,
    FillIn,
}

impl QuestionKind {
    pub fn is_multiple_choice(&self) -> bool {
        !matches!(self, QuestionKind::FillIn)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub code: i64,
    pub label: String,
}

/// One survey item as ingested from the question bank.
#[derive(Debug, Clone, Deserialize)]
pub struct RawQuestion {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub options: Vec<AnswerOption>,
    pub kind: QuestionKind,
}

/// One validated survey item, with its dimension assigned from the taxonomy.
#[derive(Debug, Clone)]
pub struct Question {
    pub id: String,
    pub ordinal_index: u32,
    pub text: String,
    pub options: Vec<AnswerOption>,
    pub kind: QuestionKind,
    pub dimension: Dimension,
}

impl Question {
    pub fn option_label(&self, code: i64) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.code == code)
            .map(|o| o.label.as_str())
    }

    pub fn has_option(&self, code: i64) -> bool {
        self.options.iter().any(|o| o.code == code)
    }

    pub fn min_code(&self) -> Option<i64> {
        self.options.iter().map(|o| o.code).min()
    }

    pub fn max_code(&self) -> Option<i64> {
        self.options.iter().map(|o| o.code).max()
    }

    /// Question text followed by one `code. label` line per option, prefixed
    /// with the question id so prompt-matching rules can key on it.
    pub fn text_with_options(&self) -> String {
        let mut out = format!("[{}] {}", self.id, self.text);
        for opt in &self.options {
            out.push_str(&format!("\n{}. {}", opt.code, opt.label));
        }
        out
    }

    /// Single-line option list for the coordinator prompt.
    pub fn options_text(&self) -> String {
        self.options
            .iter()
            .map(|o| format!("{}. {}", o.code, o.label))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Parse the ordinal index from a question id such as `Q46`.
pub fn ordinal_index_of_id(id: &str) -> Result<u32> {
    let digits = id.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::Ingestion(format!(
            "question id '{id}' has no parsable ordinal index"
        )));
    }
    let index: u32 = digits
        .parse()
        .map_err(|_| Error::Ingestion(format!("question id '{id}' overflows the index range")))?;
    if index == 0 {
        return Err(Error::Ingestion(format!(
            "question id '{id}' has ordinal index 0; indices start at 1"
        )));
    }
    Ok(index)
}

/// A validated question bank keyed by ordinal index.
#[derive(Debug, Clone)]
pub struct QuestionBank {
    questions: BTreeMap<u32, Question>,
    by_id: BTreeMap<String, u32>,
}

impl QuestionBank {
    pub fn load(path: &Path) -> Result<QuestionBank> {
        QuestionBank::load_with_taxonomy(path, &Taxonomy::builtin())
    }

    pub fn load_with_taxonomy(path: &Path, taxonomy: &Taxonomy) -> Result<QuestionBank> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::Ingestion(format!("cannot open question bank {}: {e}", path.display()))
        })?;
        let mut raw = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RawQuestion = serde_json::from_str(&line).map_err(|e| {
                Error::Ingestion(format!("question bank line {}: {e}", lineno + 1))
            })?;
            raw.push(record);
        }
        QuestionBank::build(raw, taxonomy)
    }

    pub fn build(raw: Vec<RawQuestion>, taxonomy: &Taxonomy) -> Result<QuestionBank> {
        if raw.is_empty() {
            return Err(Error::Ingestion("no questions".to_string()));
        }
        let mut questions = BTreeMap::new();
        let mut by_id = BTreeMap::new();
        for record in raw {
            let q = validate_question(record, taxonomy)?;
            if by_id.contains_key(&q.id) {
                return Err(Error::Ingestion(format!("duplicate question id '{}'", q.id)));
            }
            if questions.contains_key(&q.ordinal_index) {
                return Err(Error::Ingestion(format!(
                    "question '{}' duplicates ordinal index {}",
                    q.id, q.ordinal_index
                )));
            }
            by_id.insert(q.id.clone(), q.ordinal_index);
            questions.insert(q.ordinal_index, q);
        }
        Ok(QuestionBank { questions, by_id })
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.by_id.get(id).and_then(|ix| self.questions.get(ix))
    }

    pub fn by_ordinal(&self, ordinal_index: u32) -> Option<&Question> {
        self.questions.get(&ordinal_index)
    }

    /// Questions in ascending ordinal order.
    pub fn iter(&self) -> impl Iterator<Item = &Question> {
        self.questions.values()
    }

    /// Ids of all multiple-choice questions, ascending ordinal order. These
    /// are the only eligible prediction targets.
    pub fn multiple_choice_ids(&self) -> Vec<String> {
        self.iter()
            .filter(|q| q.kind.is_multiple_choice())
            .map(|q| q.id.clone())
            .collect()
    }

    pub fn dimensions_covered(&self) -> BTreeSet<Dimension> {
        self.iter().map(|q| q.dimension).collect()
    }
}

fn validate_question(record: RawQuestion, taxonomy: &Taxonomy) -> Result<Question> {
    let RawQuestion {
        id,
        text,
        options,
        kind,
    } = record;
    let ordinal_index = ordinal_index_of_id(&id)?;
    let dimension = taxonomy.dimension_of(ordinal_index)?;
    match kind {
        QuestionKind::FillIn if !options.is_empty() => {
            return Err(Error::Ingestion(format!(
                "question '{id}' is fill-in but lists options"
            )));
        }
        QuestionKind::MultipleChoiceOrdinal | QuestionKind::MultipleChoiceNominal
            if options.is_empty() =>
        {
            return Err(Error::Ingestion(format!(
                "question '{id}' is multiple-choice but lists no options"
            )));
        }
        _ => {}
    }
    let mut seen = BTreeSet::new();
    for opt in &options {
        if opt.code < 1 {
            return Err(Error::Ingestion(format!(
                "question '{id}' option code {} is below 1; negative and refusal codes are rejected",
                opt.code
            )));
        }
        if !seen.insert(opt.code) {
            return Err(Error::Ingestion(format!(
                "question '{id}' has duplicate option code {}",
                opt.code
            )));
        }
    }
    if kind == QuestionKind::MultipleChoiceOrdinal {
        let codes: Vec<i64> = options.iter().map(|o| o.code).collect();
        if codes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Ingestion(format!(
                "ordinal question '{id}' options are not in ascending code order"
            )));
        }
    }
    Ok(Question {
        id,
        ordinal_index,
        text,
        options,
        kind,
        dimension,
    })
}

/// A respondent's answer to one question: an option code for multiple-choice
/// items, free text for fill-in items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Code(i64),
    Text(String),
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerValue::Code(c) => write!(f, "{c}"),
            AnswerValue::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Deserialize)]
struct RawProfile {
    respondent_id: String,
    answers: BTreeMap<String, AnswerValue>,
}

/// One respondent's validated answer set.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub respondent_id: String,
    answers: BTreeMap<String, AnswerValue>,
}

impl Profile {
    /// Validate an answer map against the bank.
    pub fn build(
        respondent_id: String,
        answers: BTreeMap<String, AnswerValue>,
        bank: &QuestionBank,
    ) -> Result<Profile> {
        for (qid, value) in &answers {
            let q = bank.get(qid).ok_or_else(|| {
                Error::Validation(format!(
                    "respondent '{respondent_id}' answers unknown question '{qid}'"
                ))
            })?;
            match (&q.kind, value) {
                (QuestionKind::FillIn, AnswerValue::Text(_)) => {}
                (QuestionKind::FillIn, AnswerValue::Code(_)) => {
                    return Err(Error::Validation(format!(
                        "respondent '{respondent_id}' gives a numeric code for fill-in question '{qid}'"
                    )));
                }
                (_, AnswerValue::Code(code)) => {
                    if !q.has_option(*code) {
                        return Err(Error::Validation(format!(
                            "respondent '{respondent_id}' answer {code} is not an option code of '{qid}'"
                        )));
                    }
                }
                (_, AnswerValue::Text(t)) => {
                    return Err(Error::Validation(format!(
                        "respondent '{respondent_id}' gives free text '{t}' for multiple-choice question '{qid}'"
                    )));
                }
            }
        }
        Ok(Profile {
            respondent_id,
            answers,
        })
    }

    pub fn size(&self) -> usize {
        self.answers.len()
    }

    pub fn answer(&self, qid: &str) -> Option<&AnswerValue> {
        self.answers.get(qid)
    }

    /// The answered option code for `qid`, if it is a code answer.
    pub fn answer_code(&self, qid: &str) -> Option<i64> {
        match self.answers.get(qid) {
            Some(AnswerValue::Code(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn answered_ids(&self) -> impl Iterator<Item = &str> {
        self.answers.keys().map(|s| s.as_str())
    }

    /// The profile restricted to the given question ids.
    pub fn restrict_to(&self, ids: &BTreeSet<String>) -> Profile {
        Profile {
            respondent_id: self.respondent_id.clone(),
            answers: self
                .answers
                .iter()
                .filter(|(k, _)| ids.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// The profile with the given question ids removed.
    pub fn without(&self, ids: &BTreeSet<String>) -> Profile {
        Profile {
            respondent_id: self.respondent_id.clone(),
            answers: self
                .answers
                .iter()
                .filter(|(k, _)| !ids.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

pub fn load_profiles(path: &Path, bank: &QuestionBank) -> Result<Vec<Profile>> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Ingestion(format!("cannot open profiles {}: {e}", path.display()))
    })?;
    let mut profiles = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawProfile = serde_json::from_str(&line)
            .map_err(|e| Error::Ingestion(format!("profiles line {}: {e}", lineno + 1)))?;
        if !seen.insert(raw.respondent_id.clone()) {
            return Err(Error::Ingestion(format!(
                "duplicate respondent id '{}'",
                raw.respondent_id
            )));
        }
        profiles.push(Profile::build(raw.respondent_id, raw.answers, bank)?);
    }
    if profiles.is_empty() {
        return Err(Error::Ingestion("no profiles".to_string()));
    }
    Ok(profiles)
}

// ---------------------------------------------------------------------------
// Folds and subsetting
// ---------------------------------------------------------------------------

/// One train/test partition of the eligible question ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fold_index: usize,
    pub test_question_ids: BTreeSet<String>,
    pub train_question_ids: BTreeSet<String>,
}

/// Sort ids by (ordinal index, id) so fold construction is independent of
/// input order.
fn canonical_id_order(ids: &mut [String]) {
    ids.sort_by_key(|id| (ordinal_index_of_id(id).unwrap_or(u32::MAX), id.clone()));
}

/// Deterministically partition `eligible_ids` into `k` folds. Test set sizes
/// differ by at most one; every id appears in exactly one test set.
pub fn make_folds(eligible_ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    if eligible_ids.len() < k {
        return Err(Error::Config(format!(
            "fold count {k} exceeds the {} eligible question ids",
            eligible_ids.len()
        )));
    }
    let unique: BTreeSet<&String> = eligible_ids.iter().collect();
    if unique.len() != eligible_ids.len() {
        return Err(Error::Config("eligible ids contain duplicates".to_string()));
    }

    let mut ids = eligible_ids.to_vec();
    canonical_id_order(&mut ids);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let all: BTreeSet<String> = ids.iter().cloned().collect();
    let base = ids.len() / k;
    let remainder = ids.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < remainder);
        let test: BTreeSet<String> = ids[cursor..cursor + size].iter().cloned().collect();
        cursor += size;
        let train: BTreeSet<String> = all.difference(&test).cloned().collect();
        folds.push(Fold {
            fold_index,
            test_question_ids: test,
            train_question_ids: train,
        });
    }
    Ok(folds)
}

fn derive_subset_seed(seed: u64, respondent_id: &str, size: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"profile-subset");
    hasher.update(seed.to_le_bytes());
    hasher.update(respondent_id.as_bytes());
    hasher.update((size as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Restrict `profile` to a uniformly sampled subset of exactly `size` of its
/// answers within `train_ids`. Deterministic per (respondent_id, size, seed).
pub fn sample_profile_subset(
    profile: &Profile,
    train_ids: &BTreeSet<String>,
    size: usize,
    seed: u64,
) -> Result<Profile> {
    let mut pool: Vec<String> = profile
        .answered_ids()
        .filter(|id| train_ids.contains(*id))
        .map(str::to_string)
        .collect();
    if size > pool.len() {
        return Err(Error::Config(format!(
            "subset size {size} exceeds the {} available training answers of respondent '{}'",
            pool.len(),
            profile.respondent_id
        )));
    }
    canonical_id_order(&mut pool);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_subset_seed(seed, &profile.respondent_id, size));
    pool.shuffle(&mut rng);
    let chosen: BTreeSet<String> = pool.into_iter().take(size).collect();
    Ok(profile.restrict_to(&chosen))
}

// ---------------------------------------------------------------------------
// Analytic chance baseline
// ---------------------------------------------------------------------------

/// Top-1 accuracy of a uniform-random guess: `1 / |options|`.
pub fn chance_accuracy(question: &Question) -> Result<f64> {
    if !question.kind.is_multiple_choice() {
        return Err(Error::UnsupportedQuestion(format!(
            "question '{}' is fill-in; chance is defined on option sets only",
            question.id
        )));
    }
    Ok(1.0 / question.options.len() as f64)
}

/// Expected normalized absolute error of a uniform-random guess against
/// `true_code`, in closed form. `None` for nominal questions, which carry no
/// error metric.
pub fn chance_expected_norm_abs_err(question: &Question, true_code: i64) -> Result<Option<f64>> {
    if !question.kind.is_multiple_choice() {
        return Err(Error::UnsupportedQuestion(format!(
            "question '{}' is fill-in; chance is defined on option sets only",
            question.id
        )));
    }
    if !question.has_option(true_code) {
        return Err(Error::Validation(format!(
            "true code {true_code} is not an option of question '{}'",
            question.id
        )));
    }
    if question.kind == QuestionKind::MultipleChoiceNominal {
        return Ok(None);
    }
    let min = question.min_code().unwrap();
    let max = question.max_code().unwrap();
    let range = max - min;
    if range == 0 {
        return Err(Error::Scoring(format!(
            "question '{}' has a single option; the error normalizer is zero",
            question.id
        )));
    }
    // Sum |c - t| over all option codes in integer arithmetic, then divide
    // once, so dyadic results (e.g. 45/90) are exact in f64.
    let sum: i64 = question
        .options
        .iter()
        .map(|o| (o.code - true_code).abs())
        .sum();
    let denom = (range as f64) * (question.options.len() as f64);
    Ok(Some(sum as f64 / denom))
}

/// Score a uniform-random guesser on every (respondent, test question) pair
/// analytically and aggregate like any other method.
pub fn chance_baseline(
    bank: &QuestionBank,
    profiles: &[Profile],
    test_ids: &BTreeSet<String>,
) -> Result<EvalReport> {
    let records = chance_records(bank, profiles, test_ids, 0)?;
    aggregate(&records, bank)
}

/// Analytic chance records for one fold; no provider calls are involved.
pub fn chance_records(
    bank: &QuestionBank,
    profiles: &[Profile],
    test_ids: &BTreeSet<String>,
    fold_index: usize,
) -> Result<Vec<SimulationRecord>> {
    for qid in test_ids {
        let q = bank
            .get(qid)
            .ok_or_else(|| Error::Validation(format!("unknown test question '{qid}'")))?;
        if !q.kind.is_multiple_choice() {
            return Err(Error::UnsupportedQuestion(format!(
                "test question '{qid}' is fill-in; only multiple-choice items are prediction targets"
            )));
        }
    }
    let mut records = Vec::new();
    for profile in profiles {
        for qid in test_ids {
            let Some(true_code) = profile.answer_code(qid) else {
                continue;
            };
            records.push(SimulationRecord {
                respondent_id: profile.respondent_id.clone(),
                question_id: qid.clone(),
                method: crate::eval::MethodTag::Chance,
                predicted: Prediction::UniformGuess,
                true_code,
                fold_index,
            });
        }
    }
    Ok(records)
}
