//! Profile serialization, backstory generation, and information-preservation
//! checking.
//!
//! A profile is rendered as (question, options, answer) blocks in ascending
//! ordinal order; the backstory prompt wraps that text in the versioned
//! backstory template. Fidelity checking is a surface-level lower bound: an
//! item counts as preserved when its answer label or literal numeric value
//! appears in the narrative.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerValue, Profile, Question, QuestionBank};
use crate::error::{Error, Result};
use crate::gateway::{completion_cache_key, CompletionRequest, Gateway};
use crate::templates;

/// A profile rendered to prompt text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileText {
    pub text: String,
    pub item_count: usize,
}

/// A generated second-person narrative with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backstory {
    pub respondent_id: String,
    pub narrative: String,
    pub source_question_ids: std::collections::BTreeSet<String>,
    pub model_id: String,
    pub prompt_digest: String,
}

/// Surface-level information-preservation report for one backstory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub total_items: usize,
    pub matched_items: usize,
    /// Ascending ordinal order.
    pub missing_item_ids: Vec<String>,
    pub coverage: f64,
}

fn render_item(question: &Question, answer: &AnswerValue) -> Result<String> {
    let mut block = format!("[{}] {}", question.id, question.text);
    match answer {
        AnswerValue::Code(code) => {
            let label = question.option_label(*code).ok_or_else(|| {
                Error::Validation(format!(
                    "answer {code} references no option of question '{}'",
                    question.id
                ))
            })?;
            block.push_str("\nOptions:");
            for opt in &question.options {
                block.push_str(&format!("\n{}. {}", opt.code, opt.label));
            }
            block.push_str(&format!("\nAnswer: {label} ({code})"));
        }
        AnswerValue::Text(text) => {
            block.push_str(&format!("\nAnswer: {text}"));
        }
    }
    Ok(block)
}

/// Render every answered item as a (question, options, answer) block,
/// ascending ordinal order, blocks separated by blank lines.
pub fn serialize_profile(profile: &Profile, bank: &QuestionBank) -> Result<ProfileText> {
    let mut blocks = Vec::with_capacity(profile.size());
    for question in bank.iter() {
        if let Some(answer) = profile.answer(&question.id) {
            blocks.push(render_item(question, answer)?);
        }
    }
    Ok(ProfileText {
        text: blocks.join("\n\n"),
        item_count: blocks.len(),
    })
}

/// The backstory template with `{profile_text}` substituted.
pub fn build_backstory_prompt(profile_text: &ProfileText) -> Result<String> {
    // An empty profile is legal: the scale sweep's zero-item step generates
    // a backstory from no information at all.
    templates::fill(templates::BACKSTORY, &[("profile_text", &profile_text.text)])
}

/// Generate (or fetch from cache) the narrative for one respondent.
pub fn generate_backstory(
    profile: &Profile,
    bank: &QuestionBank,
    gateway: &Gateway,
    model_id: &str,
) -> Result<Backstory> {
    let profile_text = serialize_profile(profile, bank)?;
    let prompt = build_backstory_prompt(&profile_text)?;
    let request = CompletionRequest::new(model_id, prompt);
    let prompt_digest = completion_cache_key(&request);
    let narrative = gateway.complete(&request)?;
    if narrative.trim().is_empty() {
        return Err(Error::Provider(format!(
            "empty backstory narrative for respondent '{}'",
            profile.respondent_id
        )));
    }
    Ok(Backstory {
        respondent_id: profile.respondent_id.clone(),
        narrative,
        source_question_ids: profile.answered_ids().map(str::to_string).collect(),
        model_id: model_id.to_string(),
        prompt_digest,
    })
}

/// True when `value` appears in the narrative as "level N" or as a
/// word-bounded bare number.
fn numeric_value_present(narrative_lower: &str, value: i64) -> bool {
    if narrative_lower.contains(&format!("level {value}")) {
        return true;
    }
    let pattern = format!(r"(^|[^0-9]){value}([^0-9]|$)");
    Regex::new(&pattern).expect("digit pattern is valid").is_match(narrative_lower)
}

fn item_preserved(narrative_lower: &str, question: &Question, answer: &AnswerValue) -> bool {
    match answer {
        AnswerValue::Code(code) => {
            let label = question.option_label(*code).unwrap_or_default().trim();
            // Numeric labels (scale points) must match as whole numbers, not
            // as digit substrings of unrelated values.
            let label_matches = match label.parse::<i64>() {
                Ok(value) => numeric_value_present(narrative_lower, value),
                Err(_) => {
                    !label.is_empty() && narrative_lower.contains(&label.to_lowercase())
                }
            };
            label_matches || numeric_value_present(narrative_lower, *code)
        }
        AnswerValue::Text(text) => {
            let trimmed = text.trim();
            if trimmed.is_empty() {
                return false;
            }
            if let Ok(value) = trimmed.parse::<i64>() {
                return numeric_value_present(narrative_lower, value);
            }
            narrative_lower.contains(&trimmed.to_lowercase())
        }
    }
}

/// Check which profile answers surface verbatim in the narrative.
pub fn fidelity_check(
    backstory: &Backstory,
    profile: &Profile,
    bank: &QuestionBank,
) -> FidelityReport {
    let narrative_lower = backstory.narrative.to_lowercase();
    let mut matched_items = 0;
    let mut missing_item_ids = Vec::new();
    let mut total_items = 0;
    for question in bank.iter() {
        let Some(answer) = profile.answer(&question.id) else {
            continue;
        };
        total_items += 1;
        if item_preserved(&narrative_lower, question, answer) {
            matched_items += 1;
        } else {
            missing_item_ids.push(question.id.clone());
        }
    }
    // 0/0 reads as full preservation: there was nothing to lose.
    let coverage = if total_items == 0 {
        1.0
    } else {
        matched_items as f64 / total_items as f64
    };
    FidelityReport {
        total_items,
        matched_items,
        missing_item_ids,
        coverage,
    }
}
