//! Coordinator synthesis of perspective verdicts into a final answer, plus
//! the no-LLM averaging ablation.
//!
//! The coordinator prompt is assembled from header, per-perspective block,
//! and footer fragments whose concatenation reproduces the versioned
//! template byte-for-byte (asserted in tests); drop-one ablations reuse the
//! same fragments with one block omitted.

use serde::{Deserialize, Serialize};

use crate::cab::{parse_verdict, ModuleVerdict, Perspective};
use crate::corpus::{Question, QuestionKind};
use crate::error::{Error, Result};
use crate::eval::MethodTag;
use crate::gateway::{CompletionRequest, Gateway};
use crate::templates;

/// The final simulated answer for one (respondent, question) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub question_id: String,
    /// `None` means unanswerable: every fallback was exhausted.
    pub answer_code: Option<i64>,
    pub method: MethodTag,
    pub integration_analysis: String,
    pub component_verdicts: Vec<ModuleVerdict>,
}

const COORDINATOR_HEADER: &str = "You are a coordinator in a user simulation system, and you need to synthesize analyses from three different perspectives to make a final decision.\n\nQuestion: {question_text}\nOptions: {options_text}\n\n";

const COGNITIVE_BLOCK: &str = "Cognitive perspective answer: {cognitive_answer}\nCognitive perspective analysis: {cognitive_analysis}\n\n";

const AFFECTIVE_BLOCK: &str = "Emotional perspective answer: {affective_answer}\nEmotional perspective analysis: {affective_analysis}\n\n";

const BEHAVIORAL_BLOCK: &str = "Behavioral perspective answer: {behavioral_answer}\nBehavioral perspective analysis: {behavioral_analysis}\n\n";

const COORDINATOR_FOOTER: &str = "Consider:\n\n\u{2022} How their thoughts, feelings, and behavioral tendencies might interact in this situation\n\n\u{2022} Which aspects of their psychology seem most influential here\n\n\u{2022} Where their different perspectives align or create tension\n\nFormat your response exactly as follows:\nAnswer: [option number]\nAnalysis: [your reasoning for this decision]\n";

fn block_for(perspective: Perspective) -> &'static str {
    match perspective {
        Perspective::Cognitive => COGNITIVE_BLOCK,
        Perspective::Affective => AFFECTIVE_BLOCK,
        Perspective::Behavioral => BEHAVIORAL_BLOCK,
    }
}

/// The coordinator template with question and verdict slots substituted.
/// Drop-one ablations pass two verdicts; their block is omitted entirely.
pub fn build_coordinator_prompt(question: &Question, verdicts: &[ModuleVerdict]) -> Result<String> {
    if verdicts.is_empty() {
        return Err(Error::Validation(
            "coordinator needs at least one verdict".to_string(),
        ));
    }
    let mut seen = Vec::new();
    let mut skeleton = String::from(COORDINATOR_HEADER);
    let mut substitutions: Vec<(&str, String)> = vec![
        ("question_text", format!("[{}] {}", question.id, question.text)),
        ("options_text", question.options_text()),
    ];
    for verdict in verdicts {
        if seen.contains(&verdict.perspective) {
            return Err(Error::Validation(format!(
                "duplicate {} verdict",
                verdict.perspective.name()
            )));
        }
        seen.push(verdict.perspective);
        skeleton.push_str(block_for(verdict.perspective));
        substitutions.push((
            match verdict.perspective {
                Perspective::Cognitive => "cognitive_answer",
                Perspective::Affective => "affective_answer",
                Perspective::Behavioral => "behavioral_answer",
            },
            verdict.answer_slot(),
        ));
        substitutions.push((
            match verdict.perspective {
                Perspective::Cognitive => "cognitive_analysis",
                Perspective::Affective => "affective_analysis",
                Perspective::Behavioral => "behavioral_analysis",
            },
            verdict.analysis_slot().to_string(),
        ));
    }
    skeleton.push_str(COORDINATOR_FOOTER);
    let pairs: Vec<(&str, &str)> = substitutions
        .iter()
        .map(|(k, v)| (*k, v.as_str()))
        .collect();
    templates::fill(&skeleton, &pairs)
}

/// Majority code among parsed verdicts: the code appearing on at least two
/// of them, if any.
fn majority_code(verdicts: &[ModuleVerdict]) -> Option<i64> {
    let codes: Vec<i64> = verdicts.iter().filter_map(|v| v.answer_code).collect();
    codes
        .iter()
        .find(|&&code| codes.iter().filter(|&&c| c == code).count() >= 2)
        .copied()
}

/// Synthesize the final answer through the coordinator completion, with the
/// fallback ladder: parse failure → one re-ask → majority vote among parsed
/// verdicts → the cognitive verdict → unanswerable.
pub fn coordinate(
    gateway: &Gateway,
    model_id: &str,
    question: &Question,
    verdicts: Vec<ModuleVerdict>,
    method: MethodTag,
) -> Result<FinalAnswer> {
    let prompt = build_coordinator_prompt(question, &verdicts)?;
    let request = CompletionRequest::new(model_id, prompt);
    // The parse_verdict perspective slot is irrelevant for the coordinator
    // reply; reuse Cognitive as a placeholder.
    let mut parsed = None;
    for attempt in 0..2 {
        match gateway.complete(&request) {
            Ok(raw) => {
                let v = parse_verdict(&raw, question, Perspective::Cognitive);
                if v.parse_ok {
                    parsed = Some(v);
                    break;
                }
                if attempt == 0 {
                    log::debug!(
                        "coordinator reply malformed for question '{}'; re-asking",
                        question.id
                    );
                }
            }
            Err(Error::Provider(note)) | Err(Error::Transport(note)) => {
                log::warn!("coordinator call failed for question '{}': {note}", question.id);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    if let Some(v) = parsed {
        return Ok(FinalAnswer {
            question_id: question.id.clone(),
            answer_code: v.answer_code,
            method,
            integration_analysis: v.analysis,
            component_verdicts: verdicts,
        });
    }
    let fallback_code = majority_code(&verdicts).or_else(|| {
        verdicts
            .iter()
            .find(|v| v.perspective == Perspective::Cognitive)
            .and_then(|v| v.answer_code)
    });
    Ok(FinalAnswer {
        question_id: question.id.clone(),
        answer_code: fallback_code,
        method,
        integration_analysis: String::new(),
        component_verdicts: verdicts,
    })
}

/// Round half away from zero.
fn round_half_away(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5).floor() as i64
    } else {
        (x - 0.5).ceil() as i64
    }
}

/// Average the parsed verdict codes without any LLM call: mean, rounded
/// half away from zero, clamped to the option range, snapped to the nearest
/// valid code (upward on ties). Nominal questions are refused — averaging
/// category codes is meaningless.
pub fn average_integrate(
    question: &Question,
    verdicts: Vec<ModuleVerdict>,
) -> Result<FinalAnswer> {
    if question.kind != QuestionKind::MultipleChoiceOrdinal {
        return Err(Error::Config(format!(
            "averaging is undefined for non-ordinal question '{}'",
            question.id
        )));
    }
    let codes: Vec<i64> = verdicts.iter().filter_map(|v| v.answer_code).collect();
    let answer_code = if codes.is_empty() {
        None
    } else {
        let mean = codes.iter().sum::<i64>() as f64 / codes.len() as f64;
        let rounded = round_half_away(mean)
            .clamp(question.min_code().unwrap(), question.max_code().unwrap());
        // Snap to a real option code; scales are usually contiguous, but
        // nothing guarantees it.
        let snapped = if question.has_option(rounded) {
            rounded
        } else {
            question
                .options
                .iter()
                .map(|o| o.code)
                .min_by_key(|c| ((c - rounded).abs(), -c))
                .expect("ordinal questions have options")
        };
        Some(snapped)
    };
    Ok(FinalAnswer {
        question_id: question.id.clone(),
        answer_code,
        method: MethodTag::AvgIntegrate,
        integration_analysis: String::new(),
        component_verdicts: verdicts,
    })
}
