//! The Full Info and RAG comparison methods: direct prompting over the
//! serialized training profile, and retrieval-augmented prompting over the
//! top-k most similar profile entries.

use crate::corpus::{Profile, Question, QuestionBank};
use crate::error::{Error, Result};
use crate::eval::MethodTag;
use crate::gateway::{CompletionRequest, Gateway};
use crate::integrate::FinalAnswer;
use crate::retrieval::VectorIndex;
use crate::story::serialize_profile;
use crate::templates;

/// Parse a direct-prompt reply: accepts "option N", bare integers, or an
/// option label (exactly, or as the unique label mentioned).
pub fn parse_choice(raw_text: &str, question: &Question) -> Option<i64> {
    let cleaned = raw_text
        .trim()
        .trim_matches(|c| c == '\'' || c == '"' || c == '*' || c == '.')
        .trim();
    let option_n = regex::Regex::new(r"(?i)\boption\s+(\d{1,9})\b").expect("static pattern");
    if let Some(captures) = option_n.captures(cleaned) {
        if let Ok(code) = captures[1].parse::<i64>() {
            if question.has_option(code) {
                return Some(code);
            }
        }
    }
    let bare = regex::Regex::new(r"(^|[^0-9])(\d{1,9})([^0-9]|$)").expect("static pattern");
    if let Some(captures) = bare.captures(cleaned) {
        if let Ok(code) = captures[2].parse::<i64>() {
            if question.has_option(code) {
                return Some(code);
            }
        }
    }
    // Exact label match, then unique label mention.
    for opt in &question.options {
        if cleaned.eq_ignore_ascii_case(opt.label.trim()) {
            return Some(opt.code);
        }
    }
    let lower = cleaned.to_lowercase();
    let mentioned: Vec<i64> = question
        .options
        .iter()
        .filter(|o| lower.contains(&o.label.trim().to_lowercase()))
        .map(|o| o.code)
        .collect();
    match mentioned.as_slice() {
        [single] => Some(*single),
        _ => None,
    }
}

fn direct_answer(
    gateway: &Gateway,
    model_id: &str,
    question: &Question,
    prompt: String,
    method: MethodTag,
) -> Result<FinalAnswer> {
    let request = CompletionRequest::new(model_id, prompt);
    let mut answer_code = None;
    let mut analysis = String::new();
    for attempt in 0..2 {
        match gateway.complete(&request) {
            Ok(raw) => {
                if let Some(code) = parse_choice(&raw, question) {
                    answer_code = Some(code);
                    analysis = raw;
                    break;
                }
                if attempt == 0 {
                    log::debug!(
                        "{} reply unparseable for question '{}'; re-asking",
                        method.label(),
                        question.id
                    );
                }
            }
            Err(Error::Provider(note)) | Err(Error::Transport(note)) => {
                log::warn!(
                    "{} call failed for question '{}': {note}",
                    method.label(),
                    question.id
                );
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FinalAnswer {
        question_id: question.id.clone(),
        answer_code,
        method,
        integration_analysis: analysis,
        component_verdicts: Vec::new(),
    })
}

/// Build a direct prompt for one question over arbitrary profile text. The
/// same shape serves Full Info (serialized training profile) and the no-CAB
/// ablation (backstory narrative as profile text).
pub fn build_direct_prompt(profile_text: &str, question: &Question) -> Result<String> {
    templates::fill(
        templates::FULL_INFO,
        &[
            ("question_text_with_options", &question.text_with_options()),
            ("original_profile_text", profile_text),
        ],
    )
}

/// Ask one question directly over the given profile text: one completion,
/// one re-ask on an unparseable reply, then unanswerable.
pub fn direct_prompt_answer(
    gateway: &Gateway,
    model_id: &str,
    profile_text: &str,
    question: &Question,
    method: MethodTag,
) -> Result<FinalAnswer> {
    let prompt = build_direct_prompt(profile_text, question)?;
    direct_answer(gateway, model_id, question, prompt, method)
}

/// Build the Full Info prompt for one question over a serialized training
/// profile.
pub fn build_full_info_prompt(
    profile: &Profile,
    question: &Question,
    bank: &QuestionBank,
) -> Result<String> {
    let profile_text = serialize_profile(profile, bank)?;
    build_direct_prompt(&profile_text.text, question)
}

/// Direct prompting with the entire serialized training profile.
pub fn full_info_answer(
    gateway: &Gateway,
    model_id: &str,
    profile: &Profile,
    question: &Question,
    bank: &QuestionBank,
) -> Result<FinalAnswer> {
    let prompt = build_full_info_prompt(profile, question, bank)?;
    direct_answer(gateway, model_id, question, prompt, MethodTag::FullInfo)
}

/// The query text embedded for retrieval: question text with options, so
/// scale semantics participate in similarity.
pub fn rag_query_text(question: &Question) -> String {
    question.text_with_options()
}

/// Build the RAG prompt from the top-k retrieved profile segments.
pub fn build_rag_prompt(
    gateway: &Gateway,
    embedding_model: &str,
    index: &VectorIndex,
    question: &Question,
    k: usize,
) -> Result<String> {
    let query = gateway.embed(embedding_model, &rag_query_text(question))?;
    let k = k.min(index.len());
    let segments = if k == 0 {
        String::new()
    } else {
        index
            .top_k(&query, k)?
            .into_iter()
            .map(|m| {
                index
                    .payload_of(&m.entry_id)
                    .expect("match came from this index")
                    .to_string()
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    templates::fill(
        templates::RAG,
        &[
            ("question_text_with_options", &question.text_with_options()),
            ("retrieved_profile_segments", &segments),
        ],
    )
}

/// Retrieval-augmented prompting over the respondent's own training items.
pub fn rag_answer(
    gateway: &Gateway,
    model_id: &str,
    embedding_model: &str,
    index: &VectorIndex,
    question: &Question,
    k: usize,
) -> Result<FinalAnswer> {
    let prompt = build_rag_prompt(gateway, embedding_model, index, question, k)?;
    direct_answer(gateway, model_id, question, prompt, MethodTag::Rag)
}

/// The per-entry payloads for a respondent's retrieval index: one serialized
/// (question, options, answer) block per training answer, ascending ordinal
/// order.
pub fn index_entries_for(profile: &Profile, bank: &QuestionBank) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::with_capacity(profile.size());
    for question in bank.iter() {
        if profile.answer(&question.id).is_some() {
            let restricted = profile.restrict_to(
                &[question.id.clone()].into_iter().collect(),
            );
            let block = serialize_profile(&restricted, bank)?;
            entries.push((question.id.clone(), block.text));
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerOption, AnswerValue, QuestionKind, RawQuestion, Taxonomy};
    use crate::gateway::mock::{MatchKind, MockChat, MockEmbed, MockRule, MockScript};
    use crate::gateway::GatewayOptions;
    use crate::retrieval::build_index;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn bank() -> QuestionBank {
        let mut raw = vec![RawQuestion {
            id: "Q46".to_string(),
            text: "Taking all things together, would you say you are:".to_string(),
            options: vec![
                AnswerOption { code: 1, label: "Very happy".to_string() },
                AnswerOption { code: 2, label: "Rather happy".to_string() },
                AnswerOption { code: 3, label: "Not very happy".to_string() },
                AnswerOption { code: 4, label: "Not at all happy".to_string() },
                AnswerOption { code: 5, label: "No answer".to_string() },
            ],
            kind: QuestionKind::MultipleChoiceOrdinal,
        }];
        for i in [57, 58, 59, 60] {
            raw.push(RawQuestion {
                id: format!("Q{i}"),
                text: format!("Trust statement {i}?"),
                options: (1..=4)
                    .map(|c| AnswerOption { code: c, label: format!("Level {c}") })
                    .collect(),
                kind: QuestionKind::MultipleChoiceOrdinal,
            });
        }
        QuestionBank::build(raw, &Taxonomy::builtin()).unwrap()
    }

    fn training_profile(bank: &QuestionBank) -> Profile {
        let mut answers = BTreeMap::new();
        for i in [57, 58, 59, 60] {
            answers.insert(format!("Q{i}"), AnswerValue::Code((i % 4 + 1) as i64));
        }
        Profile::build("r1".to_string(), answers, bank).unwrap()
    }

    fn q46(bank: &QuestionBank) -> Question {
        bank.get("Q46").unwrap().clone()
    }

    #[test]
    fn choice_parser_accepts_the_documented_shapes() {
        let bank = bank();
        let q = q46(&bank);
        assert_eq!(parse_choice("3", &q), Some(3));
        assert_eq!(parse_choice("'option 2'", &q), Some(2));
        assert_eq!(parse_choice("Option 4", &q), Some(4));
        assert_eq!(parse_choice("Not at all happy", &q), Some(4));
        assert_eq!(parse_choice("I would say I am rather happy.", &q), Some(2));
        assert_eq!(parse_choice("Answer: 1", &q), Some(1));
        assert_eq!(parse_choice("7", &q), None);
        assert_eq!(parse_choice("no idea", &q), None);
        // "happy" substring of several labels must not produce a match, and
        // mentioning two labels is ambiguous.
        assert_eq!(parse_choice("very happy or rather happy", &q), None);
    }

    fn scripted(rules: Vec<MockRule>) -> (Gateway, Arc<MockChat>) {
        let chat = Arc::new(MockChat::from_script(MockScript { rules }).unwrap());
        let gateway = Gateway::new(
            chat.clone(),
            Arc::new(MockEmbed::default()),
            None,
            GatewayOptions::default(),
        );
        (gateway, chat)
    }

    #[test]
    fn full_info_prompt_contains_every_training_item_and_no_test_answer() {
        let bank = bank();
        let profile = training_profile(&bank);
        let q = q46(&bank);
        let prompt = build_full_info_prompt(&profile, &q, &bank).unwrap();
        for i in [57, 58, 59, 60] {
            assert_eq!(prompt.matches(&format!("[Q{i}]")).count(), 1);
        }
        assert!(prompt.contains("[Q46] Taking all things together"));
        // The profile contains no Q46 answer, so no leakage is possible;
        // the question block must not carry an answer line.
        let question_section = prompt.split("User profile:").next().unwrap();
        assert!(!question_section.contains("Answer:"));
        assert!(prompt.contains("Answer format: 'option you selected'"));
    }

    #[test]
    fn full_info_answer_parses_mock_replies() {
        let bank = bank();
        let profile = training_profile(&bank);
        let q = q46(&bank);
        let (gateway, chat) = scripted(vec![MockRule {
            on: MatchKind::Prefix,
            pattern: "Question: [Q46]".to_string(),
            response: "'option 2'".to_string(),
        }]);
        let answer = full_info_answer(&gateway, "m", &profile, &q, &bank).unwrap();
        assert_eq!(answer.answer_code, Some(2));
        assert_eq!(answer.method, MethodTag::FullInfo);
        assert!(answer.component_verdicts.is_empty());
        assert_eq!(chat.call_count(), 1);
    }

    #[test]
    fn unparseable_reply_is_reasked_then_unanswerable() {
        let bank = bank();
        let profile = training_profile(&bank);
        let q = q46(&bank);
        let (gateway, chat) = scripted(vec![MockRule {
            on: MatchKind::Prefix,
            pattern: "Question:".to_string(),
            response: "I cannot decide".to_string(),
        }]);
        let answer = full_info_answer(&gateway, "m", &profile, &q, &bank).unwrap();
        assert_eq!(answer.answer_code, None);
        assert_eq!(chat.call_count(), 2);
    }

    #[test]
    fn rag_prompt_uses_top_k_own_entries() {
        let bank = bank();
        let profile = training_profile(&bank);
        let q = q46(&bank);
        let (gateway, _chat) = scripted(vec![]);
        let entries = index_entries_for(&profile, &bank).unwrap();
        assert_eq!(entries.len(), 4);
        let index = build_index(&gateway, "emb", &entries).unwrap();

        let prompt = build_rag_prompt(&gateway, "emb", &index, &q, 3).unwrap();
        let segment_section = prompt
            .split("Relevant user information:\n")
            .nth(1)
            .unwrap()
            .split("\n\nBased ONLY on")
            .next()
            .unwrap();
        let count = segment_section.matches("[Q").count();
        assert_eq!(count, 3);
        // Every segment is one of the respondent's own training blocks.
        for (id, payload) in &entries {
            if segment_section.contains(&format!("[{id}]")) {
                assert!(segment_section.contains(payload));
            }
        }
        assert!(prompt.contains("Based ONLY on the relevant user information"));
    }

    #[test]
    fn rag_with_fewer_entries_than_k_uses_all() {
        let bank = bank();
        let mut answers = BTreeMap::new();
        answers.insert("Q57".to_string(), AnswerValue::Code(2));
        answers.insert("Q58".to_string(), AnswerValue::Code(3));
        let profile = Profile::build("r2".to_string(), answers, &bank).unwrap();
        let q = q46(&bank);
        let (gateway, _chat) = scripted(vec![]);
        let entries = index_entries_for(&profile, &bank).unwrap();
        let index = build_index(&gateway, "emb", &entries).unwrap();
        let prompt = build_rag_prompt(&gateway, "emb", &index, &q, 3).unwrap();
        let segment_section = prompt
            .split("Relevant user information:\n")
            .nth(1)
            .unwrap()
            .split("\n\nBased ONLY on")
            .next()
            .unwrap();
        assert_eq!(segment_section.matches("[Q").count(), 2);
    }

    #[test]
    fn rag_end_to_end_parses_the_reply() {
        let bank = bank();
        let profile = training_profile(&bank);
        let q = q46(&bank);
        let (gateway, _chat) = scripted(vec![MockRule {
            on: MatchKind::Prefix,
            pattern: "Question: [Q46]".to_string(),
            response: "Answer: 1".to_string(),
        }]);
        let entries = index_entries_for(&profile, &bank).unwrap();
        let index = build_index(&gateway, "emb", &entries).unwrap();
        let answer = rag_answer(&gateway, "m", "emb", &index, &q, 3).unwrap();
        assert_eq!(answer.answer_code, Some(1));
        assert_eq!(answer.method, MethodTag::Rag);
    }
}
