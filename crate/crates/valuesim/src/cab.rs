//! The three perspective modules — cognitive, affective, behavioral — and
//! their structured verdict parsing.
//!
//! Each perspective wraps the same context (a backstory narrative, or raw
//! profile text under the story ablation) and question in its own tutorial
//! prompt. The three completions run concurrently and come back in canonical
//! order. Malformed replies are re-asked once; a second failure becomes an
//! abstention that downstream integration handles explicitly.

use serde::{Deserialize, Serialize};

use crate::corpus::Question;
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway};
use crate::parallel::parallel_map;
use crate::templates;

/// The canonical perspective order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    Cognitive,
    Affective,
    Behavioral,
}

impl Perspective {
    pub const ALL: [Perspective; 3] =
        [Perspective::Cognitive, Perspective::Affective, Perspective::Behavioral];

    pub fn name(&self) -> &'static str {
        match self {
            Perspective::Cognitive => "cognitive",
            Perspective::Affective => "affective",
            Perspective::Behavioral => "behavioral",
        }
    }

    pub fn template(&self) -> &'static str {
        match self {
            Perspective::Cognitive => templates::COGNITIVE,
            Perspective::Affective => templates::AFFECTIVE,
            Perspective::Behavioral => templates::BEHAVIORAL,
        }
    }

    /// The perspective's five-bullet tutorial block — the only part of the
    /// prompt that differs between perspectives.
    pub fn tutorial(&self) -> &'static str {
        let template = self.template();
        let start = template.find("Tutorial:\n").expect("template has a tutorial") + "Tutorial:\n".len();
        let end = template.find("\n\nUser Profile:").expect("template has a profile section");
        &template[start..end]
    }
}

/// One perspective's parsed reply for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleVerdict {
    pub perspective: Perspective,
    /// A valid option code of the target question when `parse_ok`.
    pub answer_code: Option<i64>,
    pub analysis: String,
    pub raw_text: String,
    pub parse_ok: bool,
}

impl ModuleVerdict {
    fn abstention(perspective: Perspective, raw_text: String) -> ModuleVerdict {
        ModuleVerdict {
            perspective,
            answer_code: None,
            analysis: String::new(),
            raw_text,
            parse_ok: false,
        }
    }

    /// Text for the coordinator's answer slot.
    pub fn answer_slot(&self) -> String {
        match self.answer_code {
            Some(code) => code.to_string(),
            None => "abstain".to_string(),
        }
    }

    /// Text for the coordinator's analysis slot. Abstentions pass their raw
    /// reply through unchanged so the coordinator sees what happened.
    pub fn analysis_slot(&self) -> &str {
        if self.parse_ok {
            &self.analysis
        } else {
            &self.raw_text
        }
    }
}

/// Render a well-formed reply in the format the prompts demand.
pub fn render_verdict_reply(answer_code: i64, analysis: &str) -> String {
    format!("Answer: {answer_code}\nAnalysis: {analysis}")
}

/// The perspective's template with the context and question substituted.
pub fn build_perspective_prompt(
    perspective: Perspective,
    context_text: &str,
    question: &Question,
) -> Result<String> {
    if context_text.is_empty() {
        return Err(Error::Validation(
            "perspective prompts need a non-empty context".to_string(),
        ));
    }
    templates::fill(
        perspective.template(),
        &[
            ("backstory", context_text),
            ("question_text_with_options", &question.text_with_options()),
        ],
    )
}

/// Extract a valid option code from one answer-line candidate.
fn parse_answer_candidate(candidate: &str, question: &Question) -> Option<i64> {
    let cleaned = candidate
        .trim()
        .trim_matches(|c| c == '\'' || c == '"' || c == '*')
        .trim();
    let cleaned = match cleaned.strip_prefix('[') {
        Some(rest) => rest.strip_suffix(']').unwrap_or(rest),
        None => cleaned,
    }
    .trim();
    if cleaned.is_empty() {
        return None;
    }
    // Leading integer, optionally written as "option N" or "Option N".
    let numeric = regex::Regex::new(r"^(?i)(?:option\s+)?(\d{1,9})").expect("static pattern");
    if let Some(captures) = numeric.captures(cleaned) {
        let code: i64 = captures[1].parse().ok()?;
        return question.has_option(code).then_some(code);
    }
    // Exact option-label echo.
    question
        .options
        .iter()
        .find(|o| cleaned.eq_ignore_ascii_case(o.label.trim()))
        .map(|o| o.code)
}

/// Parse a perspective (or coordinator) reply.
///
/// Takes the integer from the last `Answer:` line that yields a valid option
/// code — chain-of-thought leakage tends to precede the final answer — and
/// everything after the first `Analysis:` marker as the analysis. Failures
/// are encoded in `parse_ok`, never errors; the caller decides policy.
pub fn parse_verdict(raw_text: &str, question: &Question, perspective: Perspective) -> ModuleVerdict {
    let answer_line = regex::Regex::new(r"(?i)^\s*answer\s*:\s*(.*)$").expect("static pattern");
    let mut answer_code = None;
    for line in raw_text.lines() {
        if let Some(captures) = answer_line.captures(line) {
            if let Some(code) = parse_answer_candidate(&captures[1], question) {
                answer_code = Some(code);
            }
        }
    }
    let analysis_marker = regex::Regex::new(r"(?i)analysis\s*:\s*").expect("static pattern");
    let analysis = analysis_marker
        .find(raw_text)
        .map(|m| raw_text[m.end()..].trim().to_string())
        .unwrap_or_default();
    ModuleVerdict {
        perspective,
        answer_code,
        analysis,
        raw_text: raw_text.to_string(),
        parse_ok: answer_code.is_some(),
    }
}

/// Complete a request, folding provider trouble into `Err(note)` of the
/// inner result so callers can abstain instead of aborting the respondent.
/// Configuration mistakes still propagate as hard errors.
fn complete_or_note(
    gateway: &Gateway,
    request: &CompletionRequest,
) -> Result<std::result::Result<String, String>> {
    match gateway.complete(request) {
        Ok(raw) => Ok(Ok(raw)),
        Err(Error::Provider(note)) | Err(Error::Transport(note)) => Ok(Err(note)),
        Err(e) => Err(e),
    }
}

/// Complete one perspective prompt with the re-ask-then-abstain policy: a
/// malformed reply is asked once more, and a second failure stands as an
/// abstention. Against a cached or scripted backend the re-ask sees the
/// identical reply and deterministically abstains; a live backend may
/// produce a well-formed reply the second time. Provider failures (already
/// retried inside the gateway) abstain immediately.
pub fn ask_perspective(
    gateway: &Gateway,
    model_id: &str,
    perspective: Perspective,
    context_text: &str,
    question: &Question,
) -> Result<ModuleVerdict> {
    let prompt = build_perspective_prompt(perspective, context_text, question)?;
    let request = CompletionRequest::new(model_id, prompt);
    let raw = match complete_or_note(gateway, &request)? {
        Ok(raw) => raw,
        Err(note) => {
            return Ok(ModuleVerdict::abstention(
                perspective,
                format!("[provider error] {note}"),
            ))
        }
    };
    let first = parse_verdict(&raw, question, perspective);
    if first.parse_ok {
        return Ok(first);
    }
    log::debug!(
        "{} verdict malformed for question '{}'; re-asking",
        perspective.name(),
        question.id
    );
    match complete_or_note(gateway, &request)? {
        Ok(raw) => Ok(parse_verdict(&raw, question, perspective)),
        Err(note) => Ok(ModuleVerdict::abstention(
            perspective,
            format!("[provider error] {note}"),
        )),
    }
}

/// Run all three perspectives concurrently; verdicts come back in canonical
/// order (cognitive, affective, behavioral) regardless of completion order.
pub fn run_perspectives(
    gateway: &Gateway,
    model_id: &str,
    context_text: &str,
    question: &Question,
) -> Result<[ModuleVerdict; 3]> {
    let verdicts =
        run_perspective_subset(gateway, model_id, context_text, question, &Perspective::ALL)?;
    let mut iter = verdicts.into_iter();
    Ok([
        iter.next().expect("three verdicts"),
        iter.next().expect("three verdicts"),
        iter.next().expect("three verdicts"),
    ])
}

/// Run a chosen subset of perspectives (the drop-one ablations keep two);
/// verdicts come back in the order the perspectives were given.
pub fn run_perspective_subset(
    gateway: &Gateway,
    model_id: &str,
    context_text: &str,
    question: &Question,
    perspectives: &[Perspective],
) -> Result<Vec<ModuleVerdict>> {
    if perspectives.is_empty() {
        return Err(Error::Validation(
            "at least one perspective must run".to_string(),
        ));
    }
    parallel_map(perspectives.to_vec(), perspectives.len(), |perspective| {
        ask_perspective(gateway, model_id, perspective, context_text, question)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerOption, QuestionBank, QuestionKind, RawQuestion, Taxonomy};
    use crate::gateway::mock::{MatchKind, MockChat, MockEmbed, MockRule, MockScript};
    use crate::gateway::GatewayOptions;
    use std::sync::Arc;

    fn question() -> Question {
        let bank = QuestionBank::build(
            vec![RawQuestion {
                id: "Q46".to_string(),
                text: "Taking all things together, would you say you are:".to_string(),
                options: vec![
                    AnswerOption { code: 1, label: "Very happy".to_string() },
                    AnswerOption { code: 2, label: "Rather happy".to_string() },
                    AnswerOption { code: 3, label: "Not very happy".to_string() },
                    AnswerOption { code: 4, label: "Not at all happy".to_string() },
                    AnswerOption { code: 5, label: "Don't know".to_string() },
                ],
                kind: QuestionKind::MultipleChoiceOrdinal,
            }],
            &Taxonomy::builtin(),
        )
        .unwrap();
        bank.get("Q46").unwrap().clone()
    }

    #[test]
    fn prompts_carry_the_tutorial_fingerprints() {
        let q = question();
        let cognitive = build_perspective_prompt(Perspective::Cognitive, "You are...", &q).unwrap();
        assert!(cognitive.contains("reasoning approaches do they seem to prefer"));
        let affective = build_perspective_prompt(Perspective::Affective, "You are...", &q).unwrap();
        assert!(affective.contains("values and principles seem to guide"));
        let behavioral = build_perspective_prompt(Perspective::Behavioral, "You are...", &q).unwrap();
        assert!(behavioral.contains("implement their decisions in practice"));
        for prompt in [&cognitive, &affective, &behavioral] {
            assert!(prompt.contains("[Q46] Taking all things together"));
            assert!(prompt.contains("Answer: [option number]"));
            assert!(prompt.ends_with("Analysis: [your reasoning for why this user would choose this option]\n"));
        }
        assert!(build_perspective_prompt(Perspective::Cognitive, "", &q).is_err());
    }

    #[test]
    fn prompts_differ_only_in_the_tutorial_block() {
        let q = question();
        let prompts: Vec<String> = Perspective::ALL
            .iter()
            .map(|p| build_perspective_prompt(*p, "identical context", &q).unwrap())
            .collect();
        let stripped: Vec<String> = prompts
            .iter()
            .zip(Perspective::ALL)
            .map(|(prompt, p)| prompt.replace(p.tutorial(), "<TUTORIAL>"))
            .collect();
        assert_eq!(stripped[0], stripped[1]);
        assert_eq!(stripped[1], stripped[2]);
        assert_ne!(prompts[0], prompts[1]);
    }

    #[test]
    fn parses_plain_and_bracketed_answers() {
        let q = question();
        let v = parse_verdict("Answer: 3\nAnalysis: because X", &q, Perspective::Cognitive);
        assert!(v.parse_ok);
        assert_eq!(v.answer_code, Some(3));
        assert_eq!(v.analysis, "because X");

        let v = parse_verdict("Answer: [2]\nAnalysis: y", &q, Perspective::Affective);
        assert_eq!(v.answer_code, Some(2));

        let v = parse_verdict("  answer:  option 4 \nAnalysis: z", &q, Perspective::Behavioral);
        assert_eq!(v.answer_code, Some(4));

        let v = parse_verdict("Answer: 2. Rather happy\nAnalysis: echo", &q, Perspective::Cognitive);
        assert_eq!(v.answer_code, Some(2));

        let v = parse_verdict("Answer: Not very happy\nAnalysis: label only", &q, Perspective::Cognitive);
        assert_eq!(v.answer_code, Some(3));
    }

    #[test]
    fn invalid_codes_fail_to_parse() {
        let q = question();
        let v = parse_verdict("I think option 7", &q, Perspective::Cognitive);
        assert!(!v.parse_ok);
        assert_eq!(v.answer_code, None);
        assert_eq!(v.raw_text, "I think option 7");

        let v = parse_verdict("Answer: 9\nAnalysis: out of range", &q, Perspective::Cognitive);
        assert!(!v.parse_ok);
    }

    #[test]
    fn the_last_valid_answer_line_wins() {
        let q = question();
        let raw = "Answer: 1\nLet me reconsider the tradeoffs.\nAnswer: 4\nAnalysis: settled";
        let v = parse_verdict(raw, &q, Perspective::Cognitive);
        assert_eq!(v.answer_code, Some(4));
        // A trailing invalid answer line does not erase an earlier valid one.
        let raw = "Answer: 2\nAnswer: 77";
        let v = parse_verdict(raw, &q, Perspective::Cognitive);
        assert_eq!(v.answer_code, Some(2));
    }

    #[test]
    fn parse_round_trips_rendered_verdicts() {
        let q = question();
        for code in 1..=4 {
            let raw = render_verdict_reply(code, "some analysis text");
            let v = parse_verdict(&raw, &q, Perspective::Affective);
            assert!(v.parse_ok);
            assert_eq!(v.answer_code, Some(code));
            assert_eq!(v.analysis, "some analysis text");
        }
    }

    fn scripted_gateway(rules: Vec<MockRule>) -> (Gateway, Arc<MockChat>) {
        let chat = Arc::new(MockChat::from_script(MockScript { rules }).unwrap());
        let gateway = Gateway::new(
            chat.clone(),
            Arc::new(MockEmbed::default()),
            None,
            GatewayOptions::default(),
        );
        (gateway, chat)
    }

    fn tutorial_rule(p: Perspective, response: &str) -> MockRule {
        // Key on a distinctive phrase of each tutorial.
        let needle = match p {
            Perspective::Cognitive => "cognitive dimensions",
            Perspective::Affective => "affective dimensions",
            Perspective::Behavioral => "behavioral dimensions",
        };
        MockRule {
            on: MatchKind::Regex,
            pattern: needle.to_string(),
            response: response.to_string(),
        }
    }

    #[test]
    fn run_perspectives_keeps_canonical_order() {
        let q = question();
        let (gateway, chat) = scripted_gateway(vec![
            tutorial_rule(Perspective::Cognitive, "Answer: 1\nAnalysis: c"),
            tutorial_rule(Perspective::Affective, "Answer: 2\nAnalysis: a"),
            tutorial_rule(Perspective::Behavioral, "Answer: 3\nAnalysis: b"),
        ]);
        let verdicts = run_perspectives(&gateway, "m", "context", &q).unwrap();
        assert_eq!(verdicts[0].perspective, Perspective::Cognitive);
        assert_eq!(verdicts[0].answer_code, Some(1));
        assert_eq!(verdicts[1].perspective, Perspective::Affective);
        assert_eq!(verdicts[1].answer_code, Some(2));
        assert_eq!(verdicts[2].perspective, Perspective::Behavioral);
        assert_eq!(verdicts[2].answer_code, Some(3));
        assert_eq!(chat.call_count(), 3);
    }

    #[test]
    fn malformed_reply_is_reasked_then_abstains() {
        let q = question();
        let (gateway, chat) = scripted_gateway(vec![
            tutorial_rule(Perspective::Cognitive, "no structured answer here"),
            tutorial_rule(Perspective::Affective, "Answer: 2\nAnalysis: fine"),
            tutorial_rule(Perspective::Behavioral, "Answer: 2\nAnalysis: fine"),
        ]);
        let verdicts = run_perspectives(&gateway, "m", "context", &q).unwrap();
        assert!(!verdicts[0].parse_ok);
        assert_eq!(verdicts[0].answer_slot(), "abstain");
        assert_eq!(verdicts[0].analysis_slot(), "no structured answer here");
        assert!(verdicts[1].parse_ok && verdicts[2].parse_ok);
        // Without a cache the malformed perspective is asked twice.
        assert_eq!(chat.call_count(), 4);
    }

    #[test]
    fn tutorials_are_nonempty_and_distinct() {
        let tutorials: Vec<&str> = Perspective::ALL.iter().map(|p| p.tutorial()).collect();
        for t in &tutorials {
            assert!(t.contains("- "));
            assert!(t.len() > 100);
        }
        assert_ne!(tutorials[0], tutorials[1]);
        assert_ne!(tutorials[1], tutorials[2]);
    }
}
