//! Shared fixtures for the integration test targets: a synthetic corpus
//! with a deterministic answer layout, mock scripts, and a binary runner.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use valuesim::corpus::{AnswerOption, AnswerValue, Profile, QuestionBank, QuestionKind, RawQuestion, Taxonomy};

/// The synthetic 20-question bank: 8 Core (Q1..Q8), 6 Happiness (Q46..Q51),
/// 4 ordinal Trust (Q57..Q60), and 2 nominal Trust (Q61, Q62) questions.
/// Ordinal questions have four options, nominal ones three.
pub fn fixture_raw_questions() -> Vec<RawQuestion> {
    let mut raw = Vec::new();
    let ordinal = |id: String, text: String| RawQuestion {
        id,
        text,
        options: (1..=4)
            .map(|c| AnswerOption {
                code: c,
                label: format!("Level {c}"),
            })
            .collect(),
        kind: QuestionKind::MultipleChoiceOrdinal,
    };
    for i in 1..=8 {
        raw.push(ordinal(format!("Q{i}"), format!("Core value statement {i}?")));
    }
    for i in 46..=51 {
        raw.push(ordinal(format!("Q{i}"), format!("Happiness statement {i}?")));
    }
    for i in 57..=60 {
        raw.push(ordinal(format!("Q{i}"), format!("Trust statement {i}?")));
    }
    for i in 61..=62 {
        raw.push(RawQuestion {
            id: format!("Q{i}"),
            text: format!("Group membership {i}?"),
            options: vec![
                AnswerOption { code: 1, label: "Member".to_string() },
                AnswerOption { code: 2, label: "Inactive member".to_string() },
                AnswerOption { code: 3, label: "Not a member".to_string() },
            ],
            kind: QuestionKind::MultipleChoiceNominal,
        });
    }
    raw
}

pub fn fixture_bank() -> QuestionBank {
    QuestionBank::build(fixture_raw_questions(), &Taxonomy::builtin()).unwrap()
}

/// The respondent's true answer for a question: a fixed formula over the
/// respondent number and the question's ordinal index, so oracle code can
/// recompute it independently.
pub fn true_code_for(respondent: usize, ordinal_index: u32, n_options: usize) -> i64 {
    ((respondent + 2 * ordinal_index as usize) % n_options) as i64 + 1
}

/// The scripted prediction for a question under the fixture mock script.
pub fn scripted_prediction(ordinal_index: u32, n_options: usize) -> i64 {
    (ordinal_index as usize % n_options) as i64 + 1
}

/// Profiles r0..r{n-1}, every question answered via [`true_code_for`].
pub fn fixture_profiles(bank: &QuestionBank, n: usize) -> Vec<Profile> {
    (0..n)
        .map(|r| {
            let answers = bank
                .iter()
                .map(|q| {
                    (
                        q.id.clone(),
                        AnswerValue::Code(true_code_for(r, q.ordinal_index, q.options.len())),
                    )
                })
                .collect();
            Profile::build(format!("r{r}"), answers, bank).unwrap()
        })
        .collect()
}

/// Mock rules that pin the coordinator reply for every fixture question to
/// [`scripted_prediction`]; every other prompt (backstory, perspectives)
/// falls back to the default parseable reply.
pub fn fixture_script_json(bank: &QuestionBank) -> String {
    let rules: Vec<serde_json::Value> = bank
        .iter()
        .map(|q| {
            serde_json::json!({
                "on": "regex",
                "pattern": format!(r"(?s)^You are a coordinator.*\[{}\]", q.id),
                "response": format!(
                    "Answer: {}\nAnalysis: scripted verdict",
                    scripted_prediction(q.ordinal_index, q.options.len())
                ),
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "rules": rules })).unwrap()
}

/// Write the fixture corpus (bank JSONL, profiles JSONL, coordinator script)
/// into `dir`; returns (bank_path, profiles_path, script_path).
pub fn write_fixture_files(dir: &Path, n_respondents: usize) -> (PathBuf, PathBuf, PathBuf) {
    let bank = fixture_bank();

    let bank_path = dir.join("bank.jsonl");
    let mut bank_lines = String::new();
    for q in fixture_raw_questions() {
        let kind = match q.kind {
            QuestionKind::MultipleChoiceOrdinal => "multiple_choice_ordinal",
            QuestionKind::MultipleChoiceNominal => "multiple_choice_nominal",
            QuestionKind::FillIn => "fill_in",
        };
        bank_lines.push_str(
            &serde_json::json!({
                "id": q.id,
                "text": q.text,
                "options": q.options,
                "kind": kind,
            })
            .to_string(),
        );
        bank_lines.push('\n');
    }
    std::fs::write(&bank_path, bank_lines).unwrap();

    let profiles_path = dir.join("profiles.jsonl");
    let mut profile_lines = String::new();
    for r in 0..n_respondents {
        let answers: serde_json::Map<String, serde_json::Value> = bank
            .iter()
            .map(|q| {
                (
                    q.id.clone(),
                    serde_json::json!(true_code_for(r, q.ordinal_index, q.options.len())),
                )
            })
            .collect();
        profile_lines.push_str(
            &serde_json::json!({ "respondent_id": format!("r{r}"), "answers": answers })
                .to_string(),
        );
        profile_lines.push('\n');
    }
    std::fs::write(&profiles_path, profile_lines).unwrap();

    let script_path = dir.join("script.json");
    std::fs::write(&script_path, fixture_script_json(&bank)).unwrap();

    (bank_path, profiles_path, script_path)
}

/// Run the compiled binary with the given arguments.
pub fn run_binary(args: &[&str]) -> Output {
    run_binary_with_env(args, &[])
}

/// Like [`run_binary`], with extra `VALUESIM_*` variables set for the child.
pub fn run_binary_with_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut command = Command::new(env!("CARGO_BIN_EXE_valuesim"));
    command
        .args(args)
        .env_remove("VALUESIM_BANK")
        .env_remove("VALUESIM_PROFILES")
        .env_remove("VALUESIM_BACKEND")
        .env_remove("VALUESIM_MOCK_SCRIPT")
        .env_remove("RUST_LOG");
    for (key, value) in envs {
        command.env(key, value);
    }
    command.output().expect("binary runs")
}
