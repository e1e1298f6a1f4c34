//! Command-line surface: subcommand dispatch over the resolved
//! configuration. Kept in the library so the plumbing is unit-testable; the
//! binary is a thin wrapper that maps errors to exit codes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{self, BackendKind, PartialConfig, RunConfig};
use crate::corpus::{make_folds, QuestionBank};
use crate::error::{Error, Result};
use crate::eval::experiment::{
    ablation_experiment, main_experiment, prepare_fold_backstories, run_method, scale_experiment,
    sample_respondents, ComparisonOutcome, Dataset,
};
use crate::eval::report::{
    comparison_csv, render_comparison_tables, render_significance, scale_csv,
};
use crate::eval::{aggregate, EvalReport, MethodTag};
use crate::rundir::{Manifest, RunDir};

#[derive(Debug, Parser)]
#[command(
    name = "valuesim",
    version,
    about = "Survey persona simulation harness",
    long_about = "Generates second-person backstories from survey profiles, simulates answers \
                  to held-out questions through cognitive/affective/behavioral perspectives \
                  with coordinator synthesis, and evaluates against baselines."
)]
pub struct Cli {
    /// TOML config file (flags override it; it overrides VALUESIM_* env vars).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

/// Flag-level settings; every one is optional and shadows the config file
/// and environment layers.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Question bank JSON file.
    #[arg(long, global = true, value_name = "PATH")]
    pub bank: Option<PathBuf>,
    /// Respondent profiles JSONL file.
    #[arg(long, global = true, value_name = "PATH")]
    pub profiles: Option<PathBuf>,
    /// Completion/embedding cache directory (omit to disable caching).
    #[arg(long, global = true, value_name = "PATH")]
    pub cache_dir: Option<PathBuf>,
    /// Run directory for manifests, backstories, records, and reports.
    #[arg(long, global = true, value_name = "PATH")]
    pub run_dir: Option<PathBuf>,
    /// Chat model identifier.
    #[arg(long, global = true, value_name = "ID")]
    pub model: Option<String>,
    /// Embedding model identifier.
    #[arg(long, global = true, value_name = "ID")]
    pub embedding_model: Option<String>,
    /// Seed for folds, sampling, and subsetting.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cross-validation fold count.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Comma-separated method list for `experiment main`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "METHOD,...")]
    pub methods: Option<Vec<String>>,
    /// Comma-separated profile sizes for `experiment scale`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "N,...")]
    pub scale_steps: Option<Vec<usize>>,
    /// Respondent sample size (omit to use every profile).
    #[arg(long, global = true, value_name = "N")]
    pub sample: Option<usize>,
    /// Retrieved segments per RAG prompt.
    #[arg(long, global = true, value_name = "N")]
    pub rag_k: Option<usize>,
    /// Worker threads for record production.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Backend: 'live' (VALUESIM_API_BASE/VALUESIM_API_KEY) or 'mock'.
    #[arg(long, global = true)]
    pub backend: Option<BackendKind>,
    /// Mock backend script file (JSON rule list).
    #[arg(long, global = true, value_name = "PATH")]
    pub script: Option<PathBuf>,
}

impl Overrides {
    fn into_partial(self) -> PartialConfig {
        PartialConfig {
            bank: self.bank,
            profiles: self.profiles,
            cache_dir: self.cache_dir,
            run_dir: self.run_dir,
            model: self.model,
            embedding_model: self.embedding_model,
            seed: self.seed,
            folds: self.folds,
            methods: self.methods,
            scale_steps: self.scale_steps,
            sample: self.sample,
            rag_k: self.rag_k,
            workers: self.workers,
            backend: self.backend,
            mock_script: self.script,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the corpus and print its shape.
    Ingest,
    /// Generate backstories for one fold's training split.
    Backstory {
        /// Fold whose training split feeds the narratives.
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Produce simulation records for one method on one fold.
    Simulate {
        /// Method tag (e.g. valuesim, full_info, rag, chance, no_story).
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Aggregate persisted records and print the report tables.
    Evaluate,
    /// Run a full experiment and write records plus reports.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentKind,
    },
    /// Re-render report files from persisted records.
    Report,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum ExperimentKind {
    /// The full pipeline against the Full Info, RAG, and chance baselines.
    Main,
    /// The full pipeline against its component-removal ablations.
    Ablation,
    /// The profile-scale sweep over the configured steps.
    Scale,
}

impl ExperimentKind {
    fn label(self) -> &'static str {
        match self {
            ExperimentKind::Main => "main",
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::Scale => "scale",
        }
    }
}

/// Dispatch a parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let config = config::resolve(cli.overrides.into_partial(), cli.config.as_deref())?;
    match cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Backstory { fold } => cmd_backstory(&config, fold),
        Command::Simulate { method, fold } => cmd_simulate(&config, &method, fold),
        Command::Evaluate => cmd_evaluate(&config, false),
        Command::Report => cmd_evaluate(&config, true),
        Command::Experiment { kind } => cmd_experiment(&config, kind),
    }
}

fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let dataset = Dataset::load(&config.bank, &config.profiles)?;
    let bank = &dataset.bank;
    let n_mc = bank.multiple_choice_ids().len();
    println!(
        "questions: {} ({} multiple choice, {} fill-in)",
        bank.len(),
        n_mc,
        bank.len() - n_mc
    );
    let mut per_dimension: BTreeMap<&str, usize> = BTreeMap::new();
    for question in bank.iter() {
        *per_dimension.entry(question.dimension.name()).or_default() += 1;
    }
    for (name, count) in per_dimension {
        println!("  {name}: {count}");
    }
    let counts: Vec<usize> = dataset.profiles.iter().map(|p| p.size()).collect();
    println!("respondents: {}", dataset.profiles.len());
    println!(
        "answers: total {}, per respondent min {} / max {}",
        counts.iter().sum::<usize>(),
        counts.iter().min().copied().unwrap_or(0),
        counts.iter().max().copied().unwrap_or(0)
    );
    Ok(())
}

fn fold_for(bank: &QuestionBank, config: &RunConfig, fold_index: usize) -> Result<crate::corpus::Fold> {
    let ids: Vec<String> = bank.iter().map(|q| q.id.clone()).collect();
    let folds = make_folds(&ids, config.folds, config.seed)?;
    folds.into_iter().nth(fold_index).ok_or_else(|| {
        Error::Config(format!(
            "fold {fold_index} out of range for a {}-fold split",
            config.folds
        ))
    })
}

fn run_profiles(dataset: &Dataset, config: &RunConfig) -> Result<Vec<crate::corpus::Profile>> {
    match config.sample {
        Some(n) => sample_respondents(&dataset.profiles, n, config.seed),
        None => Ok(dataset.profiles.clone()),
    }
}

fn cmd_backstory(config: &RunConfig, fold_index: usize) -> Result<()> {
    let dataset = Dataset::load(&config.bank, &config.profiles)?;
    let fold = fold_for(&dataset.bank, config, fold_index)?;
    let profiles = run_profiles(&dataset, config)?;
    let gateway = config.build_gateway()?;
    let run = RunDir::create(&config.run_dir)?;
    let manifest = Manifest::started(
        config.seed,
        &config.model,
        &config.embedding_model,
        config.as_manifest_json()?,
    );
    run.write_manifest(&manifest)?;

    let exp = config.experiment_config();
    let assets = prepare_fold_backstories(&dataset, &profiles, &fold, &exp, &gateway)?;
    run.write_backstories(fold_index, &assets)?;
    run.write_manifest(&manifest.completed(gateway.stats()))?;

    println!(
        "backstories: {} of {} respondents (fold {fold_index})",
        assets.backstories.len(),
        profiles.len()
    );
    for (respondent_id, fidelity) in &assets.fidelity {
        println!(
            "  {respondent_id}: coverage {:.3} ({} of {} items preserved)",
            fidelity.coverage, fidelity.matched_items, fidelity.total_items
        );
    }
    println!("written to {}", run.root().display());
    Ok(())
}

fn cmd_simulate(config: &RunConfig, method_name: &str, fold_index: usize) -> Result<()> {
    let method = MethodTag::parse(method_name).ok_or_else(|| {
        let known: Vec<&str> = MethodTag::ALL.iter().map(|m| m.label()).collect();
        Error::Config(format!(
            "unknown method '{method_name}' (known: {})",
            known.join(", ")
        ))
    })?;
    let dataset = Dataset::load(&config.bank, &config.profiles)?;
    let fold = fold_for(&dataset.bank, config, fold_index)?;
    let profiles = run_profiles(&dataset, config)?;
    let gateway = config.build_gateway()?;
    let run = RunDir::create(&config.run_dir)?;
    let manifest = Manifest::started(
        config.seed,
        &config.model,
        &config.embedding_model,
        config.as_manifest_json()?,
    );
    run.write_manifest(&manifest)?;

    let exp = config.experiment_config();
    let assets = if method.needs_backstory() {
        let assets = prepare_fold_backstories(&dataset, &profiles, &fold, &exp, &gateway)?;
        run.write_backstories(fold_index, &assets)?;
        assets
    } else {
        Default::default()
    };
    let records = run_method(
        method,
        &dataset,
        &profiles,
        &fold,
        &assets.backstories,
        &exp,
        &gateway,
    )?;
    run.write_records(method, &records)?;
    run.write_manifest(&manifest.completed(gateway.stats()))?;
    println!(
        "{}: {} records on fold {fold_index}, written to {}",
        method.label(),
        records.len(),
        run.root().display()
    );
    Ok(())
}

/// Aggregate persisted records; optionally also write rendered report files.
fn cmd_evaluate(config: &RunConfig, write_files: bool) -> Result<()> {
    let bank = QuestionBank::load(&config.bank)?;
    let run = RunDir::create(&config.run_dir)?;
    let by_method = run.read_all_records()?;
    let mut reports: Vec<EvalReport> = Vec::with_capacity(by_method.len());
    for records in by_method.values() {
        reports.push(aggregate(records, &bank)?);
    }
    let tables = render_comparison_tables(&config.model, &reports);
    let significance = render_significance(&reports);
    print!("{tables}");
    println!();
    print!("{significance}");
    if write_files {
        let csv = comparison_csv(&config.model, &reports);
        run.write_report("report_tables.txt", &tables)?;
        run.write_report("report.csv", &csv)?;
        run.write_report("report_significance.txt", &significance)?;
        println!("reports written to {}", run.reports_dir().display());
    }
    Ok(())
}

fn write_comparison_reports(
    run: &RunDir,
    config: &RunConfig,
    kind: ExperimentKind,
    outcome: &ComparisonOutcome,
) -> Result<String> {
    for (fold_index, assets) in &outcome.backstories {
        run.write_backstories(*fold_index, assets)?;
    }
    let mut reports = Vec::with_capacity(outcome.methods.len());
    for m in &outcome.methods {
        run.write_records(m.method, &m.records)?;
        reports.push(m.report.clone());
    }
    let tables = render_comparison_tables(&config.model, &reports);
    let csv = comparison_csv(&config.model, &reports);
    let significance = render_significance(&reports);
    run.write_report(&format!("{}_tables.txt", kind.label()), &tables)?;
    run.write_report(&format!("{}_report.csv", kind.label()), &csv)?;
    run.write_report(&format!("{}_significance.txt", kind.label()), &significance)?;
    Ok(format!("{tables}\n{significance}"))
}

fn cmd_experiment(config: &RunConfig, kind: ExperimentKind) -> Result<()> {
    let dataset = Dataset::load(&config.bank, &config.profiles)?;
    let gateway = config.build_gateway()?;
    let run = RunDir::create(&config.run_dir)?;
    let manifest = Manifest::started(
        config.seed,
        &config.model,
        &config.embedding_model,
        config.as_manifest_json()?,
    );
    run.write_manifest(&manifest)?;

    let exp = config.experiment_config();
    let rendered = match kind {
        ExperimentKind::Main => {
            let outcome = main_experiment(&dataset, &exp, &gateway)?;
            write_comparison_reports(&run, config, kind, &outcome)?
        }
        ExperimentKind::Ablation => {
            let outcome = ablation_experiment(&dataset, &exp, &gateway)?;
            write_comparison_reports(&run, config, kind, &outcome)?
        }
        ExperimentKind::Scale => {
            let outcome = scale_experiment(&dataset, &exp, &gateway)?;
            let rows: Vec<(usize, &EvalReport)> =
                outcome.iter().map(|s| (s.step, &s.report)).collect();
            let csv = scale_csv(&rows);
            run.write_report("scale.csv", &csv)?;
            csv
        }
    };
    run.write_manifest(&manifest.completed(gateway.stats()))?;
    print!("{rendered}");
    println!("reports written to {}", run.reports_dir().display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_global_flags_after_the_subcommand() {
        let cli = Cli::try_parse_from([
            "valuesim",
            "experiment",
            "main",
            "--backend",
            "mock",
            "--script",
            "rules.json",
            "--bank",
            "bank.json",
            "--profiles",
            "profiles.jsonl",
            "--methods",
            "valuesim,chance",
        ])
        .unwrap();
        assert_eq!(cli.overrides.backend, Some(BackendKind::Mock));
        assert_eq!(
            cli.overrides.methods,
            Some(vec!["valuesim".to_string(), "chance".to_string()])
        );
        assert!(matches!(
            cli.command,
            Command::Experiment {
                kind: ExperimentKind::Main
            }
        ));
    }

    #[test]
    fn unknown_subcommands_fail_to_parse() {
        assert!(Cli::try_parse_from(["valuesim", "astonish"]).is_err());
        assert!(Cli::try_parse_from(["valuesim", "simulate", "--no-such-flag"]).is_err());
    }

    #[test]
    fn simulate_requires_a_method_flag() {
        assert!(Cli::try_parse_from(["valuesim", "simulate"]).is_err());
        let cli =
            Cli::try_parse_from(["valuesim", "simulate", "--method", "rag", "--fold", "2"])
                .unwrap();
        match cli.command {
            Command::Simulate { method, fold } => {
                assert_eq!(method, "rag");
                assert_eq!(fold, 2);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
