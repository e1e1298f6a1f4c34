//! Experiment drivers: per-method record production over cross-validation
//! folds, the main/ablation comparisons, and the profile-scale sweep.
//!
//! Record production is parallel across (respondent, question) pairs through
//! a bounded worker pool; everything downstream of the records is a
//! deterministic sequential fold.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::baselines::{direct_prompt_answer, index_entries_for, rag_answer};
use crate::cab::{run_perspective_subset, Perspective};
use crate::corpus::{
    chance_records, make_folds, sample_profile_subset, Fold, Profile, Question, QuestionBank,
    QuestionKind,
};
use crate::error::{Error, Result};
use crate::eval::{aggregate, EvalReport, MethodTag, Prediction, SimulationRecord};
use crate::gateway::Gateway;
use crate::integrate::{average_integrate, coordinate, FinalAnswer};
use crate::parallel::parallel_map;
use crate::retrieval::{build_index_cached, VectorIndex};
use crate::story::{fidelity_check, generate_backstory, serialize_profile, Backstory, FidelityReport};

/// The question bank plus the respondent profiles it scores against.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub bank: QuestionBank,
    pub profiles: Vec<Profile>,
}

impl Dataset {
    pub fn load(bank_path: &Path, profiles_path: &Path) -> Result<Dataset> {
        let bank = QuestionBank::load(bank_path)?;
        let profiles = crate::corpus::load_profiles(profiles_path, &bank)?;
        Ok(Dataset { bank, profiles })
    }
}

/// Everything a run needs beyond the dataset itself. The seed fixes fold
/// assignment, respondent sampling, and profile subsetting; the respondent
/// sample is drawn once per run so every method sees the same people.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model_id: String,
    pub embedding_model_id: String,
    pub seed: u64,
    pub folds: usize,
    pub methods: Vec<MethodTag>,
    pub respondent_sample: Option<usize>,
    pub scale_steps: Vec<usize>,
    pub rag_k: usize,
    pub workers: usize,
    pub index_cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> ExperimentConfig {
        ExperimentConfig {
            model_id: "model".to_string(),
            embedding_model_id: "embedding-model".to_string(),
            seed: 7,
            folds: 5,
            methods: MAIN_METHODS.to_vec(),
            respondent_sample: None,
            scale_steps: vec![0, 58, 116, 174, 232],
            rag_k: 3,
            workers: 8,
            index_cache_dir: None,
        }
    }
}

/// The main comparison roster.
pub const MAIN_METHODS: [MethodTag; 4] = [
    MethodTag::ValueSim,
    MethodTag::FullInfo,
    MethodTag::Rag,
    MethodTag::Chance,
];

/// The ablation roster: the full pipeline plus each component removal.
pub const ABLATION_METHODS: [MethodTag; 7] = [
    MethodTag::ValueSim,
    MethodTag::NoStory,
    MethodTag::NoCab,
    MethodTag::AvgIntegrate,
    MethodTag::DropCognitive,
    MethodTag::DropAffective,
    MethodTag::DropBehavioral,
];

/// Backstories (and their fidelity reports) generated for one fold's
/// training split, shared by every backstory-consuming method in the run.
#[derive(Debug, Clone, Default)]
pub struct FoldBackstories {
    pub backstories: BTreeMap<String, Backstory>,
    pub fidelity: BTreeMap<String, FidelityReport>,
}

/// One method's records and aggregate report over all folds.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: MethodTag,
    pub records: Vec<SimulationRecord>,
    pub report: EvalReport,
}

/// A finished comparison run.
#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub methods: Vec<MethodOutcome>,
    pub folds: Vec<Fold>,
    /// fold index → per-respondent backstories (empty map when no method
    /// needed them).
    pub backstories: BTreeMap<usize, FoldBackstories>,
}

/// One step of the profile-scale sweep.
#[derive(Debug, Clone)]
pub struct ScaleStepOutcome {
    pub step: usize,
    pub report: EvalReport,
    pub records: Vec<SimulationRecord>,
}

fn derive_sample_seed(seed: u64, n: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"respondent-sample");
    hasher.update(seed.to_le_bytes());
    hasher.update((n as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Draw the run's respondent sample: sort ids, shuffle with a seed-derived
/// generator, take `n`, and restore id order. Every method in the run sees
/// exactly this sample.
pub fn sample_respondents(profiles: &[Profile], n: usize, seed: u64) -> Result<Vec<Profile>> {
    if n == 0 {
        return Err(Error::Config(
            "respondent sample size must be at least 1".to_string(),
        ));
    }
    if n > profiles.len() {
        return Err(Error::Config(format!(
            "respondent sample size {n} exceeds the {} loaded profiles",
            profiles.len()
        )));
    }
    let mut sorted: Vec<&Profile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.respondent_id.cmp(&b.respondent_id));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_sample_seed(seed, n));
    sorted.shuffle(&mut rng);
    let mut chosen: Vec<Profile> = sorted.into_iter().take(n).cloned().collect();
    chosen.sort_by(|a, b| a.respondent_id.cmp(&b.respondent_id));
    Ok(chosen)
}

/// The fold's test questions that are prediction targets: multiple choice,
/// ascending ordinal order.
fn eligible_test_questions<'a>(bank: &'a QuestionBank, fold: &Fold) -> Vec<&'a Question> {
    bank.iter()
        .filter(|q| q.kind.is_multiple_choice() && fold.test_question_ids.contains(&q.id))
        .collect()
}

/// Generate backstories for every respondent from the fold's training split.
/// Respondents whose generation fails are logged and left out of the map;
/// configuration errors abort the run.
pub fn prepare_fold_backstories(
    dataset: &Dataset,
    profiles: &[Profile],
    fold: &Fold,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<FoldBackstories> {
    let results = parallel_map(
        profiles.to_vec(),
        config.workers,
        |profile| -> Result<(String, Option<(Backstory, FidelityReport)>)> {
            let training = profile.restrict_to(&fold.train_question_ids);
            match generate_backstory(&training, &dataset.bank, gateway, &config.model_id) {
                Ok(backstory) => {
                    let fidelity = fidelity_check(&backstory, &training, &dataset.bank);
                    Ok((profile.respondent_id.clone(), Some((backstory, fidelity))))
                }
                Err(Error::Provider(note)) | Err(Error::Transport(note)) => {
                    log::warn!(
                        "no backstory for respondent '{}' in fold {}: {note}",
                        profile.respondent_id,
                        fold.fold_index
                    );
                    Ok((profile.respondent_id.clone(), None))
                }
                Err(e) => Err(e),
            }
        },
    )?;
    let mut out = FoldBackstories::default();
    for (respondent_id, produced) in results {
        if let Some((backstory, fidelity)) = produced {
            out.backstories.insert(respondent_id.clone(), backstory);
            out.fidelity.insert(respondent_id, fidelity);
        }
    }
    Ok(out)
}

/// What one respondent brings to record production under a given method.
enum RespondentAsset {
    /// Context text for the perspective prompts (backstory narrative, or raw
    /// profile text under the story ablation).
    Context(String),
    /// Profile text for the direct prompt shape (serialized training profile
    /// for Full Info, backstory narrative for the no-CAB ablation).
    ProfileText(String),
    /// Retrieval index over the respondent's own training items.
    Index(Arc<VectorIndex>),
}

fn build_asset(
    method: MethodTag,
    dataset: &Dataset,
    profile: &Profile,
    fold: &Fold,
    backstories: &BTreeMap<String, Backstory>,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<Option<RespondentAsset>> {
    let skip = |why: &str| {
        log::warn!(
            "skipping respondent '{}' for {} in fold {}: {why}",
            profile.respondent_id,
            method.label(),
            fold.fold_index
        );
        Ok(None)
    };
    if method.needs_backstory() {
        let Some(backstory) = backstories.get(&profile.respondent_id) else {
            return skip("missing backstory");
        };
        let narrative = backstory.narrative.clone();
        return Ok(Some(if method == MethodTag::NoCab {
            RespondentAsset::ProfileText(narrative)
        } else {
            RespondentAsset::Context(narrative)
        }));
    }
    let training = profile.restrict_to(&fold.train_question_ids);
    match method {
        MethodTag::NoStory => {
            let text = serialize_profile(&training, &dataset.bank)?.text;
            if text.is_empty() {
                return skip("no training answers to use as perspective context");
            }
            Ok(Some(RespondentAsset::Context(text)))
        }
        MethodTag::FullInfo => {
            let text = serialize_profile(&training, &dataset.bank)?.text;
            Ok(Some(RespondentAsset::ProfileText(text)))
        }
        MethodTag::Rag => {
            let entries = index_entries_for(&training, &dataset.bank)?;
            if entries.is_empty() {
                return skip("no training answers to index");
            }
            let index = build_index_cached(
                gateway,
                &config.embedding_model_id,
                &entries,
                config.index_cache_dir.as_deref(),
            )?;
            Ok(Some(RespondentAsset::Index(Arc::new(index))))
        }
        _ => unreachable!("backstory-consuming and analytic methods handled above"),
    }
}

fn simulate_one(
    method: MethodTag,
    asset: &RespondentAsset,
    question: &Question,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<FinalAnswer> {
    match (method, asset) {
        (MethodTag::ValueSim | MethodTag::NoStory, RespondentAsset::Context(context)) => {
            let verdicts =
                run_perspective_subset(gateway, &config.model_id, context, question, &Perspective::ALL)?;
            coordinate(gateway, &config.model_id, question, verdicts, method)
        }
        (MethodTag::AvgIntegrate, RespondentAsset::Context(context)) => {
            let verdicts =
                run_perspective_subset(gateway, &config.model_id, context, question, &Perspective::ALL)?;
            if question.kind == QuestionKind::MultipleChoiceOrdinal {
                average_integrate(question, verdicts)
            } else {
                // Averaging category codes is undefined, so on nominal scales
                // this ablation abstains (scored as incorrect) instead of
                // inventing an arithmetic for them.
                Ok(FinalAnswer {
                    question_id: question.id.clone(),
                    answer_code: None,
                    method,
                    integration_analysis: String::new(),
                    component_verdicts: verdicts,
                })
            }
        }
        (
            MethodTag::DropCognitive | MethodTag::DropAffective | MethodTag::DropBehavioral,
            RespondentAsset::Context(context),
        ) => {
            let kept: Vec<Perspective> = Perspective::ALL
                .into_iter()
                .filter(|p| match method {
                    MethodTag::DropCognitive => *p != Perspective::Cognitive,
                    MethodTag::DropAffective => *p != Perspective::Affective,
                    MethodTag::DropBehavioral => *p != Perspective::Behavioral,
                    _ => unreachable!(),
                })
                .collect();
            let verdicts =
                run_perspective_subset(gateway, &config.model_id, context, question, &kept)?;
            coordinate(gateway, &config.model_id, question, verdicts, method)
        }
        (MethodTag::FullInfo | MethodTag::NoCab, RespondentAsset::ProfileText(text)) => {
            direct_prompt_answer(gateway, &config.model_id, text, question, method)
        }
        (MethodTag::Rag, RespondentAsset::Index(index)) => rag_answer(
            gateway,
            &config.model_id,
            &config.embedding_model_id,
            index,
            question,
            config.rag_k,
        ),
        _ => Err(Error::Config(format!(
            "method {} received a mismatched respondent asset",
            method.label()
        ))),
    }
}

/// Produce exactly one record per (respondent, eligible answered test
/// question) for one method over one fold. The chance method is analytic
/// and makes no gateway calls; every other method routes through the
/// gateway with record production parallel across (respondent, question).
pub fn run_method(
    method: MethodTag,
    dataset: &Dataset,
    profiles: &[Profile],
    fold: &Fold,
    backstories: &BTreeMap<String, Backstory>,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<Vec<SimulationRecord>> {
    let questions = eligible_test_questions(&dataset.bank, fold);
    if method == MethodTag::Chance {
        let test_ids = questions.iter().map(|q| q.id.clone()).collect();
        return chance_records(&dataset.bank, profiles, &test_ids, fold.fold_index);
    }

    let mut assets: BTreeMap<String, Arc<RespondentAsset>> = BTreeMap::new();
    for profile in profiles {
        if let Some(asset) =
            build_asset(method, dataset, profile, fold, backstories, config, gateway)?
        {
            assets.insert(profile.respondent_id.clone(), Arc::new(asset));
        }
    }

    struct Task {
        respondent_id: String,
        asset: Arc<RespondentAsset>,
        question_id: String,
        true_code: i64,
    }
    let mut tasks = Vec::new();
    for profile in profiles {
        let Some(asset) = assets.get(&profile.respondent_id) else {
            continue;
        };
        for question in &questions {
            let Some(true_code) = profile.answer_code(&question.id) else {
                continue;
            };
            tasks.push(Task {
                respondent_id: profile.respondent_id.clone(),
                asset: asset.clone(),
                question_id: question.id.clone(),
                true_code,
            });
        }
    }

    parallel_map(tasks, config.workers, |task| {
        let question = dataset
            .bank
            .get(&task.question_id)
            .expect("task ids come from the bank");
        let answer = simulate_one(method, &task.asset, question, config, gateway)?;
        Ok(SimulationRecord {
            respondent_id: task.respondent_id,
            question_id: task.question_id,
            method,
            predicted: match answer.answer_code {
                Some(code) => Prediction::Code(code),
                None => Prediction::Unanswerable,
            },
            true_code: task.true_code,
            fold_index: fold.fold_index,
        })
    })
}

/// All question ids in the bank, ascending ordinal order; folds partition
/// this full set, and per-fold eligibility narrows test records to
/// multiple-choice answered items.
fn all_question_ids(bank: &QuestionBank) -> Vec<String> {
    bank.iter().map(|q| q.id.clone()).collect()
}

/// Run a method roster over every fold and aggregate per method.
pub fn comparison_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
    gateway: &Gateway,
    methods: &[MethodTag],
) -> Result<ComparisonOutcome> {
    if methods.is_empty() {
        return Err(Error::Config("no methods selected".to_string()));
    }
    let profiles = match config.respondent_sample {
        Some(n) => sample_respondents(&dataset.profiles, n, config.seed)?,
        None => dataset.profiles.clone(),
    };
    let folds = make_folds(&all_question_ids(&dataset.bank), config.folds, config.seed)?;
    let needs_backstories = methods.iter().any(|m| m.needs_backstory());

    let mut backstories: BTreeMap<usize, FoldBackstories> = BTreeMap::new();
    let mut per_method: BTreeMap<MethodTag, Vec<SimulationRecord>> = BTreeMap::new();
    for fold in &folds {
        let fold_backstories = if needs_backstories {
            prepare_fold_backstories(dataset, &profiles, fold, config, gateway)?
        } else {
            FoldBackstories::default()
        };
        for &method in methods {
            log::info!("running {} on fold {}", method.label(), fold.fold_index);
            let records = run_method(
                method,
                dataset,
                &profiles,
                fold,
                &fold_backstories.backstories,
                config,
                gateway,
            )?;
            per_method.entry(method).or_default().extend(records);
        }
        backstories.insert(fold.fold_index, fold_backstories);
    }

    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let records = per_method.remove(&method).unwrap_or_default();
        let report = aggregate(&records, &dataset.bank)?;
        outcomes.push(MethodOutcome {
            method,
            records,
            report,
        });
    }
    Ok(ComparisonOutcome {
        methods: outcomes,
        folds,
        backstories,
    })
}

/// The main comparison: the full pipeline against its baselines (or the
/// configured method list, when one was given).
pub fn main_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<ComparisonOutcome> {
    comparison_experiment(dataset, config, gateway, &config.methods)
}

/// The ablation comparison: the full pipeline against each component removal.
pub fn ablation_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<ComparisonOutcome> {
    comparison_experiment(dataset, config, gateway, &ABLATION_METHODS)
}

/// The profile-scale sweep: at each step, restrict every respondent's
/// training items to a seeded subset of that size, regenerate backstories
/// from the subset, and run the full pipeline.
pub fn scale_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
    gateway: &Gateway,
) -> Result<Vec<ScaleStepOutcome>> {
    if config.scale_steps.is_empty() {
        return Err(Error::Config("no scale steps configured".to_string()));
    }
    let profiles = match config.respondent_sample {
        Some(n) => sample_respondents(&dataset.profiles, n, config.seed)?,
        None => dataset.profiles.clone(),
    };
    let folds = make_folds(&all_question_ids(&dataset.bank), config.folds, config.seed)?;

    let mut outcomes = Vec::with_capacity(config.scale_steps.len());
    for &step in &config.scale_steps {
        let mut records = Vec::new();
        for fold in &folds {
            let mut subsets = Vec::with_capacity(profiles.len());
            for profile in &profiles {
                subsets.push(sample_profile_subset(
                    profile,
                    &fold.train_question_ids,
                    step,
                    config.seed,
                )?);
            }
            // Each subset profile keeps its respondent id, so backstory
            // preparation and record production line up as usual; test
            // answers still come from the full profile.
            let prep_dataset = Dataset {
                bank: dataset.bank.clone(),
                profiles: subsets.clone(),
            };
            let backstories =
                prepare_fold_backstories(&prep_dataset, &subsets, fold, config, gateway)?;
            records.extend(run_method(
                MethodTag::ValueSim,
                dataset,
                &profiles,
                fold,
                &backstories.backstories,
                config,
                gateway,
            )?);
        }
        let report = aggregate(&records, &dataset.bank)?;
        log::info!(
            "scale step {step}: accuracy {:.4}, normalized MAE {}",
            report.overall.accuracy,
            report
                .overall
                .norm_mae
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "n/a".to_string())
        );
        outcomes.push(ScaleStepOutcome {
            step,
            report,
            records,
        });
    }
    Ok(outcomes)
}
