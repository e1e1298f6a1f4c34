//! Run directory layout and the run manifest.
//!
//! Every run writes its manifest before any records, so a partial run is
//! diagnosable and resumable through the completion cache: re-running with
//! the same configuration replays cached completions and continues where the
//! provider left off. The manifest is rewritten once at the end with gateway
//! cache statistics.
//!
//! Layout under the run root:
//!
//! ```text
//! manifest.json
//! backstories/fold0/<respondent>.json   one backstory + fidelity per file
//! records/<method>_fold0.jsonl          one simulation record per line
//! reports/...                           rendered tables and CSVs
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::experiment::FoldBackstories;
use crate::eval::{MethodTag, SimulationRecord};
use crate::gateway::GatewayStats;
use crate::story::{Backstory, FidelityReport};
use crate::templates;

/// What a run records about itself. Written once at start (with
/// `gateway_stats: None`, `status: "started"`) and rewritten at completion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub model_id: String,
    pub embedding_model_id: String,
    /// The fully resolved configuration the run executed with.
    pub config: serde_json::Value,
    pub template_checksums: BTreeMap<String, String>,
    pub gateway_stats: Option<GatewayStats>,
    pub status: String,
}

impl Manifest {
    /// A fresh manifest for a run that is about to start.
    pub fn started(
        seed: u64,
        model_id: &str,
        embedding_model_id: &str,
        config: serde_json::Value,
    ) -> Manifest {
        Manifest {
            seed,
            model_id: model_id.to_string(),
            embedding_model_id: embedding_model_id.to_string(),
            config,
            template_checksums: templates::CHECKSUMS
                .iter()
                .map(|(name, digest)| (name.to_string(), digest.to_string()))
                .collect(),
            gateway_stats: None,
            status: "started".to_string(),
        }
    }

    /// The same manifest, marked complete with final cache statistics.
    pub fn completed(mut self, stats: GatewayStats) -> Manifest {
        self.gateway_stats = Some(stats);
        self.status = "complete".to_string();
        self
    }
}

/// One persisted backstory file: the narrative plus its fidelity report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackstoryRecord {
    pub backstory: Backstory,
    pub fidelity: FidelityReport,
}

/// A run's on-disk home.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Create (or reuse) the run directory and its fixed substructure.
    pub fn create(root: &Path) -> Result<RunDir> {
        for sub in ["backstories", "records", "reports"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    fn write_atomic(&self, path: &Path, contents: &str) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, contents)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        let text = serde_json::to_string_pretty(manifest)?;
        self.write_atomic(&self.root.join("manifest.json"), &text)
    }

    pub fn read_manifest(&self) -> Result<Manifest> {
        let text = fs::read_to_string(self.root.join("manifest.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Persist one fold's backstories, one JSON file per respondent.
    pub fn write_backstories(&self, fold_index: usize, assets: &FoldBackstories) -> Result<()> {
        let dir = self.root.join("backstories").join(format!("fold{fold_index}"));
        fs::create_dir_all(&dir)?;
        for (respondent_id, backstory) in &assets.backstories {
            let fidelity = assets.fidelity.get(respondent_id).ok_or_else(|| {
                Error::Validation(format!(
                    "backstory for '{respondent_id}' has no fidelity report"
                ))
            })?;
            let record = BackstoryRecord {
                backstory: backstory.clone(),
                fidelity: fidelity.clone(),
            };
            let text = serde_json::to_string_pretty(&record)?;
            self.write_atomic(&dir.join(format!("{respondent_id}.json")), &text)?;
        }
        Ok(())
    }

    fn records_path(&self, method: MethodTag, fold_index: usize) -> PathBuf {
        self.root
            .join("records")
            .join(format!("{}_fold{fold_index}.jsonl", method.label()))
    }

    /// Persist one method's records as JSONL, one file per fold.
    pub fn write_records(&self, method: MethodTag, records: &[SimulationRecord]) -> Result<()> {
        let mut by_fold: BTreeMap<usize, Vec<&SimulationRecord>> = BTreeMap::new();
        for record in records {
            if record.method != method {
                return Err(Error::Validation(format!(
                    "record for '{}' tagged {} in a {} batch",
                    record.respondent_id,
                    record.method.label(),
                    method.label()
                )));
            }
            by_fold.entry(record.fold_index).or_default().push(record);
        }
        for (fold_index, fold_records) in by_fold {
            let mut text = String::new();
            for record in fold_records {
                text.push_str(&serde_json::to_string(record)?);
                text.push('\n');
            }
            self.write_atomic(&self.records_path(method, fold_index), &text)?;
        }
        Ok(())
    }

    /// Read every persisted record, grouped by method, ordered by file name
    /// within each method.
    pub fn read_all_records(&self) -> Result<BTreeMap<MethodTag, Vec<SimulationRecord>>> {
        let dir = self.root.join("records");
        let mut names: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        names.sort();
        let mut out: BTreeMap<MethodTag, Vec<SimulationRecord>> = BTreeMap::new();
        for path in names {
            let file = fs::File::open(&path)?;
            for (line_no, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: SimulationRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::Ingestion(format!(
                        "{}:{}: invalid record: {e}",
                        path.display(),
                        line_no + 1
                    ))
                })?;
                out.entry(record.method).or_default().push(record);
            }
        }
        if out.is_empty() {
            return Err(Error::Ingestion(format!(
                "no records found under {}",
                dir.display()
            )));
        }
        Ok(out)
    }

    /// Write one rendered report file under `reports/`.
    pub fn write_report(&self, file_name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.reports_dir().join(file_name);
        self.write_atomic(&path, contents)?;
        Ok(path)
    }

    /// Read one rendered report file back (for determinism checks).
    pub fn read_report(&self, file_name: &str) -> Result<String> {
        Ok(fs::read_to_string(self.reports_dir().join(file_name))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Prediction;
    use tempfile::TempDir;

    fn record(method: MethodTag, fold: usize, qid: &str) -> SimulationRecord {
        SimulationRecord {
            respondent_id: "r1".to_string(),
            question_id: qid.to_string(),
            method,
            predicted: Prediction::Code(2),
            true_code: 3,
            fold_index: fold,
        }
    }

    #[test]
    fn manifest_round_trips_and_tracks_status() {
        let tmp = TempDir::new().unwrap();
        let run = RunDir::create(tmp.path()).unwrap();
        let manifest = Manifest::started(7, "m", "e", serde_json::json!({"workers": 4}));
        run.write_manifest(&manifest).unwrap();
        let loaded = run.read_manifest().unwrap();
        assert_eq!(loaded.status, "started");
        assert_eq!(loaded.seed, 7);
        assert!(loaded.gateway_stats.is_none());
        assert_eq!(
            loaded.template_checksums.len(),
            templates::CHECKSUMS.len()
        );

        let stats = GatewayStats {
            completion_requests: 10,
            completion_cache_hits: 4,
            ..GatewayStats::default()
        };
        run.write_manifest(&loaded.completed(stats)).unwrap();
        let done = run.read_manifest().unwrap();
        assert_eq!(done.status, "complete");
        assert_eq!(done.gateway_stats.unwrap().completion_cache_hits, 4);
    }

    #[test]
    fn records_round_trip_through_jsonl_by_fold() {
        let tmp = TempDir::new().unwrap();
        let run = RunDir::create(tmp.path()).unwrap();
        let records = vec![
            record(MethodTag::ValueSim, 0, "Q1"),
            record(MethodTag::ValueSim, 1, "Q2"),
            record(MethodTag::ValueSim, 0, "Q3"),
        ];
        run.write_records(MethodTag::ValueSim, &records).unwrap();
        assert!(tmp.path().join("records/valuesim_fold0.jsonl").exists());
        assert!(tmp.path().join("records/valuesim_fold1.jsonl").exists());

        let loaded = run.read_all_records().unwrap();
        assert_eq!(loaded.len(), 1);
        let valuesim = &loaded[&MethodTag::ValueSim];
        assert_eq!(valuesim.len(), 3);
        // fold0 file sorts before fold1; within a file, write order holds.
        let qids: Vec<&str> = valuesim.iter().map(|r| r.question_id.as_str()).collect();
        assert_eq!(qids, ["Q1", "Q3", "Q2"]);
    }

    #[test]
    fn mixed_method_batches_are_rejected() {
        let tmp = TempDir::new().unwrap();
        let run = RunDir::create(tmp.path()).unwrap();
        let records = vec![
            record(MethodTag::ValueSim, 0, "Q1"),
            record(MethodTag::Rag, 0, "Q2"),
        ];
        assert!(matches!(
            run.write_records(MethodTag::ValueSim, &records),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn reading_an_empty_run_is_an_error() {
        let tmp = TempDir::new().unwrap();
        let run = RunDir::create(tmp.path()).unwrap();
        assert!(matches!(
            run.read_all_records(),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn reports_write_deterministic_bytes() {
        let tmp = TempDir::new().unwrap();
        let run = RunDir::create(tmp.path()).unwrap();
        run.write_report("tables.txt", "hello\n").unwrap();
        assert_eq!(run.read_report("tables.txt").unwrap(), "hello\n");
    }
}
