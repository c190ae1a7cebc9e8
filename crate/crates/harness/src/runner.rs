//! Experiment scheduling and record persistence.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use bbo_core::backend::{Backend, PolicyBackend, RecordingBackend, ReplayBackend};
use bbo_core::centaur::OverrideLog;
use bbo_core::mcts::TreeRow;
use bbo_core::metrics::MetricSummary;
use bbo_core::run::{run_method, Method, RunTrace, TrialRecord};
use bbo_core::seed::derive_seed;
use bbo_core::tasks::{manifest_jsonl, Family, TaskSpec};
use bbo_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BackendMode, RunConfig};
use crate::live::LiveBackend;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const IN_PROGRESS_FILE: &str = "records.inprogress.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One (task, method, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub family: Family,
    pub method: Method,
    /// Backend label used to group table rows.
    pub model: String,
    pub seed: u64,
    pub cell_seed: u64,
    pub budget: usize,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Objective evaluations actually performed.
    pub evaluations: usize,
    #[serde(default)]
    pub trials: Vec<TrialRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entropy: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tree: Vec<TreeRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
    /// Configuration that produced the record, minus `output_dir` and
    /// `parallelism` which do not affect results.
    pub config: RunConfig,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    pub fn trace(&self) -> RunTrace {
        RunTrace {
            trials: self.trials.clone(),
            entropy: self.entropy.clone(),
            overrides: self.overrides.clone(),
            tree: self.tree.clone(),
        }
    }

    /// Recomputes the metrics from the stored trajectory and compares them
    /// with the stored summary.
    pub fn verify(&self, task: &TaskSpec) -> Result<()> {
        if !self.is_ok() {
            return Ok(());
        }
        if self.trials.len() != self.budget || self.evaluations != self.budget {
            return Err(Error::ContractViolation(format!(
                "{}: {} trials and {} evaluations for budget {}",
                self.key(),
                self.trials.len(),
                self.evaluations,
                self.budget
            )));
        }
        let fresh = self.trace().metrics(task)?;
        if self.metrics.as_ref() != Some(&fresh) {
            return Err(Error::ContractViolation(format!(
                "{}: stored metrics differ",
                self.key()
            )));
        }
        Ok(())
    }

    pub fn key(&self) -> String {
        format!("{}/{}/s{}", self.task_id, self.method, self.seed)
    }
}

pub fn model_label(cfg: &RunConfig) -> String {
    match cfg.backend.mode {
        BackendMode::Mock => format!("mock-{}", cfg.backend.mock.name()),
        _ => cfg.backend.model.clone(),
    }
}

pub fn cell_seed(master_seed: u64, task_id: &str, method: Method, seed: u64) -> u64 {
    derive_seed(&[
        &master_seed.to_string(),
        task_id,
        method.label(),
        &seed.to_string(),
    ])
}

/// Backend described by the config. Replay needs the cache file to exist.
pub fn build_backend(cfg: &RunConfig) -> Result<Arc<dyn Backend>> {
    let b = &cfg.backend;
    Ok(match b.mode {
        BackendMode::Mock => Arc::new(PolicyBackend::new(b.mock.clone())?),
        BackendMode::Live => Arc::new(LiveBackend::from_config(b)?),
        BackendMode::Record => {
            let path = cfg.cache_path();
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            Arc::new(RecordingBackend::new(LiveBackend::from_config(b)?, &path)?)
        }
        BackendMode::Replay => {
            let path = cfg.cache_path();
            if !path.exists() {
                return Err(Error::ContractViolation(format!(
                    "replay mode needs a cache file, {} does not exist",
                    path.display()
                )));
            }
            Arc::new(ReplayBackend::open(&path)?)
        }
    })
}

#[derive(Debug, Clone)]
pub struct Cell<'a> {
    pub index: usize,
    pub task: &'a TaskSpec,
    pub method: Method,
    pub seed: u64,
}

pub fn run_cell(cfg: &RunConfig, cell: &Cell<'_>, backend: Option<&dyn Backend>) -> RunRecord {
    let seed = cell_seed(cfg.master_seed, &cell.task.id, cell.method, cell.seed);
    let start = Instant::now();
    let settings = cfg.settings();
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let backend = if cell.method.needs_backend() {
            backend
        } else {
            None
        };
        let trace = run_method(cell.task, cell.method, cfg.budget, backend, &settings, seed)?;
        let metrics = trace.metrics(cell.task)?;
        Ok::<_, Error>((trace, metrics))
    }))
    .unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(Error::ContractViolation(format!("cell panicked: {msg}")))
    });
    let mut record = RunRecord {
        task_id: cell.task.id.clone(),
        family: cell.task.family,
        method: cell.method,
        model: model_label(cfg),
        seed: cell.seed,
        cell_seed: seed,
        budget: cfg.budget,
        status: CellStatus::Ok,
        error: None,
        evaluations: 0,
        trials: Vec::new(),
        entropy: Vec::new(),
        overrides: Vec::new(),
        tree: Vec::new(),
        metrics: None,
        wall_ms: cfg.record_timings.then(|| start.elapsed().as_millis() as u64),
        config: snapshot(cfg),
    };
    match outcome {
        Ok((trace, metrics)) => {
            record.evaluations = trace.trials.len();
            if record.evaluations != cfg.budget {
                record.status = CellStatus::Failed;
                record.error = Some(format!(
                    "budget audit: {} evaluations for budget {}",
                    record.evaluations, cfg.budget
                ));
            }
            record.trials = trace.trials;
            record.entropy = trace.entropy;
            record.overrides = trace.overrides;
            record.tree = trace.tree;
            record.metrics = Some(metrics);
        }
        Err(e) => {
            record.status = CellStatus::Failed;
            record.error = Some(e.to_string());
        }
    }
    record
}

fn snapshot(cfg: &RunConfig) -> RunConfig {
    let mut snap = cfg.clone();
    snap.output_dir = PathBuf::new();
    snap.parallelism = None;
    snap
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub records_path: PathBuf,
}

impl RunOutcome {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Cells in catalog order: tasks, then methods, then seeds.
pub fn plan_cells<'a>(cfg: &RunConfig, tasks: &'a [TaskSpec]) -> Vec<Cell<'a>> {
    let mut cells = Vec::new();
    for task in tasks {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                cells.push(Cell {
                    index: cells.len(),
                    task,
                    method,
                    seed,
                });
            }
        }
    }
    cells
}

/// Runs every cell and persists the records. `backend` overrides the
/// config's backend (used by tests).
pub fn run_experiment(cfg: &RunConfig, backend: Option<Arc<dyn Backend>>) -> Result<RunOutcome> {
    cfg.validate()?;
    let tasks = cfg.tasks.resolve(cfg.master_seed)?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_atomic(
        &cfg.output_dir.join(MANIFEST_FILE),
        manifest_jsonl(&tasks).as_bytes(),
    )?;

    let needs_backend = cfg.methods.iter().any(|m| m.needs_backend());
    let backend = match backend {
        Some(b) => Some(b),
        None if needs_backend => Some(build_backend(cfg)?),
        None => None,
    };

    let cells = plan_cells(cfg, &tasks);
    let progress_path = cfg.output_dir.join(IN_PROGRESS_FILE);
    let progress = Mutex::new(File::create(&progress_path)?);
    let workers = cfg
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .min(cells.len())
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ContractViolation(format!("thread pool: {e}")))?;

    let mut records: Vec<(usize, RunRecord)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let record = run_cell(cfg, cell, backend.as_deref());
                let mut line = serde_json::to_string(&record).expect("record serializes");
                line.push('\n');
                let mut file = progress.lock().expect("progress lock");
                if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                    eprintln!("warning: could not append {}: {e}", record.key());
                }
                (cell.index, record)
            })
            .collect()
    });
    records.sort_by_key(|(i, _)| *i);
    let records: Vec<RunRecord> = records.into_iter().map(|(_, r)| r).collect();

    let records_path = cfg.output_dir.join(RECORDS_FILE);
    write_records(&records_path, &records)?;
    fs::remove_file(&progress_path)?;
    Ok(RunOutcome {
        records,
        records_path,
    })
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::ContractViolation(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn records_jsonl(records: &[RunRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_atomic(path, records_jsonl(records).as_bytes())
}

/// Reads a records file. A truncated final line (from a killed writer) is
/// skipped with a notice; any other malformed line is an error.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => {
                eprintln!("notice: skipping incomplete last line of {}: {e}", path.display());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_seeds_differ_per_coordinate() {
        let a = cell_seed(0, "fn_000", Method::Llm, 0);
        assert_ne!(a, cell_seed(1, "fn_000", Method::Llm, 0));
        assert_ne!(a, cell_seed(0, "fn_001", Method::Llm, 0));
        assert_ne!(a, cell_seed(0, "fn_000", Method::Cma, 0));
        assert_ne!(a, cell_seed(0, "fn_000", Method::Llm, 1));
        assert_eq!(a, cell_seed(0, "fn_000", Method::Llm, 0));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
