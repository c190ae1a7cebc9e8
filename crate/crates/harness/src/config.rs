//! Run configuration, read from one TOML file.

use std::path::{Path, PathBuf};

use bbo_core::backend::{Policy, RequestParams};
use bbo_core::mcts::MctsConfig;
use bbo_core::run::{Method, MethodSettings};
use bbo_core::tasks::{
    bbob_task, make_bbob_tasks, make_function_tasks, make_physical_tasks, task_by_id, Family, TaskSpec,
};
use bbo_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Mock,
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default = "default_mode")]
    pub mode: BackendMode,
    /// Scripted policy used in mock mode.
    #[serde(default = "default_policy")]
    pub mock: Policy,
    /// Record/replay log, relative paths resolved against `output_dir`.
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_base_url")]
    pub base_url: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Requests per second across all cells (live and record modes).
    #[serde(default = "default_rps")]
    pub rps: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_mode() -> BackendMode {
    BackendMode::Mock
}
fn default_policy() -> Policy {
    Policy::greedy()
}
fn default_cache() -> PathBuf {
    PathBuf::from("cache.jsonl")
}
fn default_model() -> String {
    "mock".into()
}
fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}
fn default_key_env() -> String {
    "LLM_API_KEY".into()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    512
}
fn default_rps() -> f64 {
    2.0
}
fn default_timeout() -> u64 {
    120
}

impl Default for BackendConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl BackendConfig {
    pub fn request_params(&self) -> RequestParams {
        RequestParams {
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

/// Which tasks to run. Family counts take the first `n` tasks of each
/// catalog; `ids` adds individual tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSelector {
    #[serde(default)]
    pub functions: usize,
    #[serde(default)]
    pub physical: usize,
    #[serde(default)]
    pub bbob2d: usize,
    #[serde(default)]
    pub bbob5d: usize,
    /// Replaces the default BBOB catalog with functions x instances.
    #[serde(default)]
    pub bbob_functions: Option<Vec<u32>>,
    #[serde(default)]
    pub bbob_instances: Option<Vec<u32>>,
    #[serde(default)]
    pub ids: Vec<String>,
}

impl Default for TaskSelector {
    fn default() -> Self {
        Self {
            functions: 100,
            physical: 100,
            bbob2d: 48,
            bbob5d: 48,
            bbob_functions: None,
            bbob_instances: None,
            ids: Vec::new(),
        }
    }
}

impl TaskSelector {
    pub fn resolve(&self, master_seed: u64) -> Result<Vec<TaskSpec>> {
        let mut tasks = make_function_tasks(self.functions, master_seed);
        tasks.extend(make_physical_tasks(self.physical, master_seed));
        for (count, dim) in [(self.bbob2d, 2), (self.bbob5d, 5)] {
            if count == 0 {
                continue;
            }
            match (&self.bbob_functions, &self.bbob_instances) {
                (None, None) => tasks.extend(make_bbob_tasks(count, dim)?),
                (fs, is) => {
                    let fs = fs
                        .clone()
                        .unwrap_or_else(|| bbo_core::tasks::BBOB_FUNCTIONS.to_vec());
                    let is = is.clone().unwrap_or_else(|| vec![1, 2, 3]);
                    let mut picked = Vec::new();
                    'outer: for &inst in &is {
                        for &f in &fs {
                            if picked.len() == count {
                                break 'outer;
                            }
                            picked.push(bbob_task(f, inst, dim)?);
                        }
                    }
                    tasks.extend(picked);
                }
            }
        }
        for id in &self.ids {
            if !tasks.iter().any(|t| &t.id == id) {
                tasks.push(task_by_id(id, master_seed)?);
            }
        }
        if tasks.is_empty() {
            return Err(Error::ContractViolation("task selector matches no tasks".into()));
        }
        Ok(tasks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Worker cap; defaults to the number of available cores.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Adds wall-clock timings to records (which breaks byte-identical
    /// reruns).
    #[serde(default)]
    pub record_timings: bool,
    #[serde(default)]
    pub tasks: TaskSelector,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub mcts: MctsConfig,
}

fn default_budget() -> usize {
    50
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::ContractViolation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ContractViolation(format!("config: {m}")));
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.backend.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.backend.temperature));
        }
        if self.backend.rps <= 0.0 {
            return bad("rps must be positive".into());
        }
        self.backend.mock.validate()?;
        self.mcts.validate()
    }

    pub fn settings(&self) -> MethodSettings {
        MethodSettings {
            request: self.backend.request_params(),
            mcts: self.mcts,
        }
    }

    pub fn cache_path(&self) -> PathBuf {
        if self.backend.cache.is_absolute() {
            self.backend.cache.clone()
        } else {
            self.output_dir.join(&self.backend.cache)
        }
    }

    /// Families present in the resolved catalog, in catalog order.
    pub fn families(&self) -> Result<Vec<Family>> {
        let mut out: Vec<Family> = Vec::new();
        for t in self.tasks.resolve(self.master_seed)? {
            if !out.contains(&t.family) {
                out.push(t.family);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_standard_setup() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.budget, 50);
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg.backend.temperature, 0.7);
        assert_eq!(cfg.mcts.k, 5);
        let tasks = cfg.tasks.resolve(0).unwrap();
        assert_eq!(tasks.len(), 100 + 100 + 48 + 48);
    }

    #[test]
    fn parses_a_full_file() {
        let cfg = RunConfig::from_toml(
            r#"
            master_seed = 3
            budget = 20
            seeds = [0, 1]
            methods = ["llm", "mcts"]
            parallelism = 2
            output_dir = "/tmp/x"

            [tasks]
            functions = 2
            bbob2d = 1
            ids = ["fn_sphere"]

            [backend]
            mode = "mock"
            mock = { policy = "linear_walker", step = 0.05 }

            [mcts]
            k = 3
            c = 1.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.methods, vec![Method::Llm, Method::Mcts]);
        assert_eq!(
            cfg.backend.mock,
            Policy::LinearWalker {
                direction: None,
                step: 0.05
            }
        );
        let ids: Vec<String> = cfg.tasks.resolve(3).unwrap().into_iter().map(|t| t.id).collect();
        assert_eq!(ids, vec!["fn_000", "fn_001", "bbob2d_f01_i1", "fn_sphere"]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml("budget = 0").is_err());
        assert!(RunConfig::from_toml("methods = []").is_err());
        assert!(RunConfig::from_toml("methods = [\"bo\"]").is_err());
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        assert!(
            RunConfig::from_toml("[backend]\nmock = { policy = \"greedy_perturb\", sigma = -1 }").is_err()
        );
    }
}
