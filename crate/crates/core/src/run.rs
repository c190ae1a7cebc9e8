//! Budgeted evaluation and the per-method run loops.

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, RequestParams};
use crate::centaur::{centaur_step, OverrideLog};
use crate::cma::CmaState;
use crate::error::{contract, Error, Result};
use crate::history::History;
use crate::mcts::{mcts_backprop, mcts_expand, MctsConfig, MctsTree, TreeRow};
use crate::metrics::{MetricSummary, Trajectory};
use crate::proposer::{propose_next, PromptTemplate, ProposerContext};
use crate::seed::{rng_from, Rng};
use crate::tasks::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Llm,
    Cma,
    Centaur,
    Mcts,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Llm, Method::Cma, Method::Centaur, Method::Mcts];

    pub fn label(self) -> &'static str {
        match self {
            Method::Llm => "llm",
            Method::Cma => "cma",
            Method::Centaur => "centaur",
            Method::Mcts => "mcts",
        }
    }

    pub fn needs_backend(self) -> bool {
        self != Method::Cma
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| contract(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub step: usize,
    pub point: Vec<f64>,
    pub loss: f64,
    pub clamped: bool,
    pub fallback: bool,
    pub injected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

/// Extra per-trial facts supplied by the caller of [`Evaluator::evaluate`].
#[derive(Debug, Clone, Default)]
pub struct TrialMeta {
    /// Set when the point was already clamped before evaluation.
    pub clamped: bool,
    pub fallback: bool,
    pub injected: bool,
    pub raw_text: Option<String>,
}

/// Wraps a task with a hard evaluation budget and records every trial.
pub struct Evaluator<'a> {
    task: &'a TaskSpec,
    budget: usize,
    trials: Vec<TrialRecord>,
    history: History,
}

impl<'a> Evaluator<'a> {
    pub fn new(task: &'a TaskSpec, budget: usize) -> Self {
        Self {
            task,
            budget,
            trials: Vec::with_capacity(budget),
            history: History::new(),
        }
    }

    pub fn task(&self) -> &TaskSpec {
        self.task
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.trials.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.trials.len()
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn evaluate(&mut self, point: &[f64], meta: TrialMeta) -> Result<&TrialRecord> {
        if self.remaining() == 0 {
            return Err(Error::BudgetExhausted(self.budget));
        }
        let eval = self.task.evaluate(point)?;
        let step = self.history.push(eval.point.clone(), eval.loss);
        self.trials.push(TrialRecord {
            step,
            point: eval.point,
            loss: eval.loss,
            clamped: eval.clamped || meta.clamped,
            fallback: meta.fallback,
            injected: meta.injected,
            raw_text: meta.raw_text,
        });
        Ok(self.trials.last().expect("just pushed"))
    }

    pub fn into_trials(self) -> Vec<TrialRecord> {
        self.trials
    }
}

/// Settings shared by the LLM-driven methods.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub request: RequestParams,
    pub mcts: MctsConfig,
}

/// Everything one (task, method, seed) run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub trials: Vec<TrialRecord>,
    /// Proposal entropy after each CMA-ES generation (CMA and Centaur).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entropy: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tree: Vec<TreeRow>,
}

impl RunTrace {
    pub fn trajectory(&self, task: &TaskSpec) -> Result<Trajectory> {
        Trajectory::new(
            self.trials.iter().map(|t| t.point.clone()).collect(),
            self.trials.iter().map(|t| t.loss).collect(),
            task.bounds.clone(),
        )
    }

    pub fn metrics(&self, task: &TaskSpec) -> Result<MetricSummary> {
        let traj = self.trajectory(task)?;
        Ok(MetricSummary::compute(
            &traj,
            self.trials.iter().filter(|t| t.clamped).count(),
            self.trials.iter().filter(|t| t.fallback).count(),
        ))
    }
}

/// Independent random streams of one run, both keyed by the cell seed.
pub struct RunStreams {
    pub cma: Rng,
    pub llm: Rng,
}

impl RunStreams {
    pub fn new(cell_seed: u64) -> Self {
        let key = cell_seed.to_string();
        Self {
            cma: rng_from(&[&key, "cma"]),
            llm: rng_from(&[&key, "llm"]),
        }
    }
}

pub fn run_method(
    task: &TaskSpec,
    method: Method,
    budget: usize,
    backend: Option<&dyn Backend>,
    settings: &MethodSettings,
    cell_seed: u64,
) -> Result<RunTrace> {
    if budget == 0 {
        return Err(contract("budget must be at least 1"));
    }
    let backend = match (method.needs_backend(), backend) {
        (true, None) => return Err(contract(format!("method {method} needs a backend"))),
        (_, b) => b,
    };
    let mut streams = RunStreams::new(cell_seed);
    match method {
        Method::Llm => run_llm(task, budget, backend.expect("checked"), settings, &mut streams),
        Method::Cma => run_cma(task, budget, &mut streams),
        Method::Centaur => run_centaur(task, budget, backend.expect("checked"), settings, &mut streams),
        Method::Mcts => run_mcts(task, budget, backend.expect("checked"), settings, &mut streams),
    }
}

fn run_llm(
    task: &TaskSpec,
    budget: usize,
    backend: &dyn Backend,
    settings: &MethodSettings,
    streams: &mut RunStreams,
) -> Result<RunTrace> {
    let mut eval = Evaluator::new(task, budget);
    let mut ctx = ProposerContext::new(PromptTemplate::for_family(task.family), task.bounds.clone());
    while eval.remaining() > 0 {
        let proposal = propose_next(backend, &settings.request, &ctx, &mut streams.llm)?;
        let trial = eval.evaluate(
            &proposal.point,
            TrialMeta {
                clamped: proposal.clamped,
                fallback: proposal.fallback,
                injected: false,
                raw_text: Some(proposal.raw_text),
            },
        )?;
        ctx.history.push(trial.point.clone(), trial.loss);
    }
    Ok(RunTrace {
        trials: eval.into_trials(),
        entropy: Vec::new(),
        overrides: Vec::new(),
        tree: Vec::new(),
    })
}

fn run_cma(task: &TaskSpec, budget: usize, streams: &mut RunStreams) -> Result<RunTrace> {
    let mut eval = Evaluator::new(task, budget);
    let mut state = CmaState::init(&task.bounds, &mut streams.cma);
    let mut entropy = Vec::new();
    while eval.remaining() > 0 {
        let mut gen = state.ask(&mut streams.cma)?;
        gen.truncate(eval.remaining());
        let mut losses = Vec::with_capacity(gen.candidates.len());
        for c in &gen.candidates {
            losses.push(eval.evaluate(&c.point, TrialMeta::default())?.loss);
        }
        gen.losses = Some(losses);
        state = state.tell(&gen)?;
        entropy.push(state.entropy()?);
    }
    Ok(RunTrace {
        trials: eval.into_trials(),
        entropy,
        overrides: Vec::new(),
        tree: Vec::new(),
    })
}

fn run_centaur(
    task: &TaskSpec,
    budget: usize,
    backend: &dyn Backend,
    settings: &MethodSettings,
    streams: &mut RunStreams,
) -> Result<RunTrace> {
    let mut eval = Evaluator::new(task, budget);
    let mut state = CmaState::init(&task.bounds, &mut streams.cma);
    let template = PromptTemplate::for_family(task.family);
    let mut entropy = Vec::new();
    let mut overrides = Vec::new();
    while eval.remaining() > 0 {
        let (next, log) = centaur_step(
            &state,
            backend,
            &settings.request,
            template,
            &mut eval,
            &mut streams.cma,
            &mut streams.llm,
        )?;
        state = next;
        entropy.push(state.entropy()?);
        overrides.push(log);
    }
    Ok(RunTrace {
        trials: eval.into_trials(),
        entropy,
        overrides,
        tree: Vec::new(),
    })
}

fn run_mcts(
    task: &TaskSpec,
    budget: usize,
    backend: &dyn Backend,
    settings: &MethodSettings,
    streams: &mut RunStreams,
) -> Result<RunTrace> {
    let config = settings.mcts;
    config.validate()?;
    let mut eval = Evaluator::new(task, budget);
    let mut tree = MctsTree::new();
    let template = PromptTemplate::for_family(task.family);
    while eval.remaining() > 0 {
        let node = tree.select(&config);
        let children = mcts_expand(
            &mut tree,
            node,
            backend,
            &settings.request,
            template,
            &mut eval,
            &config,
            &mut streams.llm,
        )?;
        mcts_backprop(&mut tree, node, &children);
    }
    Ok(RunTrace {
        trials: eval.into_trials(),
        entropy: Vec::new(),
        overrides: Vec::new(),
        tree: tree.dump(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Policy, PolicyBackend};
    use crate::tasks::{function_task, sphere_task};

    #[test]
    fn evaluator_enforces_budget() {
        let task = sphere_task(1);
        let mut eval = Evaluator::new(&task, 2);
        eval.evaluate(&[0.1, 0.1], TrialMeta::default()).unwrap();
        let t = eval.evaluate(&[2.0, 0.1], TrialMeta::default()).unwrap();
        assert!(t.clamped && t.step == 2);
        assert!(matches!(
            eval.evaluate(&[0.1, 0.2], TrialMeta::default()),
            Err(Error::BudgetExhausted(2))
        ));
    }

    #[test]
    fn every_method_uses_the_exact_budget() {
        let task = function_task(3, 7);
        let backend = PolicyBackend::new(Policy::UniformRandom).unwrap();
        for method in Method::ALL {
            for budget in [1, 7, 50] {
                let trace = run_method(
                    &task,
                    method,
                    budget,
                    Some(&backend),
                    &MethodSettings::default(),
                    9,
                )
                .unwrap();
                assert_eq!(trace.trials.len(), budget, "{method} budget {budget}");
                let steps: Vec<usize> = trace.trials.iter().map(|t| t.step).collect();
                assert_eq!(steps, (1..=budget).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn llm_methods_require_a_backend() {
        let task = sphere_task(1);
        assert!(run_method(&task, Method::Llm, 5, None, &MethodSettings::default(), 0).is_err());
        assert!(run_method(&task, Method::Cma, 5, None, &MethodSettings::default(), 0).is_ok());
    }

    #[test]
    fn proposer_never_repeats_points() {
        let task = function_task(0, 7);
        let backend = PolicyBackend::new(Policy::greedy()).unwrap();
        let trace = run_method(
            &task,
            Method::Llm,
            50,
            Some(&backend),
            &MethodSettings::default(),
            4,
        )
        .unwrap();
        for (i, a) in trace.trials.iter().enumerate() {
            assert!(!a.fallback);
            for b in &trace.trials[..i] {
                assert_ne!(a.point, b.point);
            }
        }
    }
}
