//! Greedy-gradient probe: evaluate 10 uniform seed points, ask for 5 more
//! proposals, and classify each proposal as anchored to the best point so
//! far or to the most recent one.

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, RequestParams};
use crate::error::{contract, Result};
use crate::history::{History, Observation};
use crate::proposer::{propose_with, render_prompt, PromptTemplate, ProposerContext};
use crate::run::{Evaluator, TrialMeta};
use crate::seed::rng_from;
use crate::tasks::{Bounds, TaskSpec};

pub const SEED_POINTS: usize = 10;
pub const PROBE_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BlackBox,
    BoPretend,
}

impl Regime {
    pub fn template(self) -> PromptTemplate {
        match self {
            Regime::BlackBox => PromptTemplate::ProbeBlackBox,
            Regime::BoPretend => PromptTemplate::BoPretend,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::BlackBox => "black_box",
            Regime::BoPretend => "bo_pretend",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    NearBest,
    NearLast,
    Neither,
}

/// Euclidean argmin between the two references. Equal distances (always
/// the case when the best point is also the latest) count as `NearBest`;
/// `Neither` when both exceed half the diagonal.
pub fn classify_anchor(proposal: &[f64], best: &[f64], last: &[f64], bounds: &Bounds) -> Anchor {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (db, dl) = (dist(proposal, best), dist(proposal, last));
    let guard = 0.5 * bounds.diagonal();
    if db > guard && dl > guard {
        Anchor::Neither
    } else if db <= dl {
        Anchor::NearBest
    } else {
        Anchor::NearLast
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRound {
    pub step: usize,
    pub point: Vec<f64>,
    pub loss: f64,
    /// References the proposal was classified against.
    pub best_ref: Vec<f64>,
    pub last_ref: Vec<f64>,
    pub anchor: Anchor,
    pub fallback: bool,
    pub prompt: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub task_id: String,
    pub regime: Regime,
    pub seed: u64,
    pub seed_points: Vec<Observation>,
    pub rounds: Vec<ProbeRound>,
    pub evaluations: usize,
}

impl ProbeResult {
    pub fn anchor_flags(&self) -> Vec<Anchor> {
        self.rounds.iter().map(|r| r.anchor).collect()
    }

    pub fn count(&self, anchor: Anchor) -> usize {
        self.rounds.iter().filter(|r| r.anchor == anchor).count()
    }

    /// Tab-separated rows `order, kind, x, y, loss, anchor` for plotting.
    pub fn plot_tsv(&self) -> String {
        let mut out = String::from("order\tkind\tx\ty\tloss\tanchor\n");
        for o in &self.seed_points {
            out.push_str(&format!(
                "{}\tseed\t{}\t{}\t{}\t\n",
                o.step, o.point[0], o.point[1], o.loss
            ));
        }
        for r in &self.rounds {
            let anchor = serde_json::to_value(r.anchor).expect("anchor");
            out.push_str(&format!(
                "{}\tproposal\t{}\t{}\t{}\t{}\n",
                r.step,
                r.point[0],
                r.point[1],
                r.loss,
                anchor.as_str().unwrap_or_default()
            ));
        }
        out
    }
}

pub fn run_probe(
    task: &TaskSpec,
    backend: &dyn Backend,
    params: &RequestParams,
    regime: Regime,
    seed: u64,
) -> Result<ProbeResult> {
    if task.bounds != Bounds::unit_square() {
        return Err(contract(format!(
            "probe needs a task on [0,1]^2, {} is not",
            task.id
        )));
    }
    let key = seed.to_string();
    // The seed-point stream does not depend on the regime, so both regimes
    // see the same first ten evaluations.
    let mut seed_rng = rng_from(&[&key, "probe", "seed-points"]);
    let mut llm_rng = rng_from(&[&key, "probe", "llm"]);
    let mut eval = Evaluator::new(task, SEED_POINTS + PROBE_ROUNDS);
    for _ in 0..SEED_POINTS {
        let p = task.bounds.sample_uniform(&mut seed_rng);
        eval.evaluate(&p, TrialMeta::default())?;
    }
    let seed_points = eval.history().as_slice().to_vec();

    let mut rounds = Vec::with_capacity(PROBE_ROUNDS);
    for _ in 0..PROBE_ROUNDS {
        let history: History = eval.history().clone();
        let best_ref = history.best().expect("seeded").point.clone();
        let last_ref = history.last().expect("seeded").point.clone();
        let mut ctx = ProposerContext::new(regime.template(), task.bounds.clone());
        ctx.history = history;
        let prompt = render_prompt(&ctx);
        let proposal = propose_with(
            backend,
            params,
            &prompt,
            &ctx.keys(),
            &task.bounds,
            ctx.history.as_slice(),
            &mut llm_rng,
        )?;
        let trial = eval.evaluate(
            &proposal.point,
            TrialMeta {
                clamped: proposal.clamped,
                fallback: proposal.fallback,
                ..TrialMeta::default()
            },
        )?;
        rounds.push(ProbeRound {
            step: trial.step,
            point: trial.point.clone(),
            loss: trial.loss,
            anchor: classify_anchor(&trial.point, &best_ref, &last_ref, &task.bounds),
            best_ref,
            last_ref,
            fallback: proposal.fallback,
            prompt,
            raw_text: proposal.raw_text,
        });
    }
    Ok(ProbeResult {
        task_id: task.id.clone(),
        regime,
        seed,
        seed_points,
        rounds,
        evaluations: eval.used(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_rules() {
        let b = Bounds::unit_square();
        assert_eq!(
            classify_anchor(&[0.1, 0.1], &[0.12, 0.1], &[0.5, 0.5], &b),
            Anchor::NearBest
        );
        assert_eq!(
            classify_anchor(&[0.5, 0.52], &[0.12, 0.1], &[0.5, 0.5], &b),
            Anchor::NearLast
        );
        assert_eq!(
            classify_anchor(&[0.3, 0.3], &[0.3, 0.31], &[0.3, 0.31], &b),
            Anchor::NearBest
        );
        assert_eq!(
            classify_anchor(&[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.1], &b),
            Anchor::Neither
        );
    }
}
