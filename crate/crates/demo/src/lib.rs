//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns JSON text so the page needs no generated types,
//! and the same functions run natively in tests.

use bbo_core::backend::{Policy, PolicyBackend, RequestParams};
use bbo_core::probe::{run_probe, Regime};
use bbo_core::run::{run_method, Method, MethodSettings};
use bbo_core::tasks::{task_by_id, TaskSpec};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MASTER_SEED: u64 = 0;
const MAX_GRID: usize = 256;

fn task_2d(id: &str) -> Result<TaskSpec, String> {
    let task = task_by_id(id, MASTER_SEED).map_err(|e| e.to_string())?;
    if task.dim() != 2 {
        return Err(format!("{id} is not a 2D task"));
    }
    Ok(task)
}

fn policy(name: &str) -> Result<Policy, String> {
    match name {
        "uniform_random" => Ok(Policy::UniformRandom),
        "greedy_perturb" => Ok(Policy::greedy()),
        "linear_walker" => Ok(Policy::walker()),
        other => Err(format!("unknown policy {other:?}")),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Loss on an `n x n` grid over the task bounds, row-major with y growing
/// downwards from the upper bound, plus the bounds and the known optimum.
#[wasm_bindgen]
pub fn landscape(task_id: &str, n: usize) -> Result<String, String> {
    let task = task_2d(task_id)?;
    if !(2..=MAX_GRID).contains(&n) {
        return Err(format!("grid size must be in 2..={MAX_GRID}"));
    }
    let (lo, hi) = (task.bounds.lower(), task.bounds.upper());
    let mut values = Vec::with_capacity(n * n);
    for row in 0..n {
        let y = hi[1] - (hi[1] - lo[1]) * row as f64 / (n - 1) as f64;
        for col in 0..n {
            let x = lo[0] + (hi[0] - lo[0]) * col as f64 / (n - 1) as f64;
            values.push(task.evaluate(&[x, y]).map_err(|e| e.to_string())?.loss);
        }
    }
    to_json(&json!({
        "task": task.id,
        "n": n,
        "lower": lo,
        "upper": hi,
        "values": values,
        "optimum": task.optimum_point(),
    }))
}

/// One optimizer run with a scripted proposer standing in for the model.
#[wasm_bindgen]
pub fn run_trace(
    task_id: &str,
    method: &str,
    policy_name: &str,
    seed: u32,
    budget: usize,
) -> Result<String, String> {
    let task = task_2d(task_id)?;
    let method: Method = method.parse().map_err(|e: bbo_core::Error| e.to_string())?;
    if !(1..=500).contains(&budget) {
        return Err("budget must be in 1..=500".into());
    }
    let backend = PolicyBackend::new(policy(policy_name)?).map_err(|e| e.to_string())?;
    let trace = run_method(
        &task,
        method,
        budget,
        Some(&backend),
        &MethodSettings::default(),
        seed as u64,
    )
    .map_err(|e| e.to_string())?;
    let metrics = trace.metrics(&task).map_err(|e| e.to_string())?;
    let points: Vec<_> = trace
        .trials
        .iter()
        .map(|t| (&t.point, t.loss, t.injected))
        .collect();
    to_json(&json!({ "points": points, "metrics": metrics }))
}

/// The anchoring probe on the shifted sphere for one regime.
#[wasm_bindgen]
pub fn probe(policy_name: &str, bo_pretend: bool, seed: u32) -> Result<String, String> {
    let task = task_2d("fn_sphere")?;
    let backend = PolicyBackend::new(policy(policy_name)?).map_err(|e| e.to_string())?;
    let regime = if bo_pretend {
        Regime::BoPretend
    } else {
        Regime::BlackBox
    };
    let result = run_probe(&task, &backend, &RequestParams::default(), regime, seed as u64)
        .map_err(|e| e.to_string())?;
    to_json(&json!({
        "seed_points": result.seed_points,
        "rounds": result.rounds.iter().map(|r| json!({
            "point": r.point,
            "loss": r.loss,
            "best_ref": r.best_ref,
            "last_ref": r.last_ref,
            "anchor": r.anchor,
        })).collect::<Vec<_>>(),
        "optimum": task.optimum_point(),
        "prompt": result.rounds.last().map(|r| r.prompt.clone()),
    }))
}
