//! Aggregated tables: per-(model, family) win counts and trajectory means,
//! plus the coverage-dynamics series.

use std::collections::BTreeMap;

use bbo_core::metrics::pairwise_wins;
use bbo_core::run::Method;
use bbo_core::tasks::Family;
use bbo_core::{Error, Result};

use crate::runner::RunRecord;

pub const TABLE1_FILE: &str = "table1.tsv";
pub const DYNAMICS_FILE: &str = "coverage_dynamics.tsv";

/// Methods the plain proposer is compared against, in column order.
const OPPONENTS: [Method; 3] = [Method::Cma, Method::Centaur, Method::Mcts];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    pub table1: String,
    pub coverage_dynamics: String,
}

type CellKey = (String, u64);
type Group<'a> = BTreeMap<Method, BTreeMap<CellKey, &'a RunRecord>>;

fn na() -> String {
    "NA".to_string()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<(f64, usize)> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| (sum / n as f64, n))
}

/// Groups successful records by (model, family) and checks that every
/// method of a group covers the same (task, seed) cells.
fn group(records: &[RunRecord]) -> Result<BTreeMap<(String, Family), Group<'_>>> {
    let mut groups: BTreeMap<(String, Family), Group<'_>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let cells = groups
            .entry((r.model.clone(), r.family))
            .or_default()
            .entry(r.method)
            .or_default();
        if cells.insert((r.task_id.clone(), r.seed), r).is_some() {
            return Err(Error::ContractViolation(format!(
                "duplicate record for {}",
                r.key()
            )));
        }
    }
    for ((model, family), methods) in &groups {
        let mut iter = methods.iter();
        let (first_method, first) = iter.next().expect("non-empty group");
        for (method, cells) in iter {
            if !cells.keys().eq(first.keys()) {
                return Err(Error::ContractViolation(format!(
                    "incomparable catalogs for {model}/{family}: {first_method} has {} cells, {method} has {}",
                    first.len(),
                    cells.len()
                )));
            }
        }
        let budgets: Vec<usize> = methods
            .values()
            .flat_map(|c| c.values().map(|r| r.budget))
            .collect();
        if budgets.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::ContractViolation(format!(
                "mixed budgets within {model}/{family}"
            )));
        }
    }
    if groups.is_empty() {
        return Err(Error::ContractViolation(
            "no successful records to tabulate".into(),
        ));
    }
    Ok(groups)
}

fn best_losses(cells: &BTreeMap<CellKey, &RunRecord>) -> Vec<f64> {
    cells
        .values()
        .map(|r| r.metrics.as_ref().map_or(f64::INFINITY, |m| m.best_loss))
        .collect()
}

pub fn emit_tables(records: &[RunRecord]) -> Result<Tables> {
    let groups = group(records)?;

    let mut header = vec!["model".to_string(), "family".into(), "cells".into()];
    for m in OPPONENTS {
        header.push(format!("llm_vs_{m}"));
        header.push(format!("llm_vs_{m}_ties"));
    }
    for m in Method::ALL {
        for col in ["best_step", "cov_final", "L", "L_n"] {
            header.push(format!("{m}_{col}"));
        }
    }
    let mut table1 = header.join("\t");
    table1.push('\n');

    let mut dynamics = String::from("model\tfamily\tmethod\tk\tmean_cov\tn\n");

    for ((model, family), methods) in &groups {
        let cells = methods.values().next().map_or(0, |c| c.len());
        let mut row = vec![model.clone(), family.to_string(), cells.to_string()];
        for m in OPPONENTS {
            match (methods.get(&Method::Llm), methods.get(&m)) {
                (Some(a), Some(b)) => {
                    let w = pairwise_wins(&best_losses(a), &best_losses(b))?;
                    row.push(format!("{}/{}", w.a_wins, w.b_wins));
                    row.push(w.ties.to_string());
                }
                _ => row.extend([na(), na()]),
            }
        }
        for m in Method::ALL {
            let Some(cells) = methods.get(&m) else {
                row.extend([na(), na(), na(), "0".into()]);
                continue;
            };
            let summaries: Vec<_> = cells.values().filter_map(|r| r.metrics.as_ref()).collect();
            let fmt =
                |v: Option<(f64, usize)>, digits: usize| v.map_or_else(na, |(x, _)| format!("{x:.digits$}"));
            row.push(fmt(mean(summaries.iter().map(|s| s.best_step as f64)), 2));
            row.push(fmt(mean(summaries.iter().map(|s| s.coverage_final)), 2));
            // Runs without a defined L are left out and the count says so.
            let l = mean(summaries.iter().filter_map(|s| s.l));
            row.push(fmt(l, 3));
            row.push(l.map_or(0, |(_, n)| n).to_string());

            let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for s in &summaries {
                for &(k, cov) in &s.coverage_series {
                    by_k.entry(k).or_default().push(cov);
                }
            }
            for (k, covs) in by_k {
                let (avg, n) = mean(covs.into_iter()).expect("non-empty");
                dynamics.push_str(&format!("{model}\t{family}\t{m}\t{k}\t{avg:.4}\t{n}\n"));
            }
        }
        table1.push_str(&row.join("\t"));
        table1.push('\n');
    }
    Ok(Tables {
        table1,
        coverage_dynamics: dynamics,
    })
}
