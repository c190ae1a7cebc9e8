//! LLM-guided Monte Carlo tree search over proposed points.
//!
//! Each expansion shows the model only the root-to-node path, asks for `k`
//! children in parallel, evaluates them and backs the minimum child loss up
//! the ancestor chain.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, RequestParams};
use crate::error::{contract, Result};
use crate::history::Observation;
use crate::proposer::{propose_with, render_with, PromptTemplate, Proposal};
use crate::run::{Evaluator, TrialMeta};
use crate::seed::{rng_from_seed, Rng};
use crate::tasks::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    /// Children requested per expansion.
    pub k: usize,
    /// UCB1 exploration constant.
    pub c: f64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            k: 5,
            c: std::f64::consts::SQRT_2,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(contract(format!("invalid MCTS config k={} c={}", self.k, self.c)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MctsNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// Absent only at the root.
    pub point: Option<Vec<f64>>,
    pub loss: Option<f64>,
    /// Trial number of the evaluation that created the node.
    pub step: Option<usize>,
    pub visits: u64,
    /// Minimum loss in the subtree, `+inf` for a childless root.
    pub value: f64,
    pub children: Vec<usize>,
    /// Times this node was the expansion target.
    pub expansions: u64,
}

/// Flat export row of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRow {
    pub id: usize,
    pub parent: Option<usize>,
    pub point: Option<Vec<f64>>,
    pub loss: Option<f64>,
    pub visits: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MctsTree {
    nodes: Vec<MctsNode>,
}

impl Default for MctsTree {
    fn default() -> Self {
        Self::new()
    }
}

/// UCB1 with min-max normalized rewards. Unvisited nodes score `+inf`; a
/// degenerate scale (`hi <= lo`) gives reward 0.5.
pub fn ucb1_score(node: &MctsNode, parent_visits: u64, c: f64, loss_scale: (f64, f64)) -> f64 {
    if node.visits == 0 {
        return f64::INFINITY;
    }
    let (lo, hi) = loss_scale;
    let reward = if hi > lo {
        (hi - node.value) / (hi - lo)
    } else {
        0.5
    };
    reward + c * ((parent_visits as f64).ln() / node.visits as f64).sqrt()
}

impl MctsTree {
    pub fn new() -> Self {
        Self {
            nodes: vec![MctsNode {
                id: 0,
                parent: None,
                point: None,
                loss: None,
                step: None,
                visits: 0,
                value: f64::INFINITY,
                children: Vec::new(),
                expansions: 0,
            }],
        }
    }

    pub const ROOT: usize = 0;

    pub fn node(&self, id: usize) -> &MctsNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[MctsNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Min and max loss over every evaluated node.
    pub fn loss_scale(&self) -> (f64, f64) {
        self.nodes
            .iter()
            .filter_map(|n| n.loss)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
                (lo.min(l), hi.max(l))
            })
    }

    /// Descends by maximum UCB1 (first maximum on ties) until a node with
    /// fewer than `k` children.
    pub fn select(&self, config: &MctsConfig) -> usize {
        let scale = self.loss_scale();
        let mut id = Self::ROOT;
        while self.nodes[id].children.len() >= config.k {
            let parent = &self.nodes[id];
            let mut best = parent.children[0];
            let mut best_score = f64::NEG_INFINITY;
            for &child in &parent.children {
                let s = ucb1_score(&self.nodes[child], parent.visits, config.c, scale);
                if s > best_score {
                    best = child;
                    best_score = s;
                }
            }
            id = best;
        }
        id
    }

    /// Node ids from the root's child down to `id` inclusive.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n != Self::ROOT {
                out.push(n);
            }
            cur = self.nodes[n].parent;
        }
        out.reverse();
        out
    }

    /// Observations along the root-to-node path, in path order.
    pub fn path_history(&self, id: usize) -> Vec<Observation> {
        self.path(id)
            .into_iter()
            .map(|n| {
                let node = &self.nodes[n];
                Observation {
                    step: node.step.expect("non-root node has a step"),
                    point: node.point.clone().expect("non-root node has a point"),
                    loss: node.loss.expect("non-root node has a loss"),
                }
            })
            .collect()
    }

    pub fn add_child(&mut self, parent: usize, point: Vec<f64>, loss: f64, step: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(MctsNode {
            id,
            parent: Some(parent),
            point: Some(point),
            loss: Some(loss),
            step: Some(step),
            visits: 0,
            value: loss,
            children: Vec::new(),
            expansions: 0,
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Checks the value and visit invariants at every node.
    pub fn audit(&self) -> Result<()> {
        for node in self.nodes.iter().rev() {
            let child_min = node
                .children
                .iter()
                .map(|&c| self.nodes[c].value)
                .fold(f64::INFINITY, f64::min);
            let expected_value = node.loss.unwrap_or(f64::INFINITY).min(child_min);
            if node.value != expected_value {
                return Err(contract(format!(
                    "node {} value {} but subtree minimum {}",
                    node.id, node.value, expected_value
                )));
            }
            let expected_visits =
                node.expansions + node.children.iter().map(|&c| self.nodes[c].visits).sum::<u64>();
            if node.visits != expected_visits {
                return Err(contract(format!(
                    "node {} visits {} but {} backpropagations passed through it",
                    node.id, node.visits, expected_visits
                )));
            }
            for &c in &node.children {
                if self.nodes[c].parent != Some(node.id) {
                    return Err(contract(format!("child {c} does not point back to {}", node.id)));
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> Vec<TreeRow> {
        self.nodes
            .iter()
            .map(|n| TreeRow {
                id: n.id,
                parent: n.parent,
                point: n.point.clone(),
                loss: n.loss,
                visits: n.visits,
                value: n.value,
            })
            .collect()
    }
}

/// Issues `seeds.len()` proposal requests, concurrently when the `parallel`
/// feature is on. Results come back in request order.
fn request_children(
    backend: &dyn Backend,
    params: &RequestParams,
    prompt: &str,
    keys: &[String],
    bounds: &Bounds,
    path: &[Observation],
    seeds: &[u64],
) -> Vec<Result<Proposal>> {
    let one = |seed: u64| {
        let mut rng: Rng = rng_from_seed(seed);
        propose_with(backend, params, prompt, keys, bounds, path, &mut rng)
    };
    #[cfg(feature = "parallel")]
    if seeds.len() > 1 {
        return std::thread::scope(|s| {
            let handles: Vec<_> = seeds.iter().map(|&seed| s.spawn(move || one(seed))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("expansion request thread panicked"))
                .collect()
        });
    }
    seeds.iter().map(|&seed| one(seed)).collect()
}

/// Expands `node` with up to `k` children (fewer when the budget runs out)
/// and returns their ids. Does not backpropagate.
#[allow(clippy::too_many_arguments)]
pub fn mcts_expand(
    tree: &mut MctsTree,
    node: usize,
    backend: &dyn Backend,
    params: &RequestParams,
    template: PromptTemplate,
    eval: &mut Evaluator<'_>,
    config: &MctsConfig,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let count = config.k.min(eval.remaining());
    if count == 0 {
        return Err(crate::Error::BudgetExhausted(eval.budget()));
    }
    let bounds = eval.task().bounds.clone();
    let keys = template.keys(bounds.dim());
    let path = tree.path_history(node);
    let prompt = render_with(
        template,
        &bounds,
        &path,
        eval.used() + 1,
        eval.history().best_loss(),
    );
    let seeds: Vec<u64> = (0..count).map(|_| rng.random()).collect();
    let replies = request_children(backend, params, &prompt, &keys, &bounds, &path, &seeds);

    let mut children = Vec::with_capacity(count);
    let mut siblings: Vec<Vec<f64>> = Vec::with_capacity(count);
    for reply in replies {
        let mut proposal = reply?;
        if siblings.contains(&proposal.point) {
            let mut point = bounds.sample_uniform(rng);
            while siblings.contains(&point) || path.iter().any(|o| o.point == point) {
                point = bounds.sample_uniform(rng);
            }
            proposal.point = point;
            proposal.clamped = false;
            proposal.fallback = true;
        }
        siblings.push(proposal.point.clone());
        let trial = eval.evaluate(
            &proposal.point,
            TrialMeta {
                clamped: proposal.clamped,
                fallback: proposal.fallback,
                injected: false,
                raw_text: Some(proposal.raw_text),
            },
        )?;
        let (point, loss, step) = (trial.point.clone(), trial.loss, trial.step);
        children.push(tree.add_child(node, point, loss, step));
    }
    tree.nodes[node].expansions += 1;
    Ok(children)
}

/// Adds one visit to `node` and each ancestor and lowers their values to the
/// minimum child loss.
pub fn mcts_backprop(tree: &mut MctsTree, node: usize, children: &[usize]) {
    let best = children
        .iter()
        .filter_map(|&c| tree.nodes[c].loss)
        .fold(f64::INFINITY, f64::min);
    let mut cur = Some(node);
    while let Some(id) = cur {
        let n = &mut tree.nodes[id];
        n.visits += 1;
        n.value = n.value.min(best);
        cur = n.parent;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Policy, PolicyBackend};
    use crate::seed::rng_from_seed;
    use crate::tasks::function_task;

    fn node(visits: u64, value: f64) -> MctsNode {
        MctsNode {
            id: 1,
            parent: Some(0),
            point: Some(vec![0.0, 0.0]),
            loss: Some(value),
            step: Some(1),
            visits,
            value,
            children: Vec::new(),
            expansions: 0,
        }
    }

    #[test]
    fn ucb1_examples() {
        let c = std::f64::consts::SQRT_2;
        assert_eq!(ucb1_score(&node(0, 1.0), 10, c, (0.0, 1.0)), f64::INFINITY);
        let s = ucb1_score(&node(5, 0.5), 10, c, (0.0, 1.0));
        assert!((s - 1.4597).abs() < 1e-4, "{s}");
        assert_eq!(ucb1_score(&node(5, 0.25), 10, 0.0, (0.0, 1.0)), 0.75);
        assert_eq!(ucb1_score(&node(5, 3.0), 10, 0.0, (3.0, 3.0)), 0.5);
    }

    #[test]
    fn backprop_takes_min_child() {
        let mut tree = MctsTree::new();
        let a = tree.add_child(MctsTree::ROOT, vec![0.1, 0.1], 0.7, 1);
        tree.nodes[MctsTree::ROOT].expansions += 1;
        mcts_backprop(&mut tree, MctsTree::ROOT, &[a]);
        let kids: Vec<usize> = [0.9, 0.2, 0.5]
            .iter()
            .enumerate()
            .map(|(i, &l)| tree.add_child(a, vec![i as f64, 0.0], l, i + 2))
            .collect();
        tree.nodes[a].expansions += 1;
        mcts_backprop(&mut tree, a, &kids);
        assert_eq!(tree.node(a).value, 0.2);
        assert_eq!(tree.node(MctsTree::ROOT).value, 0.2);
        assert_eq!(tree.node(MctsTree::ROOT).visits, 2);
        tree.audit().unwrap();
    }

    #[test]
    fn truncates_to_remaining_budget() {
        let task = function_task(1, 7);
        let backend = PolicyBackend::new(Policy::UniformRandom).unwrap();
        let mut eval = Evaluator::new(&task, 3);
        let mut tree = MctsTree::new();
        let kids = mcts_expand(
            &mut tree,
            MctsTree::ROOT,
            &backend,
            &RequestParams::default(),
            PromptTemplate::Function2D,
            &mut eval,
            &MctsConfig::default(),
            &mut rng_from_seed(0),
        )
        .unwrap();
        assert_eq!(kids.len(), 3);
        assert_eq!(eval.remaining(), 0);
    }

    #[test]
    fn path_prompt_has_depth_lines() {
        let mut tree = MctsTree::new();
        let a = tree.add_child(MctsTree::ROOT, vec![0.1, 0.1], 0.7, 1);
        let b = tree.add_child(a, vec![0.2, 0.3], 0.4, 2);
        tree.add_child(MctsTree::ROOT, vec![0.9, 0.9], 0.1, 3);
        let path = tree.path_history(b);
        assert_eq!(path.len(), 2);
        let prompt = render_with(PromptTemplate::Function2D, &Bounds::unit_square(), &path, 4, 0.1);
        assert!(prompt.contains("\n1 | 0.1 | 0.1 | 0.7\n2 | 0.2 | 0.3 | 0.4\nImportant:"));
        assert!(prompt.contains("Current best loss: 0.1."));
    }
}
