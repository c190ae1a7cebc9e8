//! Ordered evaluation log shared by every optimizer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 1-indexed trial number.
    pub step: usize,
    pub point: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History {
    observations: Vec<Observation>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends with the next step number and returns it.
    pub fn push(&mut self, point: Vec<f64>, loss: f64) -> usize {
        let step = self.observations.len() + 1;
        self.observations.push(Observation { step, point, loss });
        step
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn as_slice(&self) -> &[Observation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    pub fn last(&self) -> Option<&Observation> {
        self.observations.last()
    }

    /// First observation attaining the minimum loss.
    pub fn best(&self) -> Option<&Observation> {
        self.observations
            .iter()
            .reduce(|best, o| if o.loss < best.loss { o } else { best })
    }

    /// Minimum loss, `+inf` when empty.
    pub fn best_loss(&self) -> f64 {
        self.best().map_or(f64::INFINITY, |o| o.loss)
    }

    /// Exact tuple match against any recorded point.
    pub fn contains(&self, point: &[f64]) -> bool {
        self.observations.iter().any(|o| o.point == point)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.observations.iter().map(|o| o.point.clone()).collect()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.loss).collect()
    }
}

impl<'a> IntoIterator for &'a History {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}
