//! Trajectory statistics: best step, coverage, normalized path length and
//! pairwise win counts.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::seed::rng_from_seed;
use crate::tasks::Bounds;

/// Paths shorter than this have no defined normalized length.
pub const MIN_PATH_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub bounds: Bounds,
}

impl Trajectory {
    pub fn new(points: Vec<Vec<f64>>, losses: Vec<f64>, bounds: Bounds) -> Result<Self> {
        if points.is_empty() || points.len() != losses.len() {
            return Err(contract(format!(
                "trajectory needs K >= 1 points with matching losses, got {} and {}",
                points.len(),
                losses.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != bounds.dim()) {
            return Err(contract(format!("point {p:?} has wrong dimension")));
        }
        Ok(Self {
            points,
            losses,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub best_step: usize,
    pub best_loss: f64,
    /// `(k, Cov_k)` at k = 5, 10, ..., K.
    pub coverage_series: Vec<(usize, f64)>,
    /// Coverage of the full trajectory.
    pub coverage_final: f64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub clamped_count: usize,
    pub fallback_count: usize,
    /// False when some `Cov_k` in the series dropped below its predecessor.
    pub coverage_monotone: bool,
}

impl MetricSummary {
    pub fn compute(traj: &Trajectory, clamped_count: usize, fallback_count: usize) -> Self {
        let best = best_step(&traj.losses);
        let series = coverage_dynamics(traj);
        Self {
            best_step: best,
            best_loss: traj.losses[best - 1],
            coverage_monotone: series.windows(2).all(|w| w[1].1 >= w[0].1),
            coverage_series: series,
            coverage_final: coverage(traj, traj.len()),
            l: norm_traj_length(&traj.points),
            clamped_count,
            fallback_count,
        }
    }
}

/// 1-indexed position of the first minimum.
pub fn best_step(losses: &[f64]) -> usize {
    assert!(!losses.is_empty(), "best_step of an empty trajectory");
    let mut best = 0;
    for (i, l) in losses.iter().enumerate() {
        if *l < losses[best] {
            best = i;
        }
    }
    best + 1
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Volume of a d-ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2 pi / d * V_{d-2} for the unit ball.
    let mut unit = if dim.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut d = if dim.is_multiple_of(2) { 2 } else { 3 };
    while d <= dim {
        unit *= 2.0 * PI / d as f64;
        d += 2;
    }
    unit * r.powi(dim as i32)
}

/// Percentage of the box volume covered by the centroid-centered ball that
/// encloses the first `k` points, clipped to 100.
pub fn coverage(traj: &Trajectory, k: usize) -> f64 {
    assert!(k >= 1 && k <= traj.len(), "coverage needs 1 <= k <= K");
    let pts = &traj.points[..k];
    let dim = traj.bounds.dim();
    let centroid: Vec<f64> = (0..dim)
        .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / k as f64)
        .collect();
    let r = pts.iter().map(|p| dist(p, &centroid)).fold(0.0, f64::max);
    let volume = if dim == 2 { PI * r * r } else { ball_volume(dim, r) };
    (100.0 * volume / traj.bounds.volume()).min(100.0)
}

/// `Cov_k` at k = 5, 10, ..., K.
pub fn coverage_dynamics(traj: &Trajectory) -> Vec<(usize, f64)> {
    (5..=traj.len())
        .step_by(5)
        .map(|k| (k, coverage(traj, k)))
        .collect()
}

/// End-to-end displacement over total path length; `None` below
/// [`MIN_PATH_LENGTH`] or with fewer than two points.
pub fn norm_traj_length(points: &[Vec<f64>]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let path: f64 = points.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    if path < MIN_PATH_LENGTH {
        return None;
    }
    Some(dist(&points[0], &points[points.len() - 1]) / path)
}

/// Mean L over `walks` isotropic random walks of `k` points with iid
/// standard Gaussian steps in `dim` dimensions.
pub fn random_walk_reference(walks: usize, k: usize, dim: usize, seed: u64) -> f64 {
    assert!(walks >= 1 && k >= 2 && dim >= 1);
    let mut rng = rng_from_seed(seed);
    let mut total = 0.0;
    let mut points = vec![vec![0.0; dim]; k];
    for _ in 0..walks {
        for i in 1..k {
            let (done, rest) = points.split_at_mut(i);
            for (x, prev) in rest[0].iter_mut().zip(&done[i - 1]) {
                *x = prev + rng.sample::<f64, _>(StandardNormal);
            }
        }
        total += norm_traj_length(&points).unwrap_or(0.0);
    }
    total / walks as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinCounts {
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
}

pub fn pairwise_wins(a: &[f64], b: &[f64]) -> Result<WinCounts> {
    if a.len() != b.len() {
        return Err(contract(format!(
            "pairwise_wins over {} and {} tasks",
            a.len(),
            b.len()
        )));
    }
    let mut out = WinCounts::default();
    for (x, y) in a.iter().zip(b) {
        if x < y {
            out.a_wins += 1;
        } else if y < x {
            out.b_wins += 1;
        } else {
            out.ties += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: Vec<Vec<f64>>) -> Trajectory {
        let n = points.len();
        Trajectory::new(points, vec![0.0; n], Bounds::unit_square()).unwrap()
    }

    #[test]
    fn best_step_examples() {
        assert_eq!(best_step(&[5.0, 3.0, 3.0, 1.0, 2.0]), 4);
        assert_eq!(best_step(&[4.0, 3.0, 2.0, 1.0]), 4);
        assert_eq!(best_step(&[1.0, 1.0, 1.0]), 1);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage(&traj(vec![vec![0.3, 0.3]]), 1), 0.0);
        let two = traj(vec![vec![0.25, 0.5], vec![0.75, 0.5]]);
        assert!((coverage(&two, 2) - 100.0 * PI * 0.0625).abs() < 1e-12);
        let corners = traj(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ]);
        assert_eq!(coverage(&corners, 4), 100.0);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(2, 1.0) - PI).abs() < 1e-15);
        assert!((ball_volume(3, 1.0) - 4.0 / 3.0 * PI).abs() < 1e-14);
        assert!((ball_volume(5, 2.0) - 8.0 * PI * PI / 15.0 * 32.0).abs() < 1e-10);
        assert_eq!(ball_volume(1, 0.5), 1.0);
    }

    #[test]
    fn length_examples() {
        let line = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]];
        assert_eq!(norm_traj_length(&line), Some(1.0));
        let back = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(norm_traj_length(&back), Some(0.0));
        assert_eq!(norm_traj_length(&[vec![0.2, 0.2], vec![0.2, 0.2]]), None);
    }

    #[test]
    fn wins_examples() {
        let w = pairwise_wins(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((w.a_wins, w.b_wins, w.ties), (1, 1, 1));
        let w = pairwise_wins(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(w.ties, 2);
        assert!(pairwise_wins(&[1.0], &[]).is_err());
    }

    #[test]
    fn random_walk_reference_near_inverse_sqrt_k() {
        let l = random_walk_reference(2000, 50, 2, 1);
        assert!((0.11..=0.17).contains(&l), "{l}");
    }

    #[test]
    fn dynamics_every_five() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0, 0.5]).collect();
        let series = coverage_dynamics(&traj(pts));
        let ks: Vec<usize> = series.iter().map(|(k, _)| *k).collect();
        assert_eq!(ks, (1..=10).map(|i| i * 5).collect::<Vec<_>>());
    }
}
