//! Damped harmonic oscillator identification: recover stiffness `k` and
//! damping `b` of `x'' + b x' + k x = 0` from a sampled trajectory.

use rand::Rng as _;

use super::Bounds;
use crate::seed::Rng;

pub const K_RANGE: (f64, f64) = (0.5, 10.0);
pub const B_RANGE: (f64, f64) = (0.05, 2.0);

const DT: f64 = 0.01;
const HORIZON: f64 = 10.0;
const SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Oscillator {
    pub k_true: f64,
    pub b_true: f64,
    reference: Vec<f64>,
}

impl Oscillator {
    pub fn new(k_true: f64, b_true: f64) -> Self {
        Self {
            k_true,
            b_true,
            reference: simulate(k_true, b_true),
        }
    }

    /// Hidden truth drawn from the inner 80% of each parameter range.
    pub fn generate(rng: &mut Rng) -> Self {
        let inner = |(lo, hi): (f64, f64)| {
            let margin = 0.1 * (hi - lo);
            (lo + margin, hi - margin)
        };
        let (klo, khi) = inner(K_RANGE);
        let (blo, bhi) = inner(B_RANGE);
        Self::new(rng.random_range(klo..khi), rng.random_range(blo..bhi))
    }

    pub fn bounds() -> Bounds {
        Bounds::new(vec![K_RANGE.0, B_RANGE.0], vec![K_RANGE.1, B_RANGE.1]).expect("valid oscillator bounds")
    }

    /// Mean squared error between the candidate and hidden trajectories.
    pub fn loss(&self, k: f64, b: f64) -> f64 {
        let candidate = simulate(k, b);
        candidate
            .iter()
            .zip(&self.reference)
            .map(|(a, r)| (a - r).powi(2))
            .sum::<f64>()
            / SAMPLES as f64
    }
}

/// Position at t = 0.1, 0.2, ..., 10.0 from x(0) = 1, x'(0) = 0, integrated
/// with fixed-step RK4.
pub fn simulate(k: f64, b: f64) -> Vec<f64> {
    let steps = (HORIZON / DT).round() as usize;
    let stride = steps / SAMPLES;
    let accel = |x: f64, v: f64| -b * v - k * x;
    let (mut x, mut v) = (1.0f64, 0.0f64);
    let mut out = Vec::with_capacity(SAMPLES);
    for step in 1..=steps {
        let (k1x, k1v) = (v, accel(x, v));
        let (k2x, k2v) = (v + 0.5 * DT * k1v, accel(x + 0.5 * DT * k1x, v + 0.5 * DT * k1v));
        let (k3x, k3v) = (v + 0.5 * DT * k2v, accel(x + 0.5 * DT * k2x, v + 0.5 * DT * k2v));
        let (k4x, k4v) = (v + DT * k3v, accel(x + DT * k3x, v + DT * k3v));
        x += DT / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += DT / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if step % stride == 0 {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form underdamped solution for x(0)=1, x'(0)=0.
    fn analytic(k: f64, b: f64, t: f64) -> f64 {
        let gamma = b / 2.0;
        let omega = (k - gamma * gamma).sqrt();
        (-gamma * t).exp() * ((omega * t).cos() + gamma / omega * (omega * t).sin())
    }

    #[test]
    fn rk4_tracks_closed_form() {
        let traj = simulate(4.0, 0.5);
        assert_eq!(traj.len(), 100);
        for (i, x) in traj.iter().enumerate() {
            let t = 0.1 * (i + 1) as f64;
            assert!((x - analytic(4.0, 0.5, t)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn loss_vanishes_at_truth_and_grows_off_it() {
        let osc = Oscillator::new(4.0, 0.8);
        assert!(osc.loss(4.0, 0.8).abs() <= 1e-12);
        // Independent check: compare closed-form trajectories directly.
        let oracle: f64 = (1..=100)
            .map(|i| {
                let t = 0.1 * i as f64;
                (analytic(4.5, 0.8, t) - analytic(4.0, 0.8, t)).powi(2)
            })
            .sum::<f64>()
            / 100.0;
        let loss = osc.loss(4.5, 0.8);
        assert!(loss > 0.0);
        assert!((loss - oracle).abs() < 1e-6 * oracle.max(1.0));
        assert_eq!(osc.loss(4.5, 0.8), loss);
    }
}
