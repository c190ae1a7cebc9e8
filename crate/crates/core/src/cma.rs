//! CMA-ES with an ask/tell interface.
//!
//! Learning rates and recombination weights are the standard defaults
//! (positive weights on the best `mu = lambda / 2` samples, rank-one plus
//! rank-mu covariance update, cumulative step-size adaptation). Candidates
//! supplied from outside the sampler are accepted in `tell` with
//! `injected = true`; their Mahalanobis displacement from the mean is
//! clipped to `2 * sqrt(dim)` before they enter any update.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::seed::{rng_from_seed, Rng};
use crate::tasks::Bounds;

/// Gaussian search state. Serializes to a self-contained snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaState {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub cov: Vec<Vec<f64>>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub generation: u64,
    pub lambda: usize,
    pub weights: Vec<f64>,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: Vec<f64>,
    pub injected: bool,
}

/// One asked population, optionally with its losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub candidates: Vec<Candidate>,
    pub losses: Option<Vec<f64>>,
}

impl Generation {
    /// Replaces candidate `index` with an externally chosen point.
    pub fn inject(&mut self, index: usize, point: Vec<f64>) {
        self.candidates[index] = Candidate {
            point,
            injected: true,
        };
    }

    /// Keeps only the first `len` candidates (used when the evaluation
    /// budget ends mid-generation).
    pub fn truncate(&mut self, len: usize) {
        self.candidates.truncate(len);
        if let Some(l) = &mut self.losses {
            l.truncate(len);
        }
    }
}

/// Strategy constants derived from the dimension and weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaParams {
    pub mu: usize,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize, weights: &[f64]) -> Self {
        let n = dim as f64;
        let positive: Vec<f64> = weights.iter().copied().filter(|w| *w > 0.0).collect();
        let mu = positive.len();
        let mu_eff = positive.iter().sum::<f64>().powi(2) / positive.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self {
            mu,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

pub fn default_lambda(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

/// Log-linear positive weights on the best half, zero elsewhere.
pub fn default_weights(lambda: usize) -> Vec<f64> {
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=lambda)
        .map(|i| {
            if i <= mu {
                ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Eigendecomposition `C = B diag(eig) B^T`.
struct Factor {
    basis: DMatrix<f64>,
    eig: DVector<f64>,
}

impl Factor {
    fn inv_sqrt(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.eig.map(|e| 1.0 / e.sqrt()));
        &self.basis * d * self.basis.transpose()
    }
}

impl CmaState {
    /// Mean uniform in the bounds, `sigma = 0.3 * mean axis width`, identity
    /// covariance.
    pub fn init(bounds: &Bounds, rng: &mut Rng) -> Self {
        let mean = bounds.sample_uniform(rng);
        Self::with_mean(bounds.clone(), mean, 0.3 * bounds.mean_width())
    }

    pub fn with_mean(bounds: Bounds, mean: Vec<f64>, sigma: f64) -> Self {
        let dim = bounds.dim();
        assert_eq!(mean.len(), dim, "mean dimension");
        assert!(sigma > 0.0, "sigma must be positive");
        let lambda = default_lambda(dim);
        let cov = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            mean,
            sigma,
            cov,
            path_sigma: vec![0.0; dim],
            path_c: vec![0.0; dim],
            generation: 0,
            lambda,
            weights: default_weights(lambda),
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn params(&self) -> CmaParams {
        CmaParams::new(self.dim(), &self.weights)
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.cov[i][j])
    }

    fn factor(&self) -> Result<Factor> {
        let eigen = SymmetricEigen::new(self.cov_matrix());
        if eigen.eigenvalues.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(Error::NumericalBreakdown(format!(
                "covariance not positive definite at generation {}",
                self.generation
            )));
        }
        Ok(Factor {
            basis: eigen.eigenvectors,
            eig: eigen.eigenvalues,
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.factor()?.eig.iter().copied().collect())
    }

    /// Samples `lambda` candidates `m + sigma * B D z`, clamped to the bounds.
    pub fn ask(&self, rng: &mut Rng) -> Result<Generation> {
        let f = self.factor()?;
        let scale = DMatrix::from_diagonal(&f.eig.map(f64::sqrt));
        let bd = &f.basis * scale;
        let n = self.dim();
        let candidates = (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &bd * z;
                let raw: Vec<f64> = (0..n).map(|i| self.mean[i] + self.sigma * y[i]).collect();
                Candidate {
                    point: self.bounds.clamp(&raw).0,
                    injected: false,
                }
            })
            .collect();
        Ok(Generation {
            candidates,
            losses: None,
        })
    }

    /// Rank-based update from an evaluated generation. Pure: the receiver is
    /// left untouched and the next state returned.
    ///
    /// A generation shorter than `lambda` (budget ran out mid-population)
    /// is ranked on its evaluated candidates only, and the ranked list is
    /// repeated to fill the remaining recombination slots.
    pub fn tell(&self, gen: &Generation) -> Result<CmaState> {
        let losses = gen
            .losses
            .as_ref()
            .ok_or_else(|| contract("tell needs an evaluated generation"))?;
        if losses.len() != gen.candidates.len() {
            return Err(contract(format!(
                "{} losses for {} candidates",
                losses.len(),
                gen.candidates.len()
            )));
        }
        if gen.candidates.is_empty() || gen.candidates.len() > self.lambda {
            return Err(contract(format!(
                "generation size {} outside 1..={}",
                gen.candidates.len(),
                self.lambda
            )));
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(contract("non-finite loss in generation"));
        }
        let n = self.dim();
        let nf = n as f64;
        let p = self.params();
        let f = self.factor()?;
        let c_inv_sqrt = f.inv_sqrt();
        let mean = DVector::from_column_slice(&self.mean);
        let clip = 2.0 * nf.sqrt();

        let steps: Vec<DVector<f64>> = gen
            .candidates
            .iter()
            .map(|c| {
                let mut y = (DVector::from_column_slice(&c.point) - &mean) / self.sigma;
                if c.injected {
                    let maha = (&c_inv_sqrt * &y).norm();
                    if maha > clip {
                        y *= clip / maha;
                    }
                }
                y
            })
            .collect();

        let mut order: Vec<usize> = (0..steps.len()).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
        let ranked: Vec<&DVector<f64>> = (0..self.lambda).map(|r| &steps[order[r % order.len()]]).collect();

        let mut y_w = DVector::zeros(n);
        for (w, y) in self.weights.iter().zip(&ranked) {
            if *w > 0.0 {
                y_w += *y * *w;
            }
        }
        let new_mean = &mean + &y_w * self.sigma;

        let ps = DVector::from_column_slice(&self.path_sigma) * (1.0 - p.c_sigma)
            + (&c_inv_sqrt * &y_w) * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        let ps_norm = ps.norm();
        let new_sigma = self.sigma * ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();

        let gens = (self.generation + 1) as i32;
        let h_sigma =
            ps_norm / (1.0 - (1.0 - p.c_sigma).powi(2 * gens)).sqrt() < (1.4 + 2.0 / (nf + 1.0)) * p.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        let pc = DVector::from_column_slice(&self.path_c) * (1.0 - p.c_c)
            + &y_w * (h * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());

        let delta_h = (1.0 - h) * p.c_c * (2.0 - p.c_c);
        let weight_sum: f64 = self.weights.iter().filter(|w| **w > 0.0).sum();
        let mut cov = self.cov_matrix() * (1.0 + p.c_1 * delta_h - p.c_1 - p.c_mu * weight_sum);
        cov += (&pc * pc.transpose()) * p.c_1;
        for (w, y) in self.weights.iter().zip(&ranked) {
            if *w > 0.0 {
                cov += (*y * y.transpose()) * (p.c_mu * w);
            }
        }
        let cov = (&cov + cov.transpose()) * 0.5;

        let next = CmaState {
            mean: new_mean.iter().copied().collect(),
            sigma: new_sigma,
            cov: (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect(),
            path_sigma: ps.iter().copied().collect(),
            path_c: pc.iter().copied().collect(),
            generation: self.generation + 1,
            lambda: self.lambda,
            weights: self.weights.clone(),
            bounds: self.bounds.clone(),
        };
        if !next.sigma.is_finite() || next.sigma <= 0.0 {
            return Err(Error::NumericalBreakdown(format!(
                "step size became {}",
                next.sigma
            )));
        }
        next.factor()?;
        Ok(next)
    }

    /// Differential entropy (nats) of `N(m, sigma^2 C)`.
    pub fn entropy(&self) -> Result<f64> {
        let chol = self
            .cov_matrix()
            .cholesky()
            .ok_or_else(|| Error::NumericalBreakdown("covariance Cholesky factorization failed".into()))?;
        let n = self.dim() as f64;
        let log_det_c: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(0.5 * n * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
            + n * self.sigma.ln()
            + 0.5 * log_det_c)
    }
}

/// Fresh state with its mean drawn from a dedicated seed.
pub fn cma_init(dim: usize, bounds: &Bounds, seed: u64) -> Result<CmaState> {
    if dim != bounds.dim() || dim == 0 {
        return Err(contract(format!(
            "dimension {dim} does not match bounds {}",
            bounds.dim()
        )));
    }
    Ok(CmaState::init(bounds, &mut rng_from_seed(seed)))
}
