//! Noiseless BBOB functions with instance-seeded shifts, offsets and
//! rotations.
//!
//! The transformations (`T_osz`, `T_asy`, `Lambda^alpha`, `f_pen`) follow the
//! standard BBOB definitions. Instance data comes from a seeded stream, not
//! from the COCO generator, so values are not bit-identical to the reference
//! suite.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::rng_from;

/// Function ids implemented here.
pub const BBOB_FUNCTIONS: [u32; 17] = [1, 3, 4, 6, 9, 10, 11, 13, 14, 15, 17, 18, 19, 20, 21, 22, 24];

#[derive(Debug, Clone)]
struct Peak {
    center: Vec<f64>,
    weight: f64,
    /// Diagonal of the (already scaled and permuted) conditioning matrix.
    scales: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BbobFunction {
    id: u32,
    dim: usize,
    x_opt: Vec<f64>,
    f_opt: f64,
    r: DMatrix<f64>,
    q: DMatrix<f64>,
    signs: Vec<f64>,
    peaks: Vec<Peak>,
}

impl BbobFunction {
    pub fn new(id: u32, instance: u32, dim: usize) -> Result<Self> {
        if !BBOB_FUNCTIONS.contains(&id) {
            return Err(Error::UnsupportedFunction(id));
        }
        if dim < 2 {
            return Err(Error::ContractViolation("BBOB needs dim >= 2".into()));
        }
        let mut rng = rng_from(&["bbob", &id.to_string(), &instance.to_string(), &dim.to_string()]);
        let mut x_opt: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
        let cauchy = (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan();
        let f_opt = ((100.0 * cauchy).round() / 100.0).clamp(-1000.0, 1000.0);
        let r = random_rotation(dim, &mut rng);
        let q = random_rotation(dim, &mut rng);
        let signs: Vec<f64> = (0..dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();

        let mut peaks = Vec::new();
        match id {
            4 => {
                for x in x_opt.iter_mut().step_by(2) {
                    *x = x.abs();
                }
            }
            9 | 19 => {
                let scale = (dim as f64).sqrt() / 8.0;
                let c = scale.max(1.0);
                let target = DVector::from_element(dim, 0.5 / c);
                x_opt = (r.transpose() * target).iter().copied().collect();
            }
            20 => x_opt = signs.iter().map(|s| s * 4.2096874633 / 2.0).collect(),
            21 | 22 => {
                let (count, top_alpha, outer, inner) = if id == 21 {
                    (101usize, 1000.0f64, 5.0, 4.0)
                } else {
                    (21usize, 1.0e6f64, 4.9, 3.92)
                };
                let rest = count - 1;
                let mut alphas: Vec<f64> = (0..rest)
                    .map(|j| 1000f64.powf(2.0 * j as f64 / (rest - 1) as f64))
                    .collect();
                alphas.shuffle(&mut rng);
                for p in 0..count {
                    let (alpha, weight, half) = if p == 0 {
                        (top_alpha, 10.0, inner)
                    } else {
                        (
                            alphas[p - 1],
                            1.1 + 8.0 * (p - 1) as f64 / (rest - 1) as f64,
                            outer,
                        )
                    };
                    let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-half..half)).collect();
                    let mut scales: Vec<f64> = (0..dim)
                        .map(|j| alpha.powf(0.5 * j as f64 / (dim - 1) as f64) / alpha.powf(0.25))
                        .collect();
                    scales.shuffle(&mut rng);
                    peaks.push(Peak {
                        center,
                        weight,
                        scales,
                    });
                }
                x_opt = peaks[0].center.clone();
            }
            24 => x_opt = signs.iter().map(|s| s * 2.5 / 2.0).collect(),
            _ => {}
        }
        Ok(Self {
            id,
            dim,
            x_opt,
            f_opt,
            r,
            q,
            signs,
            peaks,
        })
    }

    /// Overrides shift and offset. Only meaningful for functions whose
    /// optimum is a plain shift (everything except 9, 19, 20, 21, 22, 24).
    pub fn with_shift(mut self, x_opt: Vec<f64>, f_opt: f64) -> Self {
        assert_eq!(x_opt.len(), self.dim);
        self.x_opt = x_opt;
        self.f_opt = f_opt;
        self
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn x_opt(&self) -> &[f64] {
        &self.x_opt
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let df = d as f64;
        let shifted: Vec<f64> = x.iter().zip(&self.x_opt).map(|(a, o)| a - o).collect();
        let raw = match self.id {
            1 => shifted.iter().map(|z| z * z).sum(),
            3 => {
                let mut z: Vec<f64> = shifted.iter().map(|&v| t_osz(v)).collect();
                t_asy(&mut z, 0.2);
                scale_lambda(&mut z, 10.0);
                rastrigin(&z)
            }
            4 => {
                let z: Vec<f64> = shifted
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let t = t_osz(v);
                        let mut s = 10f64.powf(0.5 * i as f64 / (df - 1.0));
                        if t > 0.0 && i % 2 == 0 {
                            s *= 10.0;
                        }
                        s * t
                    })
                    .collect();
                rastrigin(&z) + 100.0 * f_pen(x)
            }
            6 => {
                let mut z = self.rotate(&self.r, &shifted);
                scale_lambda(&mut z, 10.0);
                let z = self.rotate(&self.q, &z);
                let sum: f64 = z
                    .iter()
                    .zip(&self.x_opt)
                    .map(|(zi, oi)| {
                        let s = if zi * oi > 0.0 { 100.0 } else { 1.0 };
                        (s * zi).powi(2)
                    })
                    .sum();
                t_osz(sum).powf(0.9)
            }
            9 | 19 => {
                let c = ((df).sqrt() / 8.0).max(1.0);
                let z: Vec<f64> = self.rotate(&self.r, x).iter().map(|v| c * v + 0.5).collect();
                let terms = z
                    .windows(2)
                    .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2));
                if self.id == 9 {
                    terms.sum()
                } else {
                    10.0 / (df - 1.0) * terms.map(|s| s / 4000.0 - s.cos()).sum::<f64>() + 10.0
                }
            }
            10 | 11 => {
                let z: Vec<f64> = self.rotate(&self.r, &shifted).into_iter().map(t_osz).collect();
                if self.id == 10 {
                    z.iter()
                        .enumerate()
                        .map(|(i, v)| 10f64.powf(6.0 * i as f64 / (df - 1.0)) * v * v)
                        .sum()
                } else {
                    1e6 * z[0] * z[0] + z[1..].iter().map(|v| v * v).sum::<f64>()
                }
            }
            13 => {
                let mut z = self.rotate(&self.r, &shifted);
                scale_lambda(&mut z, 10.0);
                let z = self.rotate(&self.q, &z);
                z[0] * z[0] + 100.0 * z[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
            }
            14 => {
                let z = self.rotate(&self.r, &shifted);
                z.iter()
                    .enumerate()
                    .map(|(i, v)| v.abs().powf(2.0 + 4.0 * i as f64 / (df - 1.0)))
                    .sum::<f64>()
                    .sqrt()
            }
            15 => {
                let mut z: Vec<f64> = self.rotate(&self.r, &shifted).into_iter().map(t_osz).collect();
                t_asy(&mut z, 0.2);
                let mut z = self.rotate(&self.q, &z);
                scale_lambda(&mut z, 10.0);
                rastrigin(&self.rotate(&self.r, &z))
            }
            17 | 18 => {
                let alpha = if self.id == 17 { 10.0 } else { 1000.0 };
                let mut z = self.rotate(&self.r, &shifted);
                t_asy(&mut z, 0.5);
                let mut z = self.rotate(&self.q, &z);
                scale_lambda(&mut z, alpha);
                let mean = z
                    .windows(2)
                    .map(|w| {
                        let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
                        s.sqrt() + s.sqrt() * (50.0 * s.powf(0.2)).sin().powi(2)
                    })
                    .sum::<f64>()
                    / (df - 1.0);
                mean * mean + 10.0 * f_pen(x)
            }
            20 => {
                let two_abs: Vec<f64> = self.x_opt.iter().map(|o| 2.0 * o.abs()).collect();
                let xh: Vec<f64> = x.iter().zip(&self.signs).map(|(v, s)| 2.0 * s * v).collect();
                let mut zh = xh.clone();
                for i in 0..d - 1 {
                    zh[i + 1] = xh[i + 1] + 0.25 * (xh[i] - two_abs[i]);
                }
                let mut diff: Vec<f64> = zh.iter().zip(&two_abs).map(|(a, b)| a - b).collect();
                scale_lambda(&mut diff, 10.0);
                let z: Vec<f64> = diff.iter().zip(&two_abs).map(|(a, b)| 100.0 * (a + b)).collect();
                let scaled: Vec<f64> = z.iter().map(|v| v / 100.0).collect();
                -z.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>() / (100.0 * df)
                    + 4.189828872724339
                    + 100.0 * f_pen(&scaled)
            }
            21 | 22 => {
                let best = self
                    .peaks
                    .iter()
                    .map(|p| {
                        let diff: Vec<f64> = x.iter().zip(&p.center).map(|(a, c)| a - c).collect();
                        let u = self.rotate(&self.r, &diff);
                        let quad: f64 = u.iter().zip(&p.scales).map(|(v, s)| s * v * v).sum();
                        p.weight * (-quad / (2.0 * df)).exp()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                t_osz(10.0 - best).powi(2) + f_pen(x)
            }
            24 => {
                let mu0 = 2.5;
                let s = 1.0 - 1.0 / (2.0 * (df + 20.0).sqrt() - 8.2);
                let mu1 = -((mu0 * mu0 - 1.0) / s).sqrt();
                let xh: Vec<f64> = x.iter().zip(&self.signs).map(|(v, sg)| 2.0 * sg * v).collect();
                let centered: Vec<f64> = xh.iter().map(|v| v - mu0).collect();
                let mut z = self.rotate(&self.r, &centered);
                scale_lambda(&mut z, 100.0);
                let z = self.rotate(&self.q, &z);
                let near: f64 = centered.iter().map(|v| v * v).sum();
                let far: f64 = df + s * xh.iter().map(|v| (v - mu1).powi(2)).sum::<f64>();
                let cos_sum: f64 = z.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum();
                near.min(far) + 10.0 * (df - cos_sum) + 1e4 * f_pen(x)
            }
            _ => unreachable!("validated in constructor"),
        };
        raw + self.f_opt
    }

    fn rotate(&self, m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (m * DVector::from_column_slice(v)).iter().copied().collect()
    }
}

fn random_rotation(dim: usize, rng: &mut crate::seed::Rng) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gauss.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn t_osz(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let xh = v.abs().ln();
    let (c1, c2) = if v > 0.0 { (10.0, 7.9) } else { (5.5, 3.1) };
    v.signum() * (xh + 0.049 * ((c1 * xh).sin() + (c2 * xh).sin())).exp()
}

fn t_asy(z: &mut [f64], beta: f64) {
    let d = z.len() as f64;
    for (i, v) in z.iter_mut().enumerate() {
        if *v > 0.0 {
            *v = v.powf(1.0 + beta * i as f64 / (d - 1.0) * v.sqrt());
        }
    }
}

fn scale_lambda(z: &mut [f64], alpha: f64) {
    let d = z.len() as f64;
    for (i, v) in z.iter_mut().enumerate() {
        *v *= alpha.powf(0.5 * i as f64 / (d - 1.0));
    }
}

fn rastrigin(z: &[f64]) -> f64 {
    let cos_sum: f64 = z.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum();
    10.0 * (z.len() as f64 - cos_sum) + z.iter().map(|v| v * v).sum::<f64>()
}

fn f_pen(x: &[f64]) -> f64 {
    x.iter().map(|v| (v.abs() - 5.0).max(0.0).powi(2)).sum()
}
