//! Synthetic multi-minimum landscapes on the unit square: a sum of negated
//! Gaussian bumps over a shallow quadratic bowl.

use rand::Rng as _;

use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub width: f64,
}

impl Bump {
    fn value(&self, x: &[f64]) -> f64 {
        -self.amplitude * (-self.sq_dist(x) / (2.0 * self.width * self.width)).exp()
    }

    fn sq_dist(&self, x: &[f64]) -> f64 {
        (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)
    }
}

/// Quadratic term `weight * |x - center|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bowl {
    pub center: [f64; 2],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    bumps: Vec<Bump>,
    bowl: Option<Bowl>,
    optimum: Option<([f64; 2], f64)>,
}

const CENTER_RANGE: (f64, f64) = (0.1, 0.9);
const MIN_CENTER_GAP: f64 = 0.15;
const WIDTH_RANGE: (f64, f64) = (0.04, 0.12);
const AMPLITUDE_RANGE: (f64, f64) = (0.5, 1.5);
const BOWL_WEIGHT: f64 = 0.3;

impl GaussianMixture {
    pub fn new(bumps: Vec<Bump>, bowl: Option<Bowl>) -> Self {
        assert!(!bumps.is_empty(), "mixture needs at least one bump");
        let mut mixture = Self {
            bumps,
            bowl,
            optimum: None,
        };
        mixture.optimum = mixture.locate_optimum();
        mixture
    }

    /// 3 to 8 bumps with rejection-spaced centers.
    pub fn generate(rng: &mut Rng) -> Self {
        let count = rng.random_range(3..=8usize);
        let mut bumps: Vec<Bump> = Vec::with_capacity(count);
        while bumps.len() < count {
            let mut center = [0.0; 2];
            for _ in 0..200 {
                center = [
                    rng.random_range(CENTER_RANGE.0..CENTER_RANGE.1),
                    rng.random_range(CENTER_RANGE.0..CENTER_RANGE.1),
                ];
                let clear = bumps.iter().all(|b| b.sq_dist(&center).sqrt() >= MIN_CENTER_GAP);
                if clear {
                    break;
                }
            }
            bumps.push(Bump {
                center,
                amplitude: rng.random_range(AMPLITUDE_RANGE.0..AMPLITUDE_RANGE.1),
                width: rng.random_range(WIDTH_RANGE.0..WIDTH_RANGE.1),
            });
        }
        let bowl = Bowl {
            center: [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)],
            weight: BOWL_WEIGHT,
        };
        Self::new(bumps, Some(bowl))
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn bowl(&self) -> Option<&Bowl> {
        self.bowl.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let bumps: f64 = self.bumps.iter().map(|b| b.value(x)).sum();
        let bowl = self.bowl.as_ref().map_or(0.0, |w| {
            w.weight * ((x[0] - w.center[0]).powi(2) + (x[1] - w.center[1]).powi(2))
        });
        bumps + bowl
    }

    /// Known minimum value; present only when the bumps are well separated,
    /// so that the global minimum sits in one of the refined bump basins.
    pub fn optimum(&self) -> Option<f64> {
        self.optimum.map(|(_, v)| v)
    }

    pub fn minimizer(&self) -> Option<[f64; 2]> {
        self.optimum.map(|(p, _)| p)
    }

    fn well_separated(&self) -> bool {
        self.bumps.iter().enumerate().all(|(i, a)| {
            self.bumps[i + 1..]
                .iter()
                .all(|b| a.sq_dist(&b.center).sqrt() >= 1.5 * (a.width + b.width))
        })
    }

    fn locate_optimum(&self) -> Option<([f64; 2], f64)> {
        if !self.well_separated() {
            return None;
        }
        let mut starts: Vec<[f64; 2]> = self.bumps.iter().map(|b| b.center).collect();
        if let Some(bowl) = &self.bowl {
            starts.push(bowl.center);
        }
        starts
            .into_iter()
            .map(|s| {
                let p = self.refine(s);
                (p, self.value(&p))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    fn grad_hess(&self, x: &[f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for b in &self.bumps {
            let s2 = b.width * b.width;
            let d = [x[0] - b.center[0], x[1] - b.center[1]];
            let e = b.amplitude * (-(d[0] * d[0] + d[1] * d[1]) / (2.0 * s2)).exp();
            for i in 0..2 {
                g[i] += e * d[i] / s2;
                for j in 0..2 {
                    let delta = if i == j { 1.0 / s2 } else { 0.0 };
                    h[i][j] += e * (delta - d[i] * d[j] / (s2 * s2));
                }
            }
        }
        if let Some(w) = &self.bowl {
            for i in 0..2 {
                g[i] += 2.0 * w.weight * (x[i] - w.center[i]);
                h[i][i] += 2.0 * w.weight;
            }
        }
        (g, h)
    }

    /// Damped projected Newton descent inside the unit square.
    fn refine(&self, start: [f64; 2]) -> [f64; 2] {
        let mut x = start;
        let mut fx = self.value(&x);
        for _ in 0..500 {
            let (g, h) = self.grad_hess(&x);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let step = if h[0][0] > 0.0 && det > 0.0 {
                [
                    -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                    -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
                ]
            } else {
                [-1e-3 * g[0], -1e-3 * g[1]]
            };
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-12 {
                let cand = [
                    (x[0] + t * step[0]).clamp(0.0, 1.0),
                    (x[1] + t * step[1]).clamp(0.0, 1.0),
                ];
                let fc = self.value(&cand);
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        x
    }
}
