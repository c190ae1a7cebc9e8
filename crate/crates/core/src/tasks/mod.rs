//! Benchmark task families behind one objective interface.
//!
//! Every task is a pure function of `(id, seed, point)`: the objective is
//! materialized deterministically from the seed when the task is built, and
//! evaluation never mutates it.

mod bbob;
mod functions;
mod physical;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, Rng};

pub use bbob::{BbobFunction, BBOB_FUNCTIONS};
pub use functions::{Bump, GaussianMixture};
pub use physical::{Oscillator, B_RANGE, K_RANGE};

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::ContractViolation(format!(
                "bounds need equal non-zero lengths, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::ContractViolation(format!(
                    "axis {i}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval on every axis.
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn unit_square() -> Self {
        Self::cube(2, 0.0, 1.0).expect("valid unit square")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn mean_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).sum::<f64>() / self.dim() as f64
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn diagonal(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    /// Componentwise clamp; the flag reports whether any coordinate moved.
    pub fn clamp(&self, point: &[f64]) -> (Vec<f64>, bool) {
        let mut moved = false;
        let clamped = point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&lo, &hi))| {
                let c = x.clamp(lo, hi);
                moved |= c != x;
                c
            })
            .collect();
        (clamped, moved)
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| rng.random_range(lo..hi))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Functions,
    Physical,
    Bbob2d,
    Bbob5d,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Functions => "functions",
            Family::Physical => "physical",
            Family::Bbob2d => "bbob2d",
            Family::Bbob5d => "bbob5d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Family::Bbob5d => 5,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "functions" => Ok(Family::Functions),
            "physical" => Ok(Family::Physical),
            "bbob2d" => Ok(Family::Bbob2d),
            "bbob5d" => Ok(Family::Bbob5d),
            other => Err(Error::ContractViolation(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Objective {
    Mixture(GaussianMixture),
    Sphere { center: Vec<f64> },
    Oscillator(Oscillator),
    Bbob(BbobFunction),
}

/// One benchmark problem.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub id: String,
    pub family: Family,
    pub bounds: Bounds,
    pub seed: u64,
    pub optimum_loss: Option<f64>,
    objective: Objective,
}

/// Result of one objective query. `point` is the clamped point actually
/// evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: Vec<f64>,
    pub loss: f64,
    pub clamped: bool,
}

impl TaskSpec {
    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Clamps `point` into the bounds and evaluates the objective there.
    pub fn evaluate(&self, point: &[f64]) -> Result<Evaluation> {
        if point.len() != self.dim() {
            return Err(Error::InvalidPoint(format!(
                "task {} expects {} coordinates, got {}",
                self.id,
                self.dim(),
                point.len()
            )));
        }
        if let Some(bad) = point.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate {bad}")));
        }
        let (point, clamped) = self.bounds.clamp(point);
        let loss = self.loss_unchecked(&point);
        Ok(Evaluation { point, loss, clamped })
    }

    fn loss_unchecked(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Mixture(m) => m.value(x),
            Objective::Sphere { center } => x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum(),
            Objective::Oscillator(o) => o.loss(x[0], x[1]),
            Objective::Bbob(f) => f.value(x),
        }
    }

    /// Location of the known minimum, when the construction provides one.
    pub fn optimum_point(&self) -> Option<Vec<f64>> {
        match &self.objective {
            Objective::Mixture(m) => m.minimizer().map(|p| p.to_vec()),
            Objective::Sphere { center } => Some(center.clone()),
            Objective::Oscillator(o) => Some(vec![o.k_true, o.b_true]),
            Objective::Bbob(f) => Some(f.x_opt().to_vec()),
        }
    }

    pub fn mixture(&self) -> Option<&GaussianMixture> {
        match &self.objective {
            Objective::Mixture(m) => Some(m),
            _ => None,
        }
    }

    pub fn bbob(&self) -> Option<&BbobFunction> {
        match &self.objective {
            Objective::Bbob(f) => Some(f),
            _ => None,
        }
    }

    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            id: self.id.clone(),
            family: self.family,
            lower: self.bounds.lower().to_vec(),
            upper: self.bounds.upper().to_vec(),
            seed: self.seed,
            optimum_loss: self.optimum_loss,
        }
    }

    /// A task around an explicit mixture, mostly for tests and demos.
    pub fn from_mixture(id: impl Into<String>, seed: u64, mixture: GaussianMixture) -> Self {
        TaskSpec {
            id: id.into(),
            family: Family::Functions,
            bounds: Bounds::unit_square(),
            seed,
            optimum_loss: mixture.optimum(),
            objective: Objective::Mixture(mixture),
        }
    }
}

/// One line of the task catalog manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub family: Family,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub seed: u64,
    pub optimum_loss: Option<f64>,
}

/// Line-delimited JSON manifest, one record per task.
pub fn manifest_jsonl(tasks: &[TaskSpec]) -> String {
    let mut out = String::new();
    for task in tasks {
        out.push_str(&serde_json::to_string(&task.manifest_entry()).expect("manifest entry"));
        out.push('\n');
    }
    out
}

/// `count` seeded Gaussian-mixture landscapes on the unit square.
pub fn make_function_tasks(count: usize, master_seed: u64) -> Vec<TaskSpec> {
    (0..count).map(|i| function_task(i, master_seed)).collect()
}

pub fn function_task(index: usize, master_seed: u64) -> TaskSpec {
    let seed = derive_seed(&["functions", &master_seed.to_string(), &index.to_string()]);
    let mixture = GaussianMixture::generate(&mut rng_from_seed(seed));
    let mut task = TaskSpec::from_mixture(format!("fn_{index:03}"), seed, mixture);
    task.seed = seed;
    task
}

/// `count` damped-oscillator identification problems over `(k, b)`.
pub fn make_physical_tasks(count: usize, master_seed: u64) -> Vec<TaskSpec> {
    (0..count).map(|i| physical_task(i, master_seed)).collect()
}

pub fn physical_task(index: usize, master_seed: u64) -> TaskSpec {
    let seed = derive_seed(&["physical", &master_seed.to_string(), &index.to_string()]);
    let oscillator = Oscillator::generate(&mut rng_from_seed(seed));
    TaskSpec {
        id: format!("phys_{index:03}"),
        family: Family::Physical,
        bounds: Oscillator::bounds(),
        seed,
        optimum_loss: Some(0.0),
        objective: Objective::Oscillator(oscillator),
    }
}

/// Shifted sphere on the unit square, the landscape used by the
/// greedy-gradient probe.
pub fn sphere_task(seed: u64) -> TaskSpec {
    let mut rng = rng_from_seed(derive_seed(&["sphere", &seed.to_string()]));
    let center = vec![rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
    TaskSpec {
        id: "fn_sphere".to_string(),
        family: Family::Functions,
        bounds: Bounds::unit_square(),
        seed,
        optimum_loss: Some(0.0),
        objective: Objective::Sphere { center },
    }
}

/// Standard BBOB function `function_id` (instance-seeded) on `[-5, 5]^dim`.
pub fn bbob_task(function_id: u32, instance: u32, dim: usize) -> Result<TaskSpec> {
    let family = match dim {
        2 => Family::Bbob2d,
        5 => Family::Bbob5d,
        other => {
            return Err(Error::ContractViolation(format!(
                "BBOB tasks are 2- or 5-dimensional, got {other}"
            )))
        }
    };
    if instance < 1 {
        return Err(Error::ContractViolation("BBOB instances start at 1".into()));
    }
    let function = BbobFunction::new(function_id, instance, dim)?;
    Ok(TaskSpec {
        id: format!("{}_f{function_id:02}_i{instance}", family.label()),
        family,
        bounds: Bounds::cube(dim, -5.0, 5.0)?,
        seed: instance as u64,
        optimum_loss: Some(function.f_opt()),
        objective: Objective::Bbob(function),
    })
}

/// The first `count` cells of (instance 1..=3) x (17 functions), instance
/// major so every function appears before any repeats.
pub fn make_bbob_tasks(count: usize, dim: usize) -> Result<Vec<TaskSpec>> {
    let cells = (1..=3u32).flat_map(|inst| BBOB_FUNCTIONS.iter().map(move |&f| (f, inst)));
    cells
        .take(count)
        .map(|(f, inst)| bbob_task(f, inst, dim))
        .collect()
}

/// Rebuilds a catalog task from its id (with the master seed used for the
/// generated families).
pub fn task_by_id(id: &str, master_seed: u64) -> Result<TaskSpec> {
    let unknown = || Error::ContractViolation(format!("unknown task id {id:?}"));
    if id == "fn_sphere" {
        return Ok(sphere_task(master_seed));
    }
    if let Some(idx) = id.strip_prefix("fn_") {
        return Ok(function_task(idx.parse().map_err(|_| unknown())?, master_seed));
    }
    if let Some(idx) = id.strip_prefix("phys_") {
        return Ok(physical_task(idx.parse().map_err(|_| unknown())?, master_seed));
    }
    for (prefix, dim) in [("bbob2d_f", 2usize), ("bbob5d_f", 5)] {
        if let Some(rest) = id.strip_prefix(prefix) {
            let (f, inst) = rest.split_once("_i").ok_or_else(unknown)?;
            let f: u32 = f.parse().map_err(|_| unknown())?;
            let inst: u32 = inst.parse().map_err(|_| unknown())?;
            return bbob_task(f, inst, dim);
        }
    }
    Err(unknown())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![], vec![]).is_err());
        assert!(Bounds::new(vec![0.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        let b = Bounds::cube(2, -5.0, 5.0).unwrap();
        assert_eq!(b.volume(), 100.0);
        assert_eq!(b.clamp(&[6.0, -1.0]), (vec![5.0, -1.0], true));
        assert_eq!(b.clamp(&[1.0, -1.0]), (vec![1.0, -1.0], false));
    }

    #[test]
    fn function_catalog_shape() {
        let tasks = make_function_tasks(100, 7);
        assert_eq!(tasks.len(), 100);
        assert_eq!(tasks[0].id, "fn_000");
        assert_eq!(tasks[99].id, "fn_099");
        for t in &tasks {
            assert_eq!(t.bounds, Bounds::unit_square());
            assert_eq!(t.family, Family::Functions);
        }
        let ids: std::collections::HashSet<_> = tasks.iter().map(|t| &t.id).collect();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn function_tasks_are_reproducible() {
        let a = make_function_tasks(5, 7);
        let b = make_function_tasks(5, 7);
        for (ta, tb) in a.iter().zip(&b) {
            for p in [[0.1, 0.2], [0.5, 0.5], [0.93, 0.07]] {
                assert_eq!(ta.evaluate(&p).unwrap().loss, tb.evaluate(&p).unwrap().loss);
            }
        }
        let c = make_function_tasks(5, 8);
        assert_ne!(
            a[0].evaluate(&[0.5, 0.5]).unwrap().loss,
            c[0].evaluate(&[0.5, 0.5]).unwrap().loss
        );
    }

    #[test]
    fn evaluate_clamps_and_rejects_nan() {
        let task = bbob_task(1, 1, 2).unwrap();
        let outside = task.evaluate(&[6.0, 6.0]).unwrap();
        let corner = task.evaluate(&[5.0, 5.0]).unwrap();
        assert!(outside.clamped);
        assert!(!corner.clamped);
        assert_eq!(outside.loss, corner.loss);
        assert_eq!(outside.point, vec![5.0, 5.0]);
        assert!(matches!(
            task.evaluate(&[f64::NAN, 0.0]),
            Err(Error::InvalidPoint(_))
        ));
        assert!(matches!(task.evaluate(&[0.0]), Err(Error::InvalidPoint(_))));
    }

    #[test]
    fn physical_catalog() {
        let tasks = make_physical_tasks(3, 1);
        assert_eq!(tasks[2].id, "phys_002");
        for t in &tasks {
            let opt = t.optimum_point().unwrap();
            assert!(t.evaluate(&opt).unwrap().loss.abs() <= 1e-12);
            assert_eq!(t.optimum_loss, Some(0.0));
        }
    }

    #[test]
    fn bbob_catalog_is_instance_major() {
        let tasks = make_bbob_tasks(48, 2).unwrap();
        assert_eq!(tasks.len(), 48);
        assert_eq!(tasks[0].id, "bbob2d_f01_i1");
        assert_eq!(tasks[16].id, "bbob2d_f24_i1");
        assert_eq!(tasks[17].id, "bbob2d_f01_i2");
        assert_eq!(tasks[47].id, "bbob2d_f20_i3");
        let five = make_bbob_tasks(3, 5).unwrap();
        assert!(five.iter().all(|t| t.dim() == 5 && t.family == Family::Bbob5d));
    }

    #[test]
    fn ids_round_trip_through_lookup() {
        for id in [
            "fn_004",
            "phys_010",
            "bbob2d_f03_i2",
            "bbob5d_f24_i1",
            "fn_sphere",
        ] {
            let task = task_by_id(id, 7).unwrap();
            assert_eq!(task.id, id);
        }
        let direct = function_task(4, 7);
        let looked_up = task_by_id("fn_004", 7).unwrap();
        assert_eq!(direct.seed, looked_up.seed);
        assert!(task_by_id("nope_1", 7).is_err());
    }

    #[test]
    fn manifest_has_one_line_per_task() {
        let mut tasks = make_function_tasks(2, 1);
        tasks.push(bbob_task(1, 1, 2).unwrap());
        let text = manifest_jsonl(&tasks);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let entry: ManifestEntry = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(entry.id, "bbob2d_f01_i1");
        assert_eq!(entry.lower, vec![-5.0, -5.0]);
        assert_eq!(entry.optimum_loss, tasks[2].optimum_loss);
    }
}
