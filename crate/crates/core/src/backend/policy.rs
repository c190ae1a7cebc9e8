//! Scripted stand-ins for a language model. A [`PolicyBackend`] reads the
//! rendered optimizer prompt back (bounds, reply keys, history, and for
//! override prompts the candidate list) and answers with valid JSON chosen
//! by a fixed policy.
//!
//! Step sizes are relative: `sigma` and `step` are multiplied by each
//! axis's width, so on the unit square they are absolute.

use std::sync::OnceLock;

use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::{Backend, CompletionRequest, CompletionResponse};
use crate::error::{contract, Error, Result};
use crate::seed::Rng;
use crate::tasks::Bounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Policy {
    /// Uniform sample in the bounds.
    UniformRandom,
    /// Best-so-far plus Gaussian noise, resampled until unseen.
    GreedyPerturb { sigma: f64 },
    /// Continues from the most recent point along a fixed unit direction
    /// (the diagonal when `direction` is absent), mirroring at the walls.
    LinearWalker {
        #[serde(default)]
        direction: Option<Vec<f64>>,
        step: f64,
    },
}

impl Policy {
    pub fn greedy() -> Self {
        Policy::GreedyPerturb { sigma: 0.02 }
    }

    pub fn walker() -> Self {
        Policy::LinearWalker {
            direction: None,
            step: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Policy::UniformRandom => Ok(()),
            Policy::GreedyPerturb { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(contract(format!("greedy_perturb needs sigma > 0, got {sigma}")))
            }
            Policy::LinearWalker { step, .. } if !(*step > 0.0 && step.is_finite()) => {
                Err(contract(format!("linear_walker needs step > 0, got {step}")))
            }
            Policy::LinearWalker {
                direction: Some(d), ..
            } if d.iter().map(|v| v * v).sum::<f64>() == 0.0 => {
                Err(contract("linear_walker direction must be non-zero"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::UniformRandom => "uniform_random",
            Policy::GreedyPerturb { .. } => "greedy_perturb",
            Policy::LinearWalker { .. } => "linear_walker",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolicyBackend {
    policy: Policy,
}

impl PolicyBackend {
    pub fn new(policy: Policy) -> Result<Self> {
        policy.validate()?;
        Ok(Self { policy })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    fn propose(&self, view: &PromptView, rng: &mut Rng) -> Result<Vec<f64>> {
        let bounds = &view.bounds;
        let dim = bounds.dim();
        let seen = |p: &[f64]| view.history.iter().any(|(h, _)| h.as_slice() == p);
        let point = match &self.policy {
            Policy::UniformRandom => resample(|| bounds.sample_uniform(rng), seen),
            Policy::GreedyPerturb { sigma } => {
                let best = view
                    .history
                    .iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(p, _)| p.clone());
                match best {
                    None => resample(|| bounds.sample_uniform(rng), seen),
                    Some(best) => resample(
                        || {
                            let raw: Vec<f64> = (0..dim)
                                .map(|i| {
                                    let z: f64 = rng.sample(StandardNormal);
                                    best[i] + sigma * bounds.width(i) * z
                                })
                                .collect();
                            bounds.clamp(&raw).0
                        },
                        seen,
                    ),
                }
            }
            Policy::LinearWalker { direction, step } => {
                let configured = match direction {
                    Some(d) if d.len() != dim => {
                        return Err(contract(format!(
                            "walker direction has {} axes, prompt has {dim}",
                            d.len()
                        )))
                    }
                    Some(d) => d.clone(),
                    None => vec![1.0; dim],
                };
                let norm = configured.iter().map(|v| v * v).sum::<f64>().sqrt();
                let mut dir: Vec<f64> = configured.iter().map(|v| v / norm).collect();
                let last = match view.history.last() {
                    Some((p, _)) => p.clone(),
                    None => bounds.center(),
                };
                if let [.., (prev, _), (cur, _)] = view.history.as_slice() {
                    // A previous walker step (possibly mirrored) moved at most
                    // `step * |dir_i|` per axis; inherit its signs so the walk
                    // keeps heading away from a wall it bounced off.
                    let disp: Vec<f64> = (0..dim).map(|i| (cur[i] - prev[i]) / bounds.width(i)).collect();
                    let walker_like = disp.iter().any(|d| *d != 0.0)
                        && disp
                            .iter()
                            .zip(&dir)
                            .all(|(d, u)| d.abs() <= step * u.abs() * (1.0 + 1e-3) + 1e-5);
                    if walker_like {
                        for (u, d) in dir.iter_mut().zip(&disp) {
                            if *d != 0.0 {
                                *u = u.abs().copysign(*d);
                            }
                        }
                    }
                }
                let next: Vec<f64> = (0..dim)
                    .map(|i| {
                        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
                        let mut v = last[i] + step * bounds.width(i) * dir[i];
                        if v > hi {
                            v = 2.0 * hi - v;
                        } else if v < lo {
                            v = 2.0 * lo - v;
                        }
                        v.clamp(lo, hi)
                    })
                    .collect();
                if seen(&next) {
                    let mut jittered = next;
                    jittered[0] = (jittered[0] + 1e-6 * bounds.width(0)).min(bounds.upper()[0]);
                    jittered
                } else {
                    next
                }
            }
        };
        Ok(point)
    }
}

fn resample(mut draw: impl FnMut() -> Vec<f64>, seen: impl Fn(&[f64]) -> bool) -> Vec<f64> {
    let mut p = draw();
    for _ in 0..1000 {
        if !seen(&p) {
            break;
        }
        p = draw();
    }
    p
}

impl Backend for PolicyBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let prompt = request.prompt();
        let view = PromptView::parse(prompt)?;
        let mut hasher = Sha256::new();
        hasher.update(request.seed.unwrap_or(0).to_le_bytes());
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        let mut rng = Rng::seed_from_u64(u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")));
        let point = self.propose(&view, &mut rng)?;
        let object = point_object(&view.keys, &point);
        let text = match view.candidates {
            None => object.to_string(),
            Some(count) => {
                // Override prompt: keep everything except the last candidate.
                let mut decisions = vec![Value::String("keep".into()); count];
                if let Some(last) = decisions.last_mut() {
                    *last = object;
                }
                Value::Array(decisions).to_string()
            }
        };
        Ok(CompletionResponse::text(text))
    }
}

fn point_object(keys: &[String], point: &[f64]) -> Value {
    let mut map = Map::new();
    for (k, v) in keys.iter().zip(point) {
        map.insert(k.clone(), Value::from(*v));
    }
    Value::Object(map)
}

/// What a policy needs from a rendered prompt.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PromptView {
    pub keys: Vec<String>,
    pub bounds: Bounds,
    pub history: Vec<(Vec<f64>, f64)>,
    pub candidates: Option<usize>,
}

fn regexes() -> &'static (Regex, Regex, Regex) {
    static RE: OnceLock<(Regex, Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| {
        (
            Regex::new(r#""([A-Za-z_][A-Za-z0-9_]*)":\s*<float>"#).expect("key regex"),
            Regex::new(r"([A-Za-z_][A-Za-z0-9_]*) in \[([^,\]]+), ([^\]]+)\]").expect("axis regex"),
            Regex::new(r"must be in \[([^,\]]+), ([^\]]+)\]").expect("shared regex"),
        )
    })
}

impl PromptView {
    pub fn parse(prompt: &str) -> Result<Self> {
        let bad = |what: &str| Error::ContractViolation(format!("prompt without parseable {what}"));
        let (key_re, axis_re, shared_re) = regexes();
        let lines: Vec<&str> = prompt.lines().collect();

        let reply_line = lines
            .iter()
            .find(|l| l.starts_with("Return ONLY"))
            .ok_or_else(|| bad("reply format"))?;
        let keys: Vec<String> = key_re
            .captures_iter(reply_line)
            .map(|c| c[1].to_string())
            .collect();
        if keys.is_empty() {
            return Err(bad("reply keys"));
        }

        let bounds_line = lines
            .iter()
            .find_map(|l| l.strip_prefix("Search bounds:"))
            .ok_or_else(|| bad("bounds"))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bound value"));
        let (lower, upper) = if let Some(c) = shared_re.captures(bounds_line) {
            (vec![num(&c[1])?; keys.len()], vec![num(&c[2])?; keys.len()])
        } else {
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for key in &keys {
                let c = axis_re
                    .captures_iter(bounds_line)
                    .find(|c| &c[1] == key)
                    .ok_or_else(|| bad("per-axis bounds"))?;
                lower.push(num(&c[2])?);
                upper.push(num(&c[3])?);
            }
            (lower, upper)
        };
        let bounds = Bounds::new(lower, upper)?;

        let start = lines
            .iter()
            .position(|l| l.starts_with("History of all previous attempts"))
            .ok_or_else(|| bad("history header"))?;
        let mut history = Vec::new();
        let mut idx = start + 1;
        while idx < lines.len() {
            let line = lines[idx].trim();
            if line.starts_with("Important:") || line.starts_with("Candidates proposed") {
                break;
            }
            idx += 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            if fields.len() != keys.len() + 2 {
                return Err(contract(format!("malformed history line {line:?}")));
            }
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| contract(format!("malformed history line {line:?}")))?;
            let (point, loss) = values.split_at(keys.len());
            history.push((point.to_vec(), loss[0]));
        }

        let candidates = lines
            .iter()
            .position(|l| l.starts_with("Candidates proposed"))
            .map(|c| lines[c + 1..].iter().take_while(|l| l.contains('|')).count());

        Ok(Self {
            keys,
            bounds,
            history,
            candidates,
        })
    }
}
