//! The pure LLM proposer: render a prompt from the history, ask the
//! backend, parse a JSON point back out.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{self, Backend, CompletionRequest, RequestParams};
use crate::error::Result;
use crate::format::g6;
use crate::history::{History, Observation};
use crate::seed::Rng;
use crate::tasks::{Bounds, Family};

/// Total attempts per trial before falling back to a uniform sample.
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplate {
    Function2D,
    Physical,
    Bbob,
    /// The probe's black-box prompt: the 2D function prompt without the
    /// "Always propose" line.
    ProbeBlackBox,
    /// The probe prompt plus "Optimize like Bayesian optimization!".
    BoPretend,
}

impl PromptTemplate {
    pub fn for_family(family: Family) -> Self {
        match family {
            Family::Functions => PromptTemplate::Function2D,
            Family::Physical => PromptTemplate::Physical,
            Family::Bbob2d | Family::Bbob5d => PromptTemplate::Bbob,
        }
    }

    /// JSON keys the reply must carry, one per axis.
    pub fn keys(self, dim: usize) -> Vec<String> {
        match self {
            PromptTemplate::Physical => vec!["k".into(), "b".into()],
            PromptTemplate::Bbob => (0..dim).map(|i| format!("x{i}")).collect(),
            _ => vec!["x".into(), "y".into()],
        }
    }

    /// Text after "Search bounds: ".
    pub(crate) fn bounds_text(self, bounds: &Bounds) -> String {
        let keys = self.keys(bounds.dim());
        let interval = |i: usize| format!("[{}, {}]", g6(bounds.lower()[i]), g6(bounds.upper()[i]));
        match self {
            PromptTemplate::Physical | PromptTemplate::Bbob => keys
                .iter()
                .enumerate()
                .map(|(i, k)| format!("{k} in {}", interval(i)))
                .collect::<Vec<_>>()
                .join(", "),
            _ => format!("x and y must be in {}", interval(0)),
        }
    }

    /// `{"x": <float>, "y": <float>}` for the template's keys.
    pub(crate) fn keys_desc(self, dim: usize) -> String {
        let inner: Vec<String> = self
            .keys(dim)
            .iter()
            .map(|k| format!("\"{k}\": <float>"))
            .collect();
        format!("{{{}}}", inner.join(", "))
    }

    pub(crate) fn history_header(self, dim: usize) -> String {
        format!("step | {} | loss", self.keys(dim).join(" | "))
    }
}

/// Everything the proposer prompt is rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposerContext {
    pub template: PromptTemplate,
    pub bounds: Bounds,
    pub history: History,
}

impl ProposerContext {
    pub fn new(template: PromptTemplate, bounds: Bounds) -> Self {
        Self {
            template,
            bounds,
            history: History::new(),
        }
    }

    pub fn trial_num(&self) -> usize {
        self.history.len() + 1
    }

    pub fn best_loss(&self) -> f64 {
        self.history.best_loss()
    }

    pub fn keys(&self) -> Vec<String> {
        self.template.keys(self.bounds.dim())
    }
}

/// `step | v1 | v2 | loss` lines joined by newlines.
pub fn history_lines(observations: &[Observation]) -> String {
    observations
        .iter()
        .map(|o| {
            let mut fields = vec![o.step.to_string()];
            fields.extend(o.point.iter().map(|v| g6(*v)));
            fields.push(g6(o.loss));
            fields.join(" | ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_prompt(ctx: &ProposerContext) -> String {
    render_with(
        ctx.template,
        &ctx.bounds,
        ctx.history.as_slice(),
        ctx.trial_num(),
        ctx.best_loss(),
    )
}

/// Renders with an explicit history block, trial number and best loss. MCTS
/// uses this to show only a root-to-node path while reporting global
/// progress.
pub fn render_with(
    template: PromptTemplate,
    bounds: &Bounds,
    history: &[Observation],
    trial_num: usize,
    best_loss: f64,
) -> String {
    let dim = bounds.dim();
    let head = match template {
        PromptTemplate::Physical => {
            "You are optimizing physical system parameters.\n\
             Goal: suggest k and b that minimize loss (smaller is better)."
        }
        PromptTemplate::Bbob => {
            "You are optimizing an unknown black-box function (BBOB benchmark).\n\
             Goal: suggest parameters that minimize this function."
        }
        _ => {
            "You are optimizing an unknown black-box function.\n\
             Goal: suggest x and y that minimize this function (smaller is better)."
        }
    };
    let tail = match template {
        PromptTemplate::Function2D => format!(
            "Important: do NOT repeat any previous (x, y) pair from history.\n\
             Always propose a new point that was not tried before.\n\
             Return ONLY JSON in this exact format: {}.",
            template.keys_desc(dim)
        ),
        PromptTemplate::Physical => format!(
            "Important: do NOT repeat any previous (k, b) pair from history.\n\
             Always propose new parameters that were not tried before.\n\
             Return ONLY JSON in this exact format: {}.",
            template.keys_desc(dim)
        ),
        PromptTemplate::Bbob => format!(
            "Important: do NOT repeat any previous parameter combination.\n\
             Always propose new parameters.\n\
             Return ONLY JSON: {}.",
            template.keys_desc(dim)
        ),
        PromptTemplate::ProbeBlackBox => format!(
            "Important: do NOT repeat any previous (x, y) pair from history.\n\
             Return ONLY JSON in this exact format: {}.",
            template.keys_desc(dim)
        ),
        PromptTemplate::BoPretend => format!(
            "Important: do NOT repeat any previous (x, y) pair from history.\n\
             Return ONLY JSON in this exact format: {}.\n\
             Optimize like Bayesian optimization!",
            template.keys_desc(dim)
        ),
    };
    format!(
        "{head}\n\
         Search bounds: {}.\n\
         Trial number: {trial_num}.\n\
         Current best loss: {}.\n\
         History of all previous attempts ({}):\n\
         {}\n\
         {tail}",
        template.bounds_text(bounds),
        g6(best_loss),
        template.history_header(dim),
        history_lines(history),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailure {
    Malformed,
    Duplicate,
}

impl ParseFailure {
    /// Instruction appended to the prompt on retry.
    pub fn retry_line(self, keys: &[String]) -> String {
        match self {
            ParseFailure::Malformed => format!(
                "Your previous reply did not contain a JSON object with numeric keys {}. Reply with the JSON object only.",
                keys.join(", ")
            ),
            ParseFailure::Duplicate => {
                "Your previous reply repeated a point from history. Propose a point that is not in the history.".to_string()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    /// Clamped into the bounds.
    pub point: Vec<f64>,
    pub raw_text: String,
    pub parse_attempts: usize,
    pub clamped: bool,
    pub fallback: bool,
}

/// Finds the first JSON object in `raw` carrying every key as a number.
pub fn extract_point(raw: &str, keys: &[String]) -> Option<Vec<f64>> {
    raw.char_indices().filter(|(_, c)| *c == '{').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        let Some(Ok(Value::Object(map))) = stream.next() else {
            return None;
        };
        keys.iter().map(|k| map.get(k).and_then(Value::as_f64)).collect()
    })
}

pub fn parse_proposal(
    raw: &str,
    keys: &[String],
    bounds: &Bounds,
    history: &[Observation],
) -> std::result::Result<Proposal, ParseFailure> {
    let values = extract_point(raw, keys).ok_or(ParseFailure::Malformed)?;
    let (point, clamped) = bounds.clamp(&values);
    if history.iter().any(|o| o.point == point) {
        return Err(ParseFailure::Duplicate);
    }
    Ok(Proposal {
        point,
        raw_text: raw.to_string(),
        parse_attempts: 1,
        clamped,
        fallback: false,
    })
}

/// Asks until a usable point comes back, retrying with the failure spelled
/// out; after [`MAX_ATTEMPTS`] failures returns a uniform sample flagged as a
/// fallback. Backend errors propagate.
pub fn propose_with(
    backend: &dyn Backend,
    params: &RequestParams,
    prompt: &str,
    keys: &[String],
    bounds: &Bounds,
    history: &[Observation],
    rng: &mut Rng,
) -> Result<Proposal> {
    let mut text = prompt.to_string();
    let mut last_raw = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let request = CompletionRequest::user(params, text.clone(), Some(rng.random::<u64>()));
        let raw = backend::complete(backend, &request)?.text;
        match parse_proposal(&raw, keys, bounds, history) {
            Ok(mut proposal) => {
                proposal.parse_attempts = attempt;
                return Ok(proposal);
            }
            Err(failure) => {
                text = format!("{prompt}\n{}", failure.retry_line(keys));
                last_raw = raw;
            }
        }
    }
    let mut point = bounds.sample_uniform(rng);
    while history.iter().any(|o| o.point == point) {
        point = bounds.sample_uniform(rng);
    }
    Ok(Proposal {
        point,
        raw_text: last_raw,
        parse_attempts: MAX_ATTEMPTS,
        clamped: false,
        fallback: true,
    })
}

pub fn propose_next(
    backend: &dyn Backend,
    params: &RequestParams,
    ctx: &ProposerContext,
    rng: &mut Rng,
) -> Result<Proposal> {
    propose_with(
        backend,
        params,
        &render_prompt(ctx),
        &ctx.keys(),
        &ctx.bounds,
        ctx.history.as_slice(),
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::seed::rng_from_seed;

    fn keys() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn parses_plain_and_prose() {
        let b = Bounds::unit_square();
        let p = parse_proposal(r#"{"x": 0.3, "y": 0.7}"#, &keys(), &b, &[]).unwrap();
        assert_eq!(p.point, vec![0.3, 0.7]);
        let p = parse_proposal(r#"Sure! {"x": 0.3, "y": 0.7}"#, &keys(), &b, &[]).unwrap();
        assert_eq!(p.point, vec![0.3, 0.7]);
        let fenced = "```json\n{\"note\": {\"a\": 1}, \"x\": 0.1, \"y\": 0.2}\n```";
        assert_eq!(
            parse_proposal(fenced, &keys(), &b, &[]).unwrap().point,
            vec![0.1, 0.2]
        );
    }

    #[test]
    fn skips_objects_without_keys() {
        let raw = r#"{"thought": "go left"} then {"x": 1, "y": 0}"#;
        assert_eq!(extract_point(raw, &keys()), Some(vec![1.0, 0.0]));
        assert_eq!(extract_point(r#"{"x": "0.3", "y": 0.7}"#, &keys()), None);
        assert_eq!(extract_point("no json", &keys()), None);
    }

    #[test]
    fn clamps_and_rejects_repeats() {
        let b = Bounds::unit_square();
        let p = parse_proposal(r#"{"x": 1.5, "y": -1}"#, &keys(), &b, &[]).unwrap();
        assert_eq!(p.point, vec![1.0, 0.0]);
        assert!(p.clamped);
        let seen = [Observation {
            step: 1,
            point: vec![0.3, 0.7],
            loss: 1.0,
        }];
        assert_eq!(
            parse_proposal(r#"{"x": 0.3, "y": 0.7}"#, &keys(), &b, &seen),
            Err(ParseFailure::Duplicate)
        );
        assert_eq!(
            parse_proposal("nothing", &keys(), &b, &seen),
            Err(ParseFailure::Malformed)
        );
    }

    #[test]
    fn garbage_three_times_falls_back() {
        let backend = ScriptedBackend::new(["garbage"]);
        let ctx = ProposerContext::new(PromptTemplate::Function2D, Bounds::unit_square());
        let p = propose_next(&backend, &RequestParams::default(), &ctx, &mut rng_from_seed(1)).unwrap();
        assert!(p.fallback);
        assert_eq!(p.parse_attempts, 3);
        assert!(Bounds::unit_square().contains(&p.point));
    }

    #[test]
    fn retry_after_failure() {
        let backend = ScriptedBackend::new(["oops", r#"{"x": 0.5, "y": 0.5}"#]);
        let ctx = ProposerContext::new(PromptTemplate::Function2D, Bounds::unit_square());
        let p = propose_next(&backend, &RequestParams::default(), &ctx, &mut rng_from_seed(1)).unwrap();
        assert!(!p.fallback);
        assert_eq!(p.parse_attempts, 2);
        assert_eq!(p.point, vec![0.5, 0.5]);
    }

    #[test]
    fn bo_pretend_adds_one_line_to_probe_prompt() {
        let mut ctx = ProposerContext::new(PromptTemplate::ProbeBlackBox, Bounds::unit_square());
        ctx.history.push(vec![0.1, 0.2], 0.3);
        let plain = render_prompt(&ctx);
        ctx.template = PromptTemplate::BoPretend;
        let bo = render_prompt(&ctx);
        assert_eq!(bo, format!("{plain}\nOptimize like Bayesian optimization!"));
    }

    #[test]
    fn bbob_bounds_and_keys() {
        let b = Bounds::cube(5, -5.0, 5.0).unwrap();
        let ctx = ProposerContext::new(PromptTemplate::Bbob, b);
        let text = render_prompt(&ctx);
        assert!(text.contains(
            "Search bounds: x0 in [-5, 5], x1 in [-5, 5], x2 in [-5, 5], x3 in [-5, 5], x4 in [-5, 5]."
        ));
        assert!(text.contains("(step | x0 | x1 | x2 | x3 | x4 | loss)"));
        assert!(text.ends_with(r#"Return ONLY JSON: {"x0": <float>, "x1": <float>, "x2": <float>, "x3": <float>, "x4": <float>}."#));
    }
}
