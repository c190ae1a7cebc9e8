//! CMA-ES with an LLM allowed to override individual candidates. Every
//! evaluated point, overridden or not, is told back to CMA-ES.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{self, Backend, CompletionRequest, RequestParams};
use crate::cma::CmaState;
use crate::error::Result;
use crate::format::g6;
use crate::history::History;
use crate::proposer::{history_lines, PromptTemplate};
use crate::run::{Evaluator, TrialMeta};
use crate::seed::Rng;
use crate::tasks::Bounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    Replace(Vec<f64>),
}

/// What happened to one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideLog {
    pub generation: u64,
    pub decisions: Vec<Decision>,
    pub raw_text: String,
    /// The reply could not be parsed and every candidate was kept.
    pub parse_failed: bool,
}

/// Renders the override request for the candidates about to be evaluated.
pub fn render_override_prompt(
    template: PromptTemplate,
    bounds: &Bounds,
    history: &History,
    candidates: &[Vec<f64>],
) -> String {
    let dim = bounds.dim();
    let keys = template.keys(dim);
    let rows: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut fields = vec![i.to_string()];
            fields.extend(p.iter().map(|v| g6(*v)));
            fields.join(" | ")
        })
        .collect();
    format!(
        "You are assisting a CMA-ES optimizer on an unknown black-box problem.\n\
         Goal: minimize the loss (smaller is better).\n\
         Search bounds: {}.\n\
         Trial number: {}.\n\
         Current best loss: {}.\n\
         History of all previous attempts ({}):\n\
         {}\n\
         Candidates proposed by CMA-ES for this generation (index | {}):\n\
         {}\n\
         For each candidate, keep it or replace it with a point you expect to be better.\n\
         Important: do NOT repeat any previous point from history.\n\
         Return ONLY a JSON array with one entry per candidate, in order, each either \"keep\" or {}.",
        template.bounds_text(bounds),
        history.len() + 1,
        g6(history.best_loss()),
        template.history_header(dim),
        history_lines(history.as_slice()),
        keys.join(" | "),
        rows.join("\n"),
        template.keys_desc(dim),
    )
}

/// Parses the first JSON array of `count` decisions. Replacements are
/// clamped; a replacement repeating a history point is downgraded to keep.
pub fn parse_override(
    raw: &str,
    keys: &[String],
    bounds: &Bounds,
    history: &History,
    count: usize,
) -> Option<Vec<Decision>> {
    let entries = raw.char_indices().filter(|(_, c)| *c == '[').find_map(|(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) if items.len() == count => Some(items),
            _ => None,
        }
    })?;
    entries
        .iter()
        .map(|item| match item {
            Value::String(s) if s.eq_ignore_ascii_case("keep") => Some(Decision::Keep),
            Value::Object(map) => {
                let values: Option<Vec<f64>> =
                    keys.iter().map(|k| map.get(k).and_then(Value::as_f64)).collect();
                let point = bounds.clamp(&values?).0;
                Some(if history.contains(&point) {
                    Decision::Keep
                } else {
                    Decision::Replace(point)
                })
            }
            _ => None,
        })
        .collect()
}

/// One generation: ask, let the model override, evaluate (truncated to the
/// remaining budget) and tell with the overrides flagged as injected.
pub fn centaur_step(
    state: &CmaState,
    backend: &dyn Backend,
    params: &RequestParams,
    template: PromptTemplate,
    eval: &mut Evaluator<'_>,
    cma_rng: &mut Rng,
    llm_rng: &mut Rng,
) -> Result<(CmaState, OverrideLog)> {
    let mut gen = state.ask(cma_rng)?;
    gen.truncate(eval.remaining());
    let bounds = &state.bounds;
    let keys = template.keys(bounds.dim());
    let points: Vec<Vec<f64>> = gen.candidates.iter().map(|c| c.point.clone()).collect();
    let prompt = render_override_prompt(template, bounds, eval.history(), &points);
    let request = CompletionRequest::user(params, prompt, Some(llm_rng.random::<u64>()));
    let raw = backend::complete(backend, &request)?.text;
    let parsed = parse_override(&raw, &keys, bounds, eval.history(), points.len());
    let parse_failed = parsed.is_none();
    let decisions = parsed.unwrap_or_else(|| vec![Decision::Keep; points.len()]);

    for (i, d) in decisions.iter().enumerate() {
        if let Decision::Replace(p) = d {
            gen.inject(i, p.clone());
        }
    }
    let mut losses = Vec::with_capacity(gen.candidates.len());
    for c in &gen.candidates {
        let trial = eval.evaluate(
            &c.point,
            TrialMeta {
                injected: c.injected,
                ..TrialMeta::default()
            },
        )?;
        losses.push(trial.loss);
    }
    gen.losses = Some(losses);
    let next = state.tell(&gen)?;
    Ok((
        next,
        OverrideLog {
            generation: state.generation,
            decisions,
            raw_text: raw,
            parse_failed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn parses_keep_and_replace() {
        let h = History::new();
        let b = Bounds::unit_square();
        let d = parse_override(r#"ok: ["keep", {"x": 2, "y": 0.5}]"#, &keys(), &b, &h, 2).unwrap();
        assert_eq!(d, vec![Decision::Keep, Decision::Replace(vec![1.0, 0.5])]);
        assert!(parse_override(r#"["keep"]"#, &keys(), &b, &h, 2).is_none());
        assert!(parse_override("no", &keys(), &b, &h, 1).is_none());
        assert!(parse_override(r#"["maybe"]"#, &keys(), &b, &h, 1).is_none());
    }

    #[test]
    fn repeated_replacement_is_kept() {
        let mut h = History::new();
        h.push(vec![0.5, 0.5], 1.0);
        let d = parse_override(
            r#"[{"x": 0.5, "y": 0.5}]"#,
            &keys(),
            &Bounds::unit_square(),
            &h,
            1,
        );
        assert_eq!(d, Some(vec![Decision::Keep]));
    }

    #[test]
    fn prompt_lists_candidates() {
        let mut h = History::new();
        h.push(vec![0.25, 0.75], 2.5);
        let text = render_override_prompt(
            PromptTemplate::Function2D,
            &Bounds::unit_square(),
            &h,
            &[vec![0.1, 0.2], vec![0.3, 0.4]],
        );
        assert!(text.contains("(index | x | y):\n0 | 0.1 | 0.2\n1 | 0.3 | 0.4\nFor each"));
        assert!(text.contains("Trial number: 2.\nCurrent best loss: 2.5.\n"));
    }
}
