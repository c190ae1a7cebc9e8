use std::path::PathBuf;

use bbo_core::centaur::render_override_prompt;
use bbo_core::history::History;
use bbo_core::proposer::{render_prompt, PromptTemplate, ProposerContext};
use bbo_core::tasks::{physical_task, Bounds};

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/prompts")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ctx(template: PromptTemplate, bounds: Bounds, rows: &[(&[f64], f64)]) -> ProposerContext {
    let mut ctx = ProposerContext::new(template, bounds);
    for (p, l) in rows {
        ctx.history.push(p.to_vec(), *l);
    }
    ctx
}

fn unit_rows() -> Vec<(&'static [f64], f64)> {
    vec![
        (&[0.25, 0.75], 1.5),
        (&[0.123456789, 0.5], -0.0123456),
        (&[1e-5, 0.999999], 12345678.0),
    ]
}

#[test]
fn unit_square_templates_match_golden_files() {
    for (template, stem) in [
        (PromptTemplate::Function2D, "function2d"),
        (PromptTemplate::ProbeBlackBox, "probe_blackbox"),
        (PromptTemplate::BoPretend, "bo_pretend"),
    ] {
        let empty = ctx(template, Bounds::unit_square(), &[]);
        assert_eq!(
            render_prompt(&empty),
            golden(&format!("{stem}_empty.txt")),
            "{stem} empty"
        );
        let full = ctx(template, Bounds::unit_square(), &unit_rows());
        assert_eq!(
            render_prompt(&full),
            golden(&format!("{stem}_history.txt")),
            "{stem} history"
        );
    }
}

#[test]
fn physical_template_matches_golden_files() {
    let bounds = physical_task(0, 7).bounds;
    assert_eq!(
        render_prompt(&ctx(PromptTemplate::Physical, bounds.clone(), &[])),
        golden("physical_empty.txt")
    );
    let rows: Vec<(&[f64], f64)> = vec![(&[2.5, 0.3], 0.0421), (&[7.25, 1.125], 0.00318)];
    assert_eq!(
        render_prompt(&ctx(PromptTemplate::Physical, bounds, &rows)),
        golden("physical_history.txt")
    );
}

#[test]
fn bbob_templates_match_golden_files() {
    let b2 = Bounds::cube(2, -5.0, 5.0).unwrap();
    assert_eq!(
        render_prompt(&ctx(PromptTemplate::Bbob, b2.clone(), &[])),
        golden("bbob2d_empty.txt")
    );
    let rows: Vec<(&[f64], f64)> = vec![(&[-1.5, 3.25], 102.5), (&[0.0, -4.999], 87.125)];
    assert_eq!(
        render_prompt(&ctx(PromptTemplate::Bbob, b2, &rows)),
        golden("bbob2d_history.txt")
    );
    let b5 = Bounds::cube(5, -5.0, 5.0).unwrap();
    assert_eq!(
        render_prompt(&ctx(PromptTemplate::Bbob, b5.clone(), &[])),
        golden("bbob5d_empty.txt")
    );
    let rows: Vec<(&[f64], f64)> = vec![(&[1.0, -2.0, 3.0, -4.0, 4.5], -12.5)];
    assert_eq!(
        render_prompt(&ctx(PromptTemplate::Bbob, b5, &rows)),
        golden("bbob5d_history.txt")
    );
}

#[test]
fn bo_pretend_is_probe_prompt_plus_one_line() {
    for rows in [vec![], unit_rows()] {
        let plain = render_prompt(&ctx(PromptTemplate::ProbeBlackBox, Bounds::unit_square(), &rows));
        let bo = render_prompt(&ctx(PromptTemplate::BoPretend, Bounds::unit_square(), &rows));
        assert_eq!(bo.lines().count(), plain.lines().count() + 1);
        assert_eq!(
            bo.strip_prefix(plain.as_str()),
            Some("\nOptimize like Bayesian optimization!")
        );
    }
}

#[test]
fn equal_contexts_render_identically() {
    let a = ctx(PromptTemplate::Function2D, Bounds::unit_square(), &unit_rows());
    let b = ctx(PromptTemplate::Function2D, Bounds::unit_square(), &unit_rows());
    assert_eq!(render_prompt(&a), render_prompt(&b));
}

#[test]
fn override_prompt_matches_golden_file() {
    let mut history = History::new();
    history.push(vec![0.1, 0.2], 3.0);
    history.push(vec![0.4, 0.5], 0.5);
    let candidates = vec![vec![0.3, 0.3], vec![0.35, 0.6], vec![0.9, 0.05]];
    let text = render_override_prompt(
        PromptTemplate::Function2D,
        &Bounds::unit_square(),
        &history,
        &candidates,
    );
    assert_eq!(text, golden("centaur_override.txt"));
}
