use bbo_core::backend::{Policy, PolicyBackend, RequestParams};
use bbo_core::probe::{run_probe, Regime};
use bbo_core::tasks::{bbob_task, sphere_task};

#[test]
fn regimes_share_seed_points_and_budget() {
    let backend = PolicyBackend::new(Policy::greedy()).unwrap();
    let task = sphere_task(0);
    let a = run_probe(&task, &backend, &RequestParams::default(), Regime::BlackBox, 4).unwrap();
    let b = run_probe(&task, &backend, &RequestParams::default(), Regime::BoPretend, 4).unwrap();
    assert_eq!(a.seed_points, b.seed_points);
    assert_eq!((a.evaluations, b.evaluations), (15, 15));
    assert_eq!(a.rounds.len(), 5);
    for (ra, rb) in a.rounds.iter().zip(&b.rounds) {
        assert!(!ra.prompt.contains("Bayesian"));
        assert!(rb.prompt.ends_with("\nOptimize like Bayesian optimization!"));
    }
    let plot = a.plot_tsv();
    assert_eq!(plot.lines().count(), 16);
}

#[test]
fn probe_is_deterministic_and_restricted_to_unit_square() {
    let backend = PolicyBackend::new(Policy::walker()).unwrap();
    let task = sphere_task(2);
    let a = run_probe(&task, &backend, &RequestParams::default(), Regime::BlackBox, 1).unwrap();
    let b = run_probe(&task, &backend, &RequestParams::default(), Regime::BlackBox, 1).unwrap();
    assert_eq!(a, b);
    let bbob = bbob_task(1, 1, 2).unwrap();
    assert!(run_probe(&bbob, &backend, &RequestParams::default(), Regime::BlackBox, 1).is_err());
}
