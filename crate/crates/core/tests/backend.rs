use bbo_core::backend::{Policy, PolicyBackend, RecordingBackend, ReplayBackend};
use bbo_core::run::{run_method, Method, MethodSettings};
use bbo_core::tasks::function_task;
use bbo_core::Error;

#[test]
fn replayed_run_matches_recording() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let task = function_task(5, 7);
    let settings = MethodSettings::default();
    for method in [Method::Llm, Method::Centaur, Method::Mcts] {
        let _ = std::fs::remove_file(&cache);
        let live = PolicyBackend::new(Policy::greedy()).unwrap();
        let recorder = RecordingBackend::new(live, &cache).unwrap();
        let recorded = run_method(&task, method, 50, Some(&recorder), &settings, 21).unwrap();
        let replay = ReplayBackend::open(&cache).unwrap();
        let replayed = run_method(&task, method, 50, Some(&replay), &settings, 21).unwrap();
        assert_eq!(
            serde_json::to_string(&recorded).unwrap(),
            serde_json::to_string(&replayed).unwrap(),
            "{method}"
        );
        // The cache is consumed: a third run misses.
        let err = run_method(&task, method, 50, Some(&replay), &settings, 21).unwrap_err();
        assert!(matches!(err, Error::ReplayMiss(_)));
    }
}

#[test]
fn scripted_backends_never_fall_back_or_repeat() {
    let settings = MethodSettings::default();
    for policy in [Policy::UniformRandom, Policy::greedy(), Policy::walker()] {
        let backend = PolicyBackend::new(policy).unwrap();
        for t in 0..5 {
            let task = function_task(t, 7);
            let trace = run_method(&task, Method::Llm, 50, Some(&backend), &settings, t as u64).unwrap();
            assert!(trace.trials.iter().all(|x| !x.fallback));
            for (i, a) in trace.trials.iter().enumerate() {
                assert!(trace.trials[..i].iter().all(|b| b.point != a.point));
            }
        }
    }
}
