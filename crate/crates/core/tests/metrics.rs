use bbo_core::metrics::{coverage, coverage_dynamics, norm_traj_length, pairwise_wins, Trajectory};
use bbo_core::seed::rng_from_seed;
use bbo_core::tasks::Bounds;
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Mean L of iid-Gaussian-step walks, computed directly.
fn random_walk_mean_l(walks: usize, k: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut total = 0.0;
    for _ in 0..walks {
        let mut pts = vec![vec![0.0, 0.0]];
        for _ in 1..k {
            let last = pts.last().unwrap().clone();
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            pts.push(vec![last[0] + dx, last[1] + dy]);
        }
        total += norm_traj_length(&pts).unwrap();
    }
    total / walks as f64
}

#[test]
fn random_walk_reference_value() {
    let mean = random_walk_mean_l(10_000, 50, 11);
    assert!((0.11..=0.17).contains(&mean), "mean L {mean}");
}

fn unit(points: Vec<Vec<f64>>) -> Trajectory {
    let n = points.len();
    Trajectory::new(points, vec![0.0; n], Bounds::unit_square()).unwrap()
}

fn rotate(p: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

proptest! {
    #[test]
    fn collinear_paths_have_unit_length(
        start in prop::array::uniform2(-3.0f64..3.0),
        dir in prop::array::uniform2(-1.0f64..1.0),
        steps in prop::collection::vec(0.001f64..1.0, 1..60),
    ) {
        prop_assume!(dir[0].abs() + dir[1].abs() > 1e-3);
        let mut t = 0.0;
        let mut pts = vec![start.to_vec()];
        for s in steps {
            t += s;
            pts.push(vec![start[0] + t * dir[0], start[1] + t * dir[1]]);
        }
        let l = norm_traj_length(&pts).unwrap();
        prop_assert!((l - 1.0).abs() <= 1e-12, "L = {}", l);
    }

    #[test]
    fn length_is_rotation_invariant(
        pts in prop::collection::vec(prop::array::uniform2(0.0f64..1.0), 2..30),
        theta in 0.0f64..6.3,
    ) {
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.to_vec()).collect();
        let rotated: Vec<Vec<f64>> = pts.iter().map(|p| rotate(p, theta)).collect();
        match (norm_traj_length(&pts), norm_traj_length(&rotated)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
        }
    }

    #[test]
    fn coverage_is_translation_and_scale_invariant(
        pts in prop::collection::vec(prop::array::uniform2(0.0f64..1.0), 1..30),
        shift in prop::array::uniform2(-5.0f64..5.0),
        scale in 0.5f64..4.0,
    ) {
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.to_vec()).collect();
        let k = pts.len();
        let base = coverage(&unit(pts.clone()), k);
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| vec![scale * p[0] + shift[0], scale * p[1] + shift[1]]).collect();
        let bounds = Bounds::new(shift.to_vec(), vec![shift[0] + scale, shift[1] + scale]).unwrap();
        let moved = Trajectory::new(moved, vec![0.0; k], bounds).unwrap();
        prop_assert!((coverage(&moved, k) - base).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&base));
    }

    #[test]
    fn wins_swap_under_argument_swap(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 0..40),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let ab = pairwise_wins(&a, &b).unwrap();
        let ba = pairwise_wins(&b, &a).unwrap();
        prop_assert_eq!((ab.a_wins, ab.b_wins, ab.ties), (ba.b_wins, ba.a_wins, ba.ties));
        prop_assert_eq!(ab.a_wins + ab.b_wins + ab.ties, a.len());
    }
}

#[test]
fn coverage_geometry_anchors() {
    assert_eq!(coverage(&unit(vec![vec![0.4, 0.4]]), 1), 0.0);
    let two = coverage(&unit(vec![vec![0.25, 0.5], vec![0.75, 0.5]]), 2);
    assert!((two - 19.63).abs() <= 0.01, "{two}");
    let corners = unit(vec![
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ]);
    assert_eq!(coverage(&corners, 4), 100.0);
}

/// Straight outward paths: the centroid moves, yet the enclosing radius
/// grows with every point. Checked exhaustively at every k.
#[test]
fn coverage_dynamics_monotone_on_outward_paths() {
    let mut rng = rng_from_seed(5);
    for _ in 0..200 {
        let start = [rng.random::<f64>(), rng.random::<f64>()];
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let step = rng.random_range(0.001..0.01);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = step * i as f64;
                vec![
                    (start[0] + t * angle.cos()).clamp(0.0, 1.0),
                    (start[1] + t * angle.sin()).clamp(0.0, 1.0),
                ]
            })
            .collect();
        let traj = unit(pts);
        let all: Vec<f64> = (1..=50).map(|k| coverage(&traj, k)).collect();
        assert!(all.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{all:?}");
        let series = coverage_dynamics(&traj);
        assert!(series.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12));
    }
}

#[test]
fn linear_walker_segment_has_small_coverage() {
    // 50 evenly spaced points with spacing s span (K - 1) s; the enclosing
    // disk has radius half of that.
    let s = 0.01;
    let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![0.2 + s * i as f64, 0.3]).collect();
    let r: f64 = 49.0 * s / 2.0;
    let expected = 100.0 * std::f64::consts::PI * r * r;
    let cov = coverage(&unit(pts), 50);
    assert!((cov - expected).abs() < 1e-9, "{cov} vs {expected}");
    assert!(cov < 25.0, "{cov}");
}
