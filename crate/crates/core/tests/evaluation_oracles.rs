use rand::Rng;
use xbm_core::evaluation::{
    ais_log_z, avg_log_prob, evaluate, exact_log_z, impute_visible, AisSettings, EvalOptions, ImputeSettings,
    LogZMethod,
};
use xbm_core::data::{DataKind, Dataset};
use xbm_core::models::{BoltzmannMachine, VisibleKind};
use xbm_core::rng::seeded;
use xbm_core::topology::BipartiteGraph;

fn random_binary(n_v: usize, n_h: usize, seed: u64) -> BoltzmannMachine {
    let mut rng = seeded(seed);
    let mut u = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    BoltzmannMachine::from_parts(
        VisibleKind::Binary,
        BipartiteGraph::complete(n_v, n_h),
        u(n_v * n_h),
        u(n_v),
        u(n_h),
        None,
    )
    .unwrap()
}

/// Composite Simpson rule for `ln ∫ exp(-F(v)) dv` over a 1-d visible layer.
fn simpson_log_z(m: &BoltzmannMachine, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let f = |x: f64| (-m.free_energy(&[x]).unwrap()).exp();
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (s * h / 3.0).ln()
}

#[test]
fn gaussian_log_z_matches_quadrature() {
    for (seed, sigma) in [(1u64, 1.0), (2, 0.5), (3, 2.0)] {
        let mut rng = seeded(seed);
        let m = BoltzmannMachine::from_parts(
            VisibleKind::Gaussian,
            BipartiteGraph::complete(1, 3),
            (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            vec![rng.random_range(-1.0..1.0)],
            (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Some(vec![sigma]),
        )
        .unwrap();
        let quad = simpson_log_z(&m, -40.0, 40.0, 40_000);
        let exact = exact_log_z(&m).unwrap();
        assert!((quad - exact).abs() < 1e-8, "sigma {sigma}: {quad} vs {exact}");
    }
}

#[test]
fn ais_agrees_with_enumeration_on_small_models() {
    for seed in 0..4 {
        let m = random_binary(8, 6, seed);
        let exact = exact_log_z(&m).unwrap();
        let est = ais_log_z(&m, &vec![0.0; 8], AisSettings { n_temps: 500, n_chains: 200 }, seed).unwrap();
        assert_eq!(est.chains_used, 200);
        assert!((est.log_z - exact).abs() <= 4.0 * est.stderr.max(1e-3), "{} vs {exact} ({})", est.log_z, est.stderr);
    }
}

/// The standard error should shrink roughly as one over the square root of
/// the number of chains.
#[test]
fn ais_stderr_shrinks_with_chains() {
    let m = random_binary(10, 8, 77);
    let mean_stderr = |chains: usize| {
        (0..6u64)
            .map(|s| {
                ais_log_z(&m, &vec![0.0; 10], AisSettings { n_temps: 100, n_chains: chains }, 100 + s)
                    .unwrap()
                    .stderr
            })
            .sum::<f64>()
            / 6.0
    };
    let (s25, s100, s400) = (mean_stderr(25), mean_stderr(100), mean_stderr(400));
    for ratio in [s25 / s100, s100 / s400] {
        assert!((1.4..=2.8).contains(&ratio), "ratio {ratio} ({s25}, {s100}, {s400})");
    }
}

#[test]
fn log_probs_are_normalized() {
    let m = random_binary(5, 4, 12);
    let lz = exact_log_z(&m).unwrap();
    let total: f64 = (0..32usize)
        .map(|x| {
            let v: Vec<f64> = (0..5).map(|k| ((x >> k) & 1) as f64).collect();
            avg_log_prob(&m, &v, lz).unwrap().exp()
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn evaluation_prefers_enumeration_when_small() {
    let m = random_binary(6, 4, 3);
    let rows: Vec<f64> = (0..60).map(|k| ((k * 7) % 3 == 0) as u8 as f64).collect();
    let train = Dataset::from_rows(rows, 6, DataKind::Binary, "rows").unwrap();
    let r = evaluate(&m, "RBM", &train, None, &EvalOptions::default()).unwrap();
    assert_eq!(r.log_z_method, Some(LogZMethod::Exact));
    assert_eq!(r.log_z_estimate, Some(exact_log_z(&m).unwrap()));
    assert_eq!(r.edge_count, 24);
    assert!(r.avg_test_logprob.is_none());
}

#[test]
fn imputation_returns_missing_coordinates_in_order() {
    let m = random_binary(6, 4, 5);
    let v = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    let missing = [false, true, false, true, false, false];
    let out = impute_visible(&m, &v, &missing, ImputeSettings::default(), &mut seeded(0)).unwrap();
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|x| (0.0..=1.0).contains(x)));
    let again = impute_visible(&m, &v, &missing, ImputeSettings::default(), &mut seeded(0)).unwrap();
    assert_eq!(out, again);
}
