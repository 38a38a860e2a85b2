use alphait::geostat::{
    cokrige, empirical_cross_variogram, fit_lmc_traced, whittle_matern, CovarianceFunction,
    CovarianceModel, LagBins,
};
use alphait::sim::{simulate_grf, MaternParams, ScenarioConfig};
use alphait::Location;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn model() -> CovarianceModel {
    MaternParams {
        variance: 1.0,
        cross: 0.6,
        nu: 1.5,
        scale: 2.0,
    }
    .covariance_model(2)
    .unwrap()
}

fn design(seed: u64, n: usize) -> (Vec<Location>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locs = (0..n)
        .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
        .collect();
    let scores = (0..n)
        .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    (locs, scores)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kriging_is_translation_equivariant(seed in 0u64..1000, c0 in -50.0f64..50.0, c1 in -50.0f64..50.0) {
        let (locs, scores) = design(seed, 25);
        let targets: Vec<Location> = vec![[1.0, 1.0], [5.5, 4.2], [9.0, 0.3], [12.0, 12.0]];
        let base = cokrige(&model(), &locs, &scores, &targets).unwrap();
        let shifted: Vec<Vec<f64>> = scores.iter().map(|s| vec![s[0] + c0, s[1] + c1]).collect();
        let moved = cokrige(&model(), &locs, &shifted, &targets).unwrap();
        for (a, b) in base.predictions.iter().zip(&moved.predictions) {
            prop_assert!((b[0] - a[0] - c0).abs() < 1e-10);
            prop_assert!((b[1] - a[1] - c1).abs() < 1e-10);
        }
        prop_assert_eq!(base.variances, moved.variances);
    }

    #[test]
    fn variance_vanishes_only_at_data(seed in 0u64..1000) {
        let (locs, scores) = design(seed, 20);
        let at_data = cokrige(&model(), &locs, &scores, &locs).unwrap();
        for v in at_data.variances.iter().flatten() {
            prop_assert!(*v >= 0.0 && *v < 1e-8, "variance {} at a datum", v);
        }
        let off: Vec<Location> = locs.iter().map(|l| [l[0] + 0.37, l[1] - 0.21]).collect();
        let away = cokrige(&model(), &locs, &scores, &off).unwrap();
        for v in away.variances.iter().flatten() {
            prop_assert!(*v > 1e-8);
        }
    }
}

#[test]
fn half_order_matern_is_the_exponential() {
    for i in 0..=2000 {
        let r = i as f64 * 0.01;
        assert!((whittle_matern(r, 0.5) - (-r).exp()).abs() < 1e-12, "r = {r}");
    }
}

#[test]
fn kriging_reproduces_data() {
    let (locs, scores) = design(3, 30);
    let out = cokrige(&model(), &locs, &scores, &locs).unwrap();
    for (p, s) in out.predictions.iter().zip(&scores) {
        assert!((p[0] - s[0]).abs() < 1e-8 && (p[1] - s[1]).abs() < 1e-8);
    }
}

#[test]
fn white_noise_variogram_is_flat_at_the_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1500;
    let locs: Vec<Location> = (0..n)
        .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
        .collect();
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let ev = empirical_cross_variogram(&locs, &scores, &LagBins::equal_width(10, 5.0).unwrap()).unwrap();
    for k in ev.usable_bins() {
        let g = &ev.gamma[k];
        assert!((g[(0, 0)] - 1.0).abs() < 0.1, "bin {k}: {}", g[(0, 0)]);
        assert!((g[(1, 1)] - 1.0).abs() < 0.1, "bin {k}: {}", g[(1, 1)]);
        assert!(g[(0, 1)].abs() < 0.1, "bin {k}: {}", g[(0, 1)]);
    }
}

#[test]
fn lmc_objective_never_increases() {
    for seed in 0..4 {
        let cfg = ScenarioConfig {
            n_points: 400,
            ..ScenarioConfig::preset("center-0.6", seed).unwrap()
        };
        let (locs, scores) = simulate_grf(&cfg).unwrap();
        let ev = empirical_cross_variogram(&locs, &scores, &LagBins::default_for(&locs).unwrap()).unwrap();
        for structures in [
            vec![CovarianceFunction::exponential(1.0).unwrap()],
            vec![
                CovarianceFunction::Nugget,
                CovarianceFunction::whittle_matern(1.5, 0.7).unwrap(),
                CovarianceFunction::exponential(3.0).unwrap(),
            ],
        ] {
            let fit = fit_lmc_traced(&ev, &structures).unwrap();
            assert!(!fit.wss_trace.is_empty());
            for w in fit.wss_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed}: {} -> {}", w[0], w[1]);
            }
            for (_, b) in fit.model.structures() {
                let min_eig = b.clone().symmetric_eigen().eigenvalues.min();
                assert!(min_eig >= -1e-10);
            }
        }
    }
}

#[test]
fn nugget_is_reproduced_at_data_points() {
    let nugget = CovarianceModel::new(vec![
        (CovarianceFunction::Nugget, DMatrix::identity(2, 2) * 0.5),
        (
            CovarianceFunction::exponential(2.0).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]),
        ),
    ])
    .unwrap();
    let (locs, scores) = design(9, 15);
    let out = cokrige(&nugget, &locs, &scores, &locs[..3]).unwrap();
    for (p, s) in out.predictions.iter().zip(&scores) {
        assert!((p[0] - s[0]).abs() < 1e-8);
    }
}
