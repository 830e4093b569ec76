mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use pvwdn::forecast::*;
use pvwdn::scenario::posterior_after_observations;

#[test]
fn fusion_example_matches_grid_normalization() {
    let post = fuse_bayes(GaussianBelief::new(2.0, 1.0).unwrap(), 4.0, 1.0);
    let (mean, var) = grid_moments(-10.0, 10.0, 1e-3, |x| {
        log_normal_pdf(x, 2.0, 1.0) + log_normal_pdf(4.0, x, 1.0)
    });
    assert!((post.mean - mean).abs() < 1e-4 && (post.mean - 3.0).abs() < 1e-12);
    assert!(rel_err(post.variance, var) < 1e-4 && (post.variance - 0.5).abs() < 1e-12);
}

#[test]
fn fusion_matches_grid_normalization_on_random_instances() {
    let mut r = rng(1);
    for _ in 0..100 {
        let prior =
            GaussianBelief::new(r.random_range(-3.0..5.0), r.random_range(0.01..3.0)).unwrap();
        let obs = r.random_range(-3.0..5.0);
        let s2 = r.random_range(0.01..3.0);
        let post = fuse_bayes(prior, obs, s2);
        let sd = post.variance.sqrt();
        let (mean, var) = grid_moments(
            post.mean - 12.0 * sd,
            post.mean + 12.0 * sd,
            sd / 500.0,
            |x| log_normal_pdf(x, prior.mean, prior.variance) + log_normal_pdf(obs, x, s2),
        );
        assert!((post.mean - mean).abs() < 1e-4, "{prior:?} {obs} {s2}");
        assert!(rel_err(post.variance, var) < 1e-4, "{prior:?} {obs} {s2}");
    }
}

#[test]
fn fusion_limits() {
    let prior = GaussianBelief::new(2.0, 0.5).unwrap();
    assert!((fuse_bayes(prior, 7.0, 1e12).mean - 2.0).abs() < 1e-6);
    let vague = GaussianBelief::new(2.0, 1e12).unwrap();
    assert!((fuse_bayes(vague, 7.0, 0.5).mean - 7.0).abs() < 1e-6);
}

#[test]
fn fusion_mean_is_grid_argmax_of_density_product() {
    let mut r = rng(2);
    for _ in 0..50 {
        let prior =
            GaussianBelief::new(r.random_range(0.0..4.0), r.random_range(0.05..2.0)).unwrap();
        let obs = r.random_range(0.0..4.0);
        let s2 = r.random_range(0.05..2.0);
        let step = 1e-4;
        let arg = grid_argmax(-2.0, 6.0, step, |x| {
            log_normal_pdf(x, prior.mean, prior.variance) + log_normal_pdf(obs, x, s2)
        });
        assert!((fuse_bayes(prior, obs, s2).mean - arg).abs() <= step);
    }
}

#[test]
fn conditional_posterior_example_matches_grid_oracle() {
    let inst = PosteriorInstance {
        prior: GaussianBelief::new(2.0, 0.25).unwrap(),
        shape: vec![0.0, 0.9],
        errors: error_model(2, 0, 2, 0.0, 0.01),
        observed: vec![0.0, 1.9],
        sunrise: 0,
    };
    let post =
        posterior_after_observations(inst.prior, &inst.shape, &inst.errors, &inst.observed, 0);
    let (mean, var) = grid_moments(0.0, 10.0, 1e-4, |p| posterior_log_density(&inst, p));
    assert!((post.mean - mean).abs() < 1e-4, "{} vs {mean}", post.mean);
    assert!(
        rel_err(post.variance, var) < 1e-4,
        "{} vs {var}",
        post.variance
    );
}

#[test]
fn conditional_posterior_matches_grid_oracle_on_random_instances() {
    for seed in 0..100 {
        let inst = posterior_instance(seed);
        let post = posterior_after_observations(
            inst.prior,
            &inst.shape,
            &inst.errors,
            &inst.observed,
            inst.sunrise,
        );
        let sd = post.variance.sqrt();
        let (mean, var) = grid_moments(
            post.mean - 12.0 * sd,
            post.mean + 12.0 * sd,
            sd / 500.0,
            |p| posterior_log_density(&inst, p),
        );
        assert!(
            (post.mean - mean).abs() < 1e-4,
            "seed {seed}: {} vs {mean}",
            post.mean
        );
        assert!(
            rel_err(post.variance, var) < 1e-4,
            "seed {seed}: {} vs {var}",
            post.variance
        );
    }
}

#[test]
fn conditional_posterior_precision_grows_with_observations() {
    for seed in 0..20 {
        let inst = posterior_instance(seed);
        let mut last = 0.0;
        for len in 1..=inst.observed.len() {
            let post = posterior_after_observations(
                inst.prior,
                &inst.shape,
                &inst.errors,
                &inst.observed[..len],
                inst.sunrise,
            );
            let precision = 1.0 / post.variance;
            assert!(precision >= last);
            last = precision;
        }
    }
}

#[test]
fn arma_recovers_generating_parameters() {
    let passes = arma_recovery_passes();
    assert!(passes >= 18, "{passes}/20");
}

#[test]
fn error_model_recovers_ar_coefficient() {
    let slots = 30;
    let (rise, set) = (4, 26);
    let mut r = rng(5);
    let deltas: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let mut d = 0.0;
            (0..slots)
                .map(|i| {
                    if i > rise && i < set {
                        d = 0.6 * d + 0.1 * normal(&mut r);
                        d
                    } else {
                        d = 0.0;
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let daytime: Vec<bool> = (0..slots).map(|i| i > rise && i < set).collect();
    let model = fit_error_model_from_residuals(&deltas, &daytime).unwrap();
    // Per-slot standard error is about 0.06 with 200 days.
    let phis: Vec<f64> = (rise + 2..set)
        .map(|i| model.term(i).unwrap().phi)
        .collect();
    let within = phis.iter().filter(|p| (*p - 0.6).abs() <= 0.1).count();
    assert!(within * 10 >= phis.len() * 8, "{phis:?}");
    let mean = phis.iter().sum::<f64>() / phis.len() as f64;
    assert!((mean - 0.6).abs() <= 0.03, "{mean}");
    assert!(phis.iter().all(|p| (p - 0.6).abs() <= 0.3), "{phis:?}");
    for i in rise + 1..set {
        let s2 = model.term(i).unwrap().sigma2;
        assert!((s2 - 0.01).abs() <= 0.004, "slot {i}: {s2}");
    }
    assert!(model.term(rise).is_none() && model.term(set).is_none());
}

#[test]
fn optimal_multiplier_matches_grid_search() {
    let mut r = rng(3);
    for _ in 0..30 {
        let shape: Vec<f64> = (0..12).map(|_| r.random_range(0.0..1.0)).collect();
        let samples: Vec<f64> = shape
            .iter()
            .map(|y| (3.0 * y + 0.3 * normal(&mut r)).max(0.0))
            .collect();
        let day = DailyProfile::new(0, samples.clone(), 12).unwrap();
        let p = optimal_multiplier(&shape, &day).unwrap();
        let sse = |p: f64| -> f64 {
            shape
                .iter()
                .zip(&samples)
                .map(|(y, x)| (p * y - x).powi(2))
                .sum()
        };
        let best = grid_argmax(0.0, 10.0, 1e-4, |p| -sse(p));
        assert!((p - best).abs() <= 1e-3);
    }
    let day = DailyProfile::new(0, vec![1.0, 3.0], 2).unwrap();
    assert!((optimal_multiplier(&[1.0, 1.0], &day).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn snapshot_round_trips_losslessly() {
    let slots = 48;
    let mut forecaster = Forecaster::new(ForecastConfig::default(), slots).unwrap();
    let shape = bell(slots, 10, 38);
    let mut r = rng(9);
    for d in 0..25 {
        let p = 40.0 * (1.0 + 0.2 * normal(&mut r));
        let day: Vec<f64> = shape
            .iter()
            .map(|y| (p * y * (1.0 + 0.05 * normal(&mut r))).max(0.0))
            .collect();
        forecaster
            .ingest_day(&DailyProfile::new(d, day, slots).unwrap())
            .unwrap();
    }
    let snap = forecaster.snapshot();
    let text = serde_json::to_string(&snap).unwrap();
    let back: ForecasterSnapshot = serde_json::from_str(&text).unwrap();
    assert_eq!(back, snap);
    let full: Forecaster =
        serde_json::from_str(&serde_json::to_string(&forecaster).unwrap()).unwrap();
    assert_eq!(full, forecaster);
}

proptest! {
    #[test]
    fn normalization_is_scale_invariant(
        samples in prop::collection::vec(0.0f64..100.0, 2..40),
        c in 1e-3f64..1e3,
    ) {
        prop_assume!(samples.iter().any(|v| *v > 0.0));
        let n = samples.len();
        let a = normalize_day(&DailyProfile::new(0, samples.clone(), n).unwrap()).unwrap();
        let scaled: Vec<f64> = samples.iter().map(|v| v * c).collect();
        let b = normalize_day(&DailyProfile::new(0, scaled, n).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(a.iter().copied().fold(0.0, f64::max) == 1.0);
    }

    #[test]
    fn shape_update_is_convex(
        prev in prop::collection::vec(0.0f64..=1.0, 8),
        samples in prop::collection::vec(0.0f64..50.0, 8),
        alpha in 0.0f64..=1.0,
    ) {
        prop_assume!(samples.iter().any(|v| *v > 0.0));
        let day = DailyProfile::new(0, samples, 8).unwrap();
        let normalized = normalize_day(&day).unwrap();
        let next = update_shape(&ShapeState::new(prev.clone(), alpha, 0).unwrap(), &day).unwrap();
        for ((y, a), b) in next.shape.iter().zip(&prev).zip(&normalized) {
            prop_assert!(*y >= a.min(*b) - 1e-15 && *y <= a.max(*b) + 1e-15);
        }
    }

    #[test]
    fn fusion_shrinks_variance(
        mean in -10.0f64..10.0,
        var in 1e-6f64..1e6,
        obs in -10.0f64..10.0,
        s2 in 1e-6f64..1e6,
    ) {
        let post = fuse_bayes(GaussianBelief::new(mean, var).unwrap(), obs, s2);
        prop_assert!(post.variance < var.min(s2));
        prop_assert!(post.variance > 0.0);
    }

    #[test]
    fn full_window_estimate_equals_restricted_optimum(
        samples in prop::collection::vec(0.0f64..50.0, 12),
        rise in 0usize..6,
    ) {
        let shape = bell(12, 0, 11);
        let window = &samples[rise..];
        let daytime = daytime_multiplier_estimate(&shape, window, rise);
        let restricted = DailyProfile::new(0, window.to_vec(), window.len()).unwrap();
        let full = optimal_multiplier(&shape[rise..], &restricted);
        match (daytime, full) {
            (Ok(a), Ok(b)) => prop_assert!(a == b),
            (a, b) => prop_assert!(a.is_err() && b.is_err()),
        }
    }

    #[test]
    fn arma_residual_replay_is_bitwise(seed in 0u64..50) {
        let series = arma_series(0.2, 0.5, 0.2, 0.1, 60, seed);
        let m = fit_arma11(&series);
        prop_assert_eq!(css_residuals(&series, m.mu, m.phi, m.theta), m.residuals);
    }
}
