use kalman_cascade::cascade::{self, run_trajectory, rho_samples, scale_factor, CascadeConfig, Regime};
use kalman_cascade::rate_fit::{fit_power_law, ratio_limit};
use kalman_cascade::SampleSchedule;
use proptest::prelude::*;

/// Denominator rebuilt from the gamma definitions, independent of the
/// library's chain.
fn denom_by_hand(c: &CascadeConfig<f64>, k: u64, rho_prev: f64) -> (f64, f64) {
    let scaled = scale_factor(k, c.delta) * rho_prev;
    let (sub, last) = match c.regime {
        Regime::Unscaled => (rho_prev, rho_prev),
        Regime::Scaled => (scaled, rho_prev),
        Regime::ZeroedPrior => (0.0, rho_prev),
        Regime::ScaledLast => (scaled, scaled),
    };
    let mut sum = c.lambda_e;
    for w in &c.lambda_w {
        sum += w * (1.0 + sub * sum).powi(2);
    }
    (sum, last)
}

fn regime_strategy() -> impl Strategy<Value = (Regime, f64)> {
    prop_oneof![
        Just((Regime::Unscaled, 0.0)),
        (0.0f64..2.5).prop_map(|d| (Regime::Scaled, d)),
        Just((Regime::ZeroedPrior, 0.0)),
        (0.1f64..2.0).prop_map(|d| (Regime::ScaledLast, d)),
    ]
}

fn config_strategy() -> impl Strategy<Value = CascadeConfig<f64>> {
    (1usize..=5, 1e-3f64..1e1, 1e-2f64..1e1, regime_strategy()).prop_flat_map(|(m, le, rho0, (regime, delta))| {
        prop::collection::vec(0.0f64..1e1, m - 1).prop_map(move |lw| CascadeConfig {
            m,
            lambda_e: le,
            lambda_w: lw,
            rho0,
            delta,
            regime,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn increment_matches_independent_denominator(c in config_strategy()) {
        let traj = run_trajectory(&c, 200, SampleSchedule::All).unwrap();
        let mut prev = c.rho0;
        for s in &traj {
            let (d, last_prior) = denom_by_hand(&c, s.k, prev);
            prop_assert!((s.denom - d).abs() <= 1e-12 * d);
            let inc = s.rho - last_prior;
            prop_assert!((inc - 1.0 / s.denom).abs() <= f64::EPSILON * s.rho, "k={} inc={inc} 1/D={}", s.k, 1.0 / s.denom);
            prop_assert!(s.denom >= c.lambda_e);
            prop_assert!(s.alpha.iter().all(|a| *a > 0.0 && *a <= 1.0));
            if c.regime != Regime::ScaledLast {
                prop_assert!(s.rho >= prev);
                // an increment below half an ulp is absorbed by rounding
                if 1.0 / s.denom > f64::EPSILON * prev {
                    prop_assert!(s.rho > prev);
                }
                prop_assert!(s.rho - prev <= 1.0 / c.lambda_e * (1.0 + 1e-12));
                prop_assert!(s.rho <= c.rho0 + s.k as f64 / c.lambda_e * (1.0 + 1e-12));
            }
            if c.regime == Regime::Unscaled {
                for (g, w) in s.gamma.iter().zip(&c.lambda_w) {
                    prop_assert!(g >= w);
                }
            }
            prev = s.rho;
        }
    }

    #[test]
    fn trajectories_are_deterministic(c in config_strategy()) {
        let a = run_trajectory(&c, 1000, SampleSchedule::Geometric(16)).unwrap();
        let b = run_trajectory(&c, 1000, SampleSchedule::Geometric(16)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn geometric_schedule_matches_full_trajectory() {
    let c = CascadeConfig::<f64>::unit(3, Regime::Scaled, 0.4);
    let all = run_trajectory(&c, 5000, SampleSchedule::All).unwrap();
    let geo = run_trajectory(&c, 5000, SampleSchedule::Geometric(32)).unwrap();
    for s in &geo {
        assert_eq!(s, &all[s.k as usize - 1]);
    }
}

#[test]
fn two_agent_rate_on_top_two_decades() {
    let c = CascadeConfig::<f64>::unit(2, Regime::Unscaled, 0.0);
    let samples = rho_samples(&run_trajectory(&c, 1_000_000, SampleSchedule::default()).unwrap());
    let fit = fit_power_law(&samples, (10_000, 1_000_000)).unwrap();
    assert!((fit.beta_hat - 1.0 / 3.0).abs() <= 0.02, "{fit:?}");
    let lim = ratio_limit(&samples, 1.0 / 3.0, 0.25).unwrap();
    assert!((lim / 3f64.cbrt() - 1.0).abs() <= 0.05, "{lim}");
}

#[test]
fn zeroed_ratio_limit_is_exact() {
    let c = CascadeConfig::<f64>::unit(3, Regime::ZeroedPrior, 0.0);
    let samples = rho_samples(&run_trajectory(&c, 100_000, SampleSchedule::default()).unwrap());
    let lim = ratio_limit(&samples, 1.0, 0.25).unwrap();
    assert!((lim - 1.0 / 3.0).abs() <= 1e-3 / 3.0, "{lim}");
}

#[test]
fn nested_windows_approach_theory() {
    for m in [2usize, 3] {
        let c = CascadeConfig::<f64>::unit(m, Regime::Unscaled, 0.0);
        let beta = cascade::predict_rate(&c).unwrap().beta;
        let samples = rho_samples(&run_trajectory(&c, 1_000_000, SampleSchedule::default()).unwrap());
        let errs: Vec<f64> = [10_000u64, 100_000, 1_000_000]
            .iter()
            .map(|&hi| (fit_power_law(&samples, (1000, hi)).unwrap().beta_hat - beta).abs())
            .collect();
        assert!(errs[0] >= errs[1] && errs[1] >= errs[2], "m={m}: {errs:?}");
    }
}

#[test]
fn scaled_last_is_bounded_over_long_run() {
    let c = CascadeConfig::<f64>::unit(2, Regime::ScaledLast, 1.0);
    let (mut sup, mut arg_sup, mut last) = (0.0f64, 0u64, 0.0);
    cascade::for_each_step(&c, 1_000_000, |s| {
        if s.rho > sup {
            sup = s.rho;
            arg_sup = s.k;
        }
        last = s.rho;
    })
    .unwrap();
    assert!(sup.is_finite() && arg_sup < 1_000_000);
    assert!(last > 0.0 && last < sup);
}

#[test]
fn single_precision_tracks_double_precision() {
    let c64 = CascadeConfig::<f64>::unit(2, Regime::Unscaled, 0.0);
    let c32 = CascadeConfig::<f32>::unit(2, Regime::Unscaled, 0.0);
    let a = run_trajectory(&c64, 10_000, SampleSchedule::Geometric(8)).unwrap();
    let b = run_trajectory(&c32, 10_000, SampleSchedule::Geometric(8)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.rho - y.rho as f64).abs() < 1e-3 * x.rho);
    }
}
