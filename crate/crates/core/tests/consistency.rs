use kalman_cascade::montecarlo::{bias_bound, run_paths, sample_mean_bias};
use kalman_cascade::{CascadeConfig, McConfig, Regime};

fn mc(cascade: CascadeConfig<f64>, n_paths: usize, checkpoint_ks: Vec<u64>, seed: u64) -> McConfig<f64> {
    let k_max = *checkpoint_ks.last().unwrap();
    McConfig { cascade, theta_bar: 0.0, n_paths, k_max, seed, checkpoint_ks }
}

#[test]
fn two_agent_ratio_at_hundred_steps() {
    let c = mc(CascadeConfig::unit(2, Regime::Unscaled, 0.0), 10_000, vec![100], 7);
    let r = &run_paths(&c).unwrap()[0];
    assert!(r.asserted && r.within_bounds(), "{r:?}");
    assert!((r.chi2_bounds.0 - 0.955).abs() < 0.01 && (r.chi2_bounds.1 - 1.047).abs() < 0.01);
}

#[test]
fn no_transmission_noise_is_classical() {
    let c = mc(CascadeConfig::unscaled(1.0, vec![0.0, 0.0], 1.0), 5000, vec![0, 1, 50], 11);
    let reports = run_paths(&c).unwrap();
    for r in &reports {
        assert!((r.predicted_var - 1.0 / (1.0 + r.k as f64)).abs() < 1e-14);
        assert!(r.passed(), "{r:?}");
    }
}

#[test]
fn zeroed_regime_is_consistent() {
    let c = mc(CascadeConfig::unit(3, Regime::ZeroedPrior, 0.0), 4000, vec![1, 10, 100], 3);
    for r in run_paths(&c).unwrap() {
        assert!(r.passed(), "{r:?}");
        assert!(sample_mean_bias(&r).unwrap().abs() <= bias_bound(&r));
    }
}

#[test]
fn scaled_regime_is_diagnostic_only() {
    let c = mc(CascadeConfig::unit(2, Regime::Scaled, 0.5), 500, vec![10, 100], 5);
    for r in run_paths(&c).unwrap() {
        assert!(!r.asserted && r.passed());
        assert!(r.empirical_mse.is_finite() && r.empirical_mse >= 0.0);
    }
}

#[test]
fn seed_determines_output() {
    let c = mc(CascadeConfig::unit(2, Regime::Unscaled, 0.0), 300, vec![1, 20], 99);
    assert_eq!(run_paths(&c).unwrap(), run_paths(&c).unwrap());
    let other = McConfig { seed: 100, ..c.clone() };
    assert_ne!(run_paths(&c).unwrap(), run_paths(&other).unwrap());
}

#[test]
fn bad_configs_are_rejected() {
    let base = mc(CascadeConfig::unit(2, Regime::Unscaled, 0.0), 10, vec![1, 5], 0);
    for bad in [
        McConfig { n_paths: 0, ..base.clone() },
        McConfig { checkpoint_ks: vec![5, 1], ..base.clone() },
        McConfig { checkpoint_ks: vec![1, 6], ..base.clone() },
        McConfig { theta_bar: f64::NAN, ..base.clone() },
    ] {
        assert!(run_paths(&bad).is_err());
    }
}
