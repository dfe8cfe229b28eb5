use std::sync::Arc;

use kalman_cascade::asymptotics::{empirical_limit, fixed_point, predict_limit, TAIL_FRACTION};
use kalman_cascade::cascade::{denominator, for_each_step, leading_coefficient, predict_rate, rho_samples, run_trajectory};
use kalman_cascade::montecarlo::{bias_bound, run_paths, sample_mean_bias};
use kalman_cascade::rate_fit::{default_window, fit_power_law, ratio_limit};
use kalman_cascade::{CascadeConfig64, McConfig64, Regime, RiccatiSpec64, SampleSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::args::{OneOrMany, VerifyArgs};
use crate::commands::{experiment, gaussian_errors, Outcome};
use crate::output::{Cell, Table};
use crate::Failure;

struct Check {
    id: &'static str,
    name: String,
    value: f64,
    target: f64,
    tol: f64,
    pass: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn abs_check(id: &'static str, name: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
    let pass = (value - target).abs() <= tol;
    Check { id, name: name.into(), value, target, tol, pass }
}

fn rel_check(id: &'static str, name: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
    let pass = rel(value, target) <= tol;
    Check { id, name: name.into(), value, target, tol, pass }
}

struct Base {
    lambda_e: f64,
    lambda_w: f64,
    rho0: f64,
}

impl Base {
    fn config(&self, m: usize, regime: Regime, delta: f64) -> CascadeConfig64 {
        CascadeConfig64 {
            m,
            lambda_e: self.lambda_e,
            lambda_w: vec![self.lambda_w; m - 1],
            rho0: self.rho0,
            delta,
            regime,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn rate_checks(
    out: &mut Vec<Check>,
    ids: (&'static str, &'static str),
    label: &str,
    c: &CascadeConfig64,
    k_max: u64,
    beta_tol: f64,
    const_tol: f64,
) -> Result<(), Failure> {
    let pred = predict_rate(c)?;
    let samples = rho_samples(&run_trajectory(c, k_max, SampleSchedule::default())?);
    let fit = fit_power_law(&samples, default_window(&samples))?;
    let lim = ratio_limit(&samples, pred.beta, TAIL_FRACTION)?;
    out.push(abs_check(ids.0, format!("{label} exponent"), fit.beta_hat, pred.beta, beta_tol));
    out.push(rel_check(ids.1, format!("{label} constant"), lim, pred.constant, const_tol));
    Ok(())
}

fn run_checks(base: &Base, quick: bool, seed: u64) -> Result<Vec<Check>, Failure> {
    let mut out = Vec::new();

    rate_checks(&mut out, ("1a", "1b"), "m=2 unscaled", &base.config(2, Regime::Unscaled, 0.0), 1_000_000, 0.02, 0.05)?;
    if !quick {
        rate_checks(&mut out, ("2a", "2b"), "m=3 unscaled", &base.config(3, Regime::Unscaled, 0.0), 10_000_000, 0.03, 0.10)?;
    }
    rate_checks(&mut out, ("3a", "3b"), "m=2 delta=0.5", &base.config(2, Regime::Scaled, 0.5), 1_000_000, 0.02, 0.05)?;
    rate_checks(&mut out, ("4a", "4b"), "m=2 delta=1", &base.config(2, Regime::Scaled, 1.0), 1_000_000, 0.02, 0.03)?;

    let c = base.config(2, Regime::Scaled, 2.0);
    let mut last = 0.0;
    for_each_step(&c, 1_000_000, |s| last = s.rho)?;
    out.push(rel_check("5", "m=2 delta=2 rho_k/k", last / 1e6, c.total_noise().recip(), 0.01));

    let mut worst = 0.0f64;
    for m in [2usize, 3, 5] {
        let c = base.config(m, Regime::ZeroedPrior, 0.0);
        let mut last = 0.0;
        for_each_step(&c, 100_000, |s| last = s.rho)?;
        worst = worst.max(rel(last, c.rho0 + 1e5 / c.total_noise()));
    }
    out.push(abs_check("6", "zeroed prior identity rel err", worst, 0.0, 1e-12));

    let c = base.config(2, Regime::ScaledLast, 1.0);
    let (mut rho2, mut max, mut lo, mut hi) = (0.0, f64::MIN, f64::MAX, f64::MIN);
    for_each_step(&c, 1_000_000, |s| {
        if s.k == 2 {
            rho2 = s.rho;
        }
        max = max.max(s.rho);
        if s.k > 900_000 {
            lo = lo.min(s.rho);
            hi = hi.max(s.rho);
        }
    })?;
    out.push(Check {
        id: "7a",
        name: "scaled-last max below rho_2 + 2".into(),
        value: max,
        target: rho2 + 2.0,
        tol: 0.0,
        pass: max <= rho2 + 2.0,
    });
    out.push(abs_check("7b", "scaled-last final 10% range", hi - lo, 0.0, 1e-3));

    for (m, ids) in [(2usize, ("8a", "8b")), (3, ("8c", "8d"))] {
        let mc = McConfig64 {
            cascade: base.config(m, Regime::Unscaled, 0.0),
            theta_bar: 0.0,
            n_paths: 1000,
            k_max: 1000,
            seed,
            checkpoint_ks: vec![1, 10, 100, 1000],
        };
        let reports = run_paths(&mc)?;
        let inside = reports.iter().filter(|r| r.within_bounds()).count() as f64 / reports.len() as f64;
        let mut worst_se = 0.0f64;
        for r in &reports {
            worst_se = worst_se.max(4.0 * sample_mean_bias(r)?.abs() / bias_bound(r));
        }
        out.push(abs_check(ids.0, format!("m={m} MSE ratio inside chi2 interval (share)"), inside, 1.0, 0.0));
        out.push(Check {
            id: ids.1,
            name: format!("m={m} bias in standard errors"),
            value: worst_se,
            target: 0.0,
            tol: 4.0,
            pass: worst_se <= 4.0,
        });
    }

    for (id, (c, n, delta)) in ["9a", "9b", "9c", "9d"]
        .into_iter()
        .zip([(1.0, 1, 0.0), (3.0, 2, 0.0), (1.0, 1, 0.5), (1.0, 1, 1.0)])
    {
        let spec = RiccatiSpec64::new(c, n, delta, Arc::new(|x| x), 1.0)?;
        let pred = predict_limit(&spec)?.constant;
        let emp = empirical_limit(&spec, 1_000_000, TAIL_FRACTION)?;
        out.push(rel_check(id, format!("riccati C={c} N={n} delta={delta} limit"), emp, pred, 0.05));
    }
    let spec = RiccatiSpec64::new(1.0, 1, 1.0, Arc::new(|x| x), 1.0)?;
    out.push(abs_check("9e", "riccati fixed point", fixed_point(&spec)?, 0.5f64.sqrt(), 1e-12));

    let (err_mean, err_var) = gaussian_errors(if quick { 10_000 } else { 100_000 }, seed)?;
    out.push(abs_check("10", "bayes update oracle rel err", err_mean.max(err_var), 0.0, 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for m in [2usize, 3, 4] {
        for _ in 0..20 {
            let c = CascadeConfig64::unscaled(
                rng.random_range(0.5..2.0),
                (0..m - 1).map(|_| rng.random_range(0.5..2.0)).collect(),
                1.0,
            );
            let ratio = denominator(&c, 1e5)? / 1e5f64.powi(c.denom_degree() as i32);
            worst = worst.max(rel(ratio, leading_coefficient(&c)?));
        }
    }
    out.push(abs_check("11", "leading coefficient rel err", worst, 0.0, 0.01));

    for (id, label, c) in [
        ("12a", "m=1 classical", CascadeConfig64::unscaled(base.lambda_e, vec![], base.rho0)),
        ("12b", "no transmission noise", CascadeConfig64::unscaled(base.lambda_e, vec![0.0; 2], base.rho0)),
    ] {
        let mut worst = 0.0f64;
        for_each_step(&c, 10_000, |s| {
            worst = worst.max(rel(s.rho, base.rho0 + s.k as f64 / base.lambda_e));
        })?;
        out.push(abs_check(id, format!("{label} rel err"), worst, 0.0, 1e-12));
    }
    Ok(out)
}

pub fn verify(mut a: VerifyArgs) -> Result<Outcome, Failure> {
    let file = a.out.load()?;
    a.lambda_e = a.lambda_e.or(file.lambda_e);
    if a.lambda_w.is_none() {
        a.lambda_w = match file.lambda_w {
            Some(OneOrMany::One(w)) => Some(w),
            Some(OneOrMany::Many(_)) => return Err(Failure::Usage("verify takes a single lambda-w".into())),
            None => None,
        };
    }
    a.rho0 = a.rho0.or(file.rho0);
    a.seed = a.seed.or(file.seed);
    let quick = a.quick || file.quick.unwrap_or(false);
    let seed = a.seed.unwrap_or(1);
    let base = Base {
        lambda_e: a.lambda_e.unwrap_or(1.0),
        lambda_w: a.lambda_w.unwrap_or(1.0),
        rho0: a.rho0.unwrap_or(1.0),
    };
    let cascade = base.config(2, Regime::Unscaled, 0.0);
    cascade.validate()?;

    let checks = run_checks(&base, quick, seed)?;
    let ok = checks.iter().all(|c| c.pass);
    let mut table = Table::new(["id", "check", "value", "target", "tolerance", "status"]);
    for c in checks {
        table.push(vec![
            c.id.into(),
            c.name.into(),
            c.value.into(),
            c.target.into(),
            c.tol.into(),
            Cell::from(if c.pass { "pass" } else { "fail" }),
        ]);
    }
    let config = experiment("verify", &a.out, Some(cascade), None, json!({ "quick": quick, "seed": seed }));
    Ok(Outcome { config, table, ok })
}
