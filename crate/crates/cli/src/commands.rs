use std::sync::Arc;

use kalman_cascade::asymptotics::{empirical_limit, fixed_point, predict_limit, TAIL_FRACTION};
use kalman_cascade::cascade::{predict_rate, rho_samples, run_trajectory};
use kalman_cascade::gaussian::bayes_update;
use kalman_cascade::montecarlo::{run_paths, DEFAULT_CHECKPOINTS};
use kalman_cascade::rate_fit::{default_window, fit_power_law, ratio_limit};
use kalman_cascade::{Belief64, CascadeConfig64, LimitMethod, McConfig64, RiccatiSpec64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::args::{FPreset, GaussianArgs, McArgs, OutputArgs, PrecisionArgs, RateArgs, RiccatiArgs};
use crate::output::{Cell, ExperimentConfig, Table};
use crate::Failure;

pub struct Outcome {
    pub config: ExperimentConfig,
    pub table: Table,
    /// False when a check the command performs did not pass.
    pub ok: bool,
}

fn params(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

pub fn experiment(
    command: &'static str,
    out: &OutputArgs,
    cascade: Option<CascadeConfig64>,
    mc: Option<McConfig64>,
    extra: Value,
) -> ExperimentConfig {
    ExperimentConfig {
        command,
        cascade,
        mc,
        output_format: out.format.unwrap_or_default(),
        output_path: out.output.as_ref().map(|p| p.display().to_string()),
        params: params(extra),
    }
}

fn tail_fraction(t: Option<f64>) -> Result<f64, Failure> {
    let t = t.unwrap_or(TAIL_FRACTION);
    if t > 0.0 && t <= 1.0 {
        Ok(t)
    } else {
        Err(Failure::Usage(format!("--tail-fraction must lie in (0, 1], got {t}")))
    }
}

pub fn precision(mut a: PrecisionArgs) -> Result<Outcome, Failure> {
    let file = a.out.load()?;
    a.cascade.fill(&file);
    a.schedule.fill(&file);
    let cascade = a.cascade.build()?;
    let k_max = a.schedule.k_max(1000)?;
    let schedule = a.schedule.schedule()?;
    let states = run_trajectory(&cascade, k_max, schedule)?;

    let m = cascade.m;
    let mut columns = vec!["k".to_string(), "rho".into(), "denom".into()];
    columns.extend((1..m).map(|j| format!("gamma_{j}")));
    columns.extend((1..=m).map(|j| format!("alpha_{j}")));
    let mut table = Table::new(columns);
    for s in &states {
        let mut row = vec![Cell::Int(s.k), s.rho.into(), s.denom.into()];
        row.extend(s.gamma.iter().map(|&g| Cell::Real(g)));
        row.extend(s.alpha.iter().map(|&x| Cell::Real(x)));
        table.push(row);
    }
    let config = experiment(
        "precision",
        &a.out,
        Some(cascade),
        None,
        json!({ "k_max": k_max, "schedule": schedule }),
    );
    Ok(Outcome { config, table, ok: true })
}

pub fn rate(mut a: RateArgs) -> Result<Outcome, Failure> {
    let file = a.out.load()?;
    a.cascade.fill(&file);
    a.schedule.fill(&file);
    a.window_lo = a.window_lo.or(file.window_lo);
    a.window_hi = a.window_hi.or(file.window_hi);
    a.tail_fraction = a.tail_fraction.or(file.tail_fraction);
    let cascade = a.cascade.build()?;
    let k_max = a.schedule.k_max(1_000_000)?;
    let schedule = a.schedule.schedule()?;
    let tail = tail_fraction(a.tail_fraction)?;
    let pred = predict_rate(&cascade)?;

    let samples = rho_samples(&run_trajectory(&cascade, k_max, schedule)?);
    let (lo, hi) = default_window(&samples);
    let window = (a.window_lo.unwrap_or(lo), a.window_hi.unwrap_or(hi));
    if window.0 == 0 || window.0 >= window.1 || window.1 > k_max {
        return Err(Failure::Usage(format!("fit window {window:?} must satisfy 1 <= lo < hi <= kmax")));
    }
    let fit = fit_power_law(&samples, window)?;
    let constant_hat = ratio_limit(&samples, pred.beta, tail)?;

    let mut table = Table::new([
        "k_max",
        "window_lo",
        "window_hi",
        "points",
        "beta_hat",
        "beta_theory",
        "constant_hat",
        "constant_theory",
        "r_squared",
        "rel_err_beta",
        "rel_err_constant",
        "source",
    ]);
    table.push(vec![
        k_max.into(),
        window.0.into(),
        window.1.into(),
        (fit.points as u64).into(),
        fit.beta_hat.into(),
        pred.beta.into(),
        constant_hat.into(),
        pred.constant.into(),
        fit.r_squared.into(),
        ((fit.beta_hat - pred.beta).abs() / pred.beta).into(),
        ((constant_hat - pred.constant).abs() / pred.constant).into(),
        json!(pred.source).as_str().unwrap_or_default().into(),
    ]);
    let config = experiment(
        "rate",
        &a.out,
        Some(cascade),
        None,
        json!({ "k_max": k_max, "schedule": schedule, "window": [window.0, window.1], "tail_fraction": tail }),
    );
    Ok(Outcome { config, table, ok: true })
}

pub fn montecarlo(mut a: McArgs) -> Result<Outcome, Failure> {
    let file = a.out.load()?;
    a.cascade.fill(&file);
    a.seed = a.seed.or(file.seed);
    a.paths = a.paths.or(file.paths);
    if a.checkpoints.is_none() {
        a.checkpoints = file.checkpoints.clone();
    }
    a.kmax = a.kmax.or(file.kmax);
    a.theta_bar = a.theta_bar.or(file.theta_bar);

    let seed = a
        .seed
        .ok_or_else(|| Failure::Usage("montecarlo requires --seed".into()))?;
    let cascade = a.cascade.build()?;
    let checkpoint_ks = match (a.checkpoints.clone(), a.kmax) {
        (Some(c), _) => c,
        (None, Some(k)) => DEFAULT_CHECKPOINTS.iter().copied().filter(|c| *c <= k).collect(),
        (None, None) => DEFAULT_CHECKPOINTS.to_vec(),
    };
    let k_max = a.kmax.or(checkpoint_ks.last().copied()).unwrap_or(1);
    let mc = McConfig64 {
        cascade: cascade.clone(),
        theta_bar: a.theta_bar.unwrap_or(0.0),
        n_paths: a.paths.unwrap_or(1000),
        k_max,
        seed,
        checkpoint_ks,
    };
    let reports = run_paths(&mc)?;

    let mut table = Table::new([
        "k",
        "empirical_mse",
        "predicted_var",
        "ratio",
        "lo",
        "hi",
        "status",
        "mean_error",
    ]);
    let mut ok = true;
    for r in &reports {
        let status = if !r.asserted {
            "diagnostic"
        } else if r.within_bounds() {
            "pass"
        } else {
            "fail"
        };
        ok &= r.passed();
        table.push(vec![
            r.k.into(),
            r.empirical_mse.into(),
            r.predicted_var.into(),
            r.ratio.into(),
            r.chi2_bounds.0.into(),
            r.chi2_bounds.1.into(),
            status.into(),
            r.mean_error.into(),
        ]);
    }
    let config = experiment("montecarlo", &a.out, Some(cascade), Some(mc), json!({}));
    Ok(Outcome { config, table, ok })
}

pub fn riccati(mut a: RiccatiArgs) -> Result<Outcome, Failure> {
    let file = a.out.load()?;
    a.c = a.c.or(file.c);
    a.n = a.n.or(file.n);
    a.delta = a.delta.or(file.delta);
    if a.f.is_none() {
        a.f = file.f.as_deref().map(str::parse).transpose().map_err(Failure::Usage)?;
    }
    a.x0 = a.x0.or(file.x0);
    a.kmax = a.kmax.or(file.kmax);
    a.tail_fraction = a.tail_fraction.or(file.tail_fraction);

    let preset = a.f.unwrap_or(FPreset::Linear);
    let k_max = a.kmax.unwrap_or(1_000_000);
    let tail = tail_fraction(a.tail_fraction)?;
    let spec = RiccatiSpec64::new(
        a.c.unwrap_or(1.0),
        a.n.unwrap_or(1),
        a.delta.unwrap_or(0.0),
        Arc::new(move |x| preset.eval(x)),
        a.x0.unwrap_or(1.0),
    )?;
    let pred = predict_limit(&spec)?;
    let emp = empirical_limit(&spec, k_max, tail)?;
    let fixed = if pred.method == LimitMethod::FixedPointDelta1 {
        Cell::Real(fixed_point(&spec)?)
    } else {
        Cell::Empty
    };

    let mut table = Table::new([
        "c",
        "n",
        "delta",
        "f",
        "beta",
        "predicted_limit",
        "empirical_limit",
        "rel_err",
        "method",
        "fixed_point",
    ]);
    table.push(vec![
        spec.c.into(),
        u64::from(spec.n).into(),
        spec.delta.into(),
        preset.to_string().into(),
        pred.beta.into(),
        pred.constant.into(),
        emp.into(),
        ((emp - pred.constant).abs() / pred.constant).into(),
        json!(pred.method).as_str().unwrap_or_default().into(),
        fixed,
    ]);
    let extra = json!({
        "c": spec.c,
        "n": spec.n,
        "delta": spec.delta,
        "f": preset.to_string(),
        "x0": spec.x0,
        "k_max": k_max,
        "tail_fraction": tail,
    });
    let config = experiment("riccati", &a.out, None, None, extra);
    Ok(Outcome { config, table, ok: true })
}

/// Largest relative errors of the posterior mean and variance of
/// `bayes_update` against direct conditioning over `samples` random draws.
pub fn gaussian_errors(samples: usize, seed: u64) -> Result<(f64, f64), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let mu: f64 = rng.random_range(-10.0..10.0);
        let p = 10f64.powf(rng.random_range(-3.0..3.0));
        let q = 10f64.powf(rng.random_range(-3.0..3.0));
        let y: f64 = rng.random_range(-10.0..10.0);
        let post = bayes_update(Belief64::new(mu, p)?, y, q)?;
        let (s_tt, s_ee) = (p.recip(), q.recip());
        let s_yy = s_tt + s_ee;
        let mean = mu + s_tt / s_yy * (y - mu);
        let var = s_tt * s_ee / s_yy;
        let scale = mean.abs().max(mu.abs()).max(y.abs());
        worst_mean = worst_mean.max((post.mean - mean).abs() / scale);
        worst_var = worst_var.max((post.variance() / var - 1.0).abs());
    }
    Ok((worst_mean, worst_var))
}

pub fn gaussian_check(mut a: GaussianArgs) -> Result<Outcome, Failure> {
    let file = a.out.load()?;
    let samples = a.samples.or(file.samples).unwrap_or(100_000);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let tol = a.tol.or(file.tol).unwrap_or(1e-12);
    if samples == 0 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Failure::Usage(format!("--tol must be finite and >= 0, got {tol}")));
    }
    let (err_mean, err_var) = gaussian_errors(samples, seed)?;
    let ok = err_mean <= tol && err_var <= tol;
    let mut table = Table::new(["samples", "max_rel_err_mean", "max_rel_err_variance", "tol", "status"]);
    table.push(vec![
        (samples as u64).into(),
        err_mean.into(),
        err_var.into(),
        tol.into(),
        if ok { "pass" } else { "fail" }.into(),
    ]);
    let config = experiment(
        "gaussian-check",
        &a.out,
        None,
        None,
        json!({ "samples": samples, "seed": seed, "tol": tol }),
    );
    Ok(Outcome { config, table, ok })
}
