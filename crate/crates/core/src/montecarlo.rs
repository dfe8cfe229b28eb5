//! Stochastic simulation of the agent chain.
//!
//! Each path draws `theta` from the prior, then at every step feeds agent 1 a
//! noisy signal, passes noisy posterior means down the chain and lets each
//! receiving agent invert the message back into an equivalent observation of
//! `theta`. Across paths the squared error of the published mean should match
//! `1 / rho_k` if the precision recursion is the true posterior precision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cascade::{run_trajectory, CascadeConfig, PrecisionState, Regime};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::SampleSchedule;

/// Default cross-path checkpoints.
pub const DEFAULT_CHECKPOINTS: [u64; 5] = [1, 10, 100, 1000, 10_000];

/// Central probability covered by [`ConsistencyReport::chi2_bounds`].
pub const CHI2_COVERAGE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig<T> {
    pub cascade: CascadeConfig<T>,
    /// Prior mean of `theta`.
    pub theta_bar: T,
    pub n_paths: usize,
    pub k_max: u64,
    pub seed: u64,
    /// Strictly increasing steps in `0..=k_max`; `0` reports the prior.
    pub checkpoint_ks: Vec<u64>,
}

impl<T: Scalar> McConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.cascade.validate()?;
        if !self.theta_bar.is_finite() {
            return Err(Error::Config(format!("theta_bar must be finite, got {}", self.theta_bar)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.checkpoint_ks.is_empty() {
            return Err(Error::Config("at least one checkpoint is required".into()));
        }
        if self.checkpoint_ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
        if let Some(k) = self.checkpoint_ks.iter().find(|k| **k > self.k_max) {
            return Err(Error::Config(format!("checkpoint {k} beyond k_max={}", self.k_max)));
        }
        Ok(())
    }
}

/// One realization after some step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState<T> {
    pub theta: T,
    pub public_mean: T,
    /// Posterior mean of each agent.
    pub agent_means: Vec<T>,
    /// Equivalent observations reconstructed by agents `2..=m`.
    pub last_z: Vec<T>,
}

impl<T: Scalar> PathState<T> {
    /// State before any data: every agent holds the prior mean.
    pub fn prior(theta: T, theta_bar: T, m: usize) -> Self {
        Self {
            theta,
            public_mean: theta_bar,
            agent_means: vec![theta_bar; m],
            last_z: vec![theta_bar; m.saturating_sub(1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport<T> {
    pub k: u64,
    pub n_paths: usize,
    /// Mean over paths of `(public_mean - theta)^2`.
    pub empirical_mse: T,
    /// Mean over paths of `public_mean - theta`.
    pub mean_error: T,
    /// `1 / rho_k`.
    pub predicted_var: T,
    pub ratio: T,
    /// Central interval of `chi2(n) / n` at [`CHI2_COVERAGE`].
    pub chi2_bounds: (T, T),
    /// False in mis-specified (scaled) regimes, where the ratio is only a
    /// diagnostic.
    pub asserted: bool,
}

impl<T: Scalar> ConsistencyReport<T> {
    pub fn within_bounds(&self) -> bool {
        self.ratio >= self.chi2_bounds.0 && self.ratio <= self.chi2_bounds.1
    }

    pub fn passed(&self) -> bool {
        !self.asserted || self.within_bounds()
    }
}

/// Message agent `j` sends, reconstructed as an observation of `theta`.
pub fn equivalent_observation<T: Scalar>(transmitted: T, public_mean: T, alpha: T) -> T {
    (transmitted - (T::one() - alpha) * public_mean) / alpha
}

/// Inverse of [`equivalent_observation`].
pub fn transmitted_from_observation<T: Scalar>(z: T, public_mean: T, alpha: T) -> T {
    (T::one() - alpha) * public_mean + alpha * z
}

/// Advances one path by one step.
///
/// `draws` holds `m` standard normals: the observation noise followed by the
/// `m - 1` transmission noises.
pub fn step_path<T: Scalar>(
    config: &McConfig<T>,
    state: &PathState<T>,
    precision_prev: &PrecisionState<T>,
    precision_new: &PrecisionState<T>,
    draws: &[T],
) -> Result<PathState<T>> {
    let cascade = &config.cascade;
    let m = cascade.m;
    if precision_new.k != precision_prev.k + 1 {
        return Err(Error::Domain(format!(
            "precision states must be consecutive, got k={} and k={}",
            precision_prev.k, precision_new.k
        )));
    }
    if draws.len() != m || precision_new.alpha.len() != m {
        return Err(Error::Domain(format!(
            "expected {m} draws and gains, got {} and {}",
            draws.len(),
            precision_new.alpha.len()
        )));
    }
    let alpha = &precision_new.alpha;
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > T::zero())) {
        return Err(Error::Domain(format!("gain {a} cannot be inverted")));
    }
    let prior = state.public_mean;
    let signal = state.theta + cascade.lambda_e.sqrt() * draws[0];
    let mut agent_means = Vec::with_capacity(m);
    let mut last_z = Vec::with_capacity(m - 1);
    agent_means.push(transmitted_from_observation(signal, prior, alpha[0]));
    for j in 1..m {
        let heard = agent_means[j - 1] + cascade.lambda_w[j - 1].sqrt() * draws[j];
        let z = equivalent_observation(heard, prior, alpha[j - 1]);
        last_z.push(z);
        agent_means.push(transmitted_from_observation(z, prior, alpha[j]));
    }
    let public_mean = agent_means[m - 1];
    if !public_mean.is_finite() {
        return Err(Error::Overflow { k: precision_new.k, agent: m });
    }
    Ok(PathState {
        theta: state.theta,
        public_mean,
        agent_means,
        last_z,
    })
}

/// Per-path random stream: the same seed with a stream index per path.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Central interval of `chi2(n) / n` at the given coverage.
pub fn chi2_ratio_bounds(n_paths: usize, coverage: f64) -> (f64, f64) {
    let dist = ChiSquared::new(n_paths as f64).expect("positive degrees of freedom");
    let tail = (1.0 - coverage) / 2.0;
    let n = n_paths as f64;
    (dist.inverse_cdf(tail) / n, dist.inverse_cdf(1.0 - tail) / n)
}

/// Errors `public_mean - theta` of one path at each checkpoint.
fn simulate_path<T>(config: &McConfig<T>, precision: &[PrecisionState<T>], path: u64) -> Result<Vec<T>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    let m = config.cascade.m;
    let mut rng = path_rng(config.seed, path);
    let prior_sd = config.cascade.rho0.recip().sqrt();
    let theta = config.theta_bar + prior_sd * StandardNormal.sample(&mut rng);
    let mut state = PathState::prior(theta, config.theta_bar, m);
    let mut errors = Vec::with_capacity(config.checkpoint_ks.len());
    let mut checkpoints = config.checkpoint_ks.iter().copied().peekable();
    if checkpoints.peek() == Some(&0) {
        checkpoints.next();
        errors.push(state.public_mean - theta);
    }
    let mut draws = vec![T::zero(); m];
    for k in 1..=config.k_max {
        if checkpoints.peek().is_none() {
            break;
        }
        for d in draws.iter_mut() {
            *d = StandardNormal.sample(&mut rng);
        }
        let idx = k as usize;
        state = step_path(config, &state, &precision[idx - 1], &precision[idx], &draws)?;
        if checkpoints.peek() == Some(&k) {
            checkpoints.next();
            errors.push(state.public_mean - theta);
        }
    }
    Ok(errors)
}

/// Simulates `n_paths` independent realizations and compares the spread of
/// the published mean with `1 / rho_k` at every checkpoint.
///
/// Paths run in parallel; aggregation happens in path order, so results are
/// bit-identical for a given seed regardless of thread count.
pub fn run_paths<T>(config: &McConfig<T>) -> Result<Vec<ConsistencyReport<T>>>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
{
    config.validate()?;
    let last_checkpoint = *config.checkpoint_ks.last().expect("validated non-empty");
    let mut precision = vec![PrecisionState::initial(&config.cascade)];
    if last_checkpoint > 0 {
        precision.extend(run_trajectory(&config.cascade, last_checkpoint, SampleSchedule::All)?);
    }

    let per_path: Vec<Vec<T>> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(config, &precision, p))
        .collect::<Result<_>>()?;

    let n = T::from_usize(config.n_paths).expect("path count representable");
    let (lo, hi) = chi2_ratio_bounds(config.n_paths, CHI2_COVERAGE);
    let asserted = matches!(config.cascade.regime, Regime::Unscaled | Regime::ZeroedPrior);
    let reports = config
        .checkpoint_ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (sum, sum_sq) = per_path
                .iter()
                .fold((T::zero(), T::zero()), |(s, q), e| (s + e[i], q + e[i] * e[i]));
            let empirical_mse = sum_sq / n;
            let predicted_var = precision[k as usize].rho.recip();
            ConsistencyReport {
                k,
                n_paths: config.n_paths,
                empirical_mse,
                mean_error: sum / n,
                predicted_var,
                ratio: empirical_mse / predicted_var,
                chi2_bounds: (T::lit(lo), T::lit(hi)),
                asserted,
            }
        })
        .collect();
    Ok(reports)
}

/// Cross-path mean error at a checkpoint, available once at least two paths
/// were simulated.
pub fn sample_mean_bias<T: Scalar>(report: &ConsistencyReport<T>) -> Result<T> {
    if report.n_paths < 2 {
        return Err(Error::Domain("bias needs at least two paths".into()));
    }
    Ok(report.mean_error)
}

/// Four standard errors of the mean under the predicted variance.
pub fn bias_bound<T: Scalar>(report: &ConsistencyReport<T>) -> T {
    let n = T::from_usize(report.n_paths).expect("path count representable");
    T::lit(4.0) * (report.predicted_var / n).sqrt()
}
