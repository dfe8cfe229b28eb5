//! Deterministic precision recursion for a chain of `m` Kalman filter agents.
//!
//! Agent 1 sees the raw signal, agents `2..=m` see a noisy copy of the previous
//! agent's posterior mean, and agent `m` publishes the prior that every agent
//! starts from at the next step. Because the gains never depend on data, the
//! whole precision side of the system is a scalar recursion in the public
//! precision `rho`.
//!
//! The regimes differ only in which prior precision the transmitting agents
//! (`1..m`) and the publishing agent (`m`) plug into their updates:
//!
//! | regime        | agents `1..m-1`       | agent `m`            |
//! |---------------|-----------------------|----------------------|
//! | `Unscaled`    | `rho`                 | `rho`                |
//! | `Scaled`      | `k^-delta * rho`      | `rho`                |
//! | `ZeroedPrior` | `0`                   | `rho`                |
//! | `ScaledLast`  | `k^-delta * rho`      | `k^-delta * rho`     |

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, RiccatiSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::SampleSchedule;

/// Largest supported chain length.
pub const MAX_AGENTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Unscaled,
    Scaled,
    ZeroedPrior,
    ScaledLast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig<T> {
    /// Number of agents.
    pub m: usize,
    /// Variance of the raw observation noise.
    pub lambda_e: T,
    /// Transmission noise variances, one per transmitting agent (`m - 1`).
    pub lambda_w: Vec<T>,
    /// Initial public precision (inverse prior variance).
    pub rho0: T,
    /// Prior scaling exponent; zero when unscaled.
    pub delta: T,
    pub regime: Regime,
}

impl<T: Scalar> CascadeConfig<T> {
    pub fn unscaled(lambda_e: T, lambda_w: Vec<T>, rho0: T) -> Self {
        Self {
            m: lambda_w.len() + 1,
            lambda_e,
            lambda_w,
            rho0,
            delta: T::zero(),
            regime: Regime::Unscaled,
        }
    }

    pub fn scaled(lambda_e: T, lambda_w: Vec<T>, rho0: T, delta: T) -> Self {
        Self {
            delta,
            regime: Regime::Scaled,
            ..Self::unscaled(lambda_e, lambda_w, rho0)
        }
    }

    pub fn zeroed(lambda_e: T, lambda_w: Vec<T>, rho0: T) -> Self {
        Self {
            regime: Regime::ZeroedPrior,
            ..Self::unscaled(lambda_e, lambda_w, rho0)
        }
    }

    pub fn scaled_last(lambda_e: T, lambda_w: Vec<T>, rho0: T, delta: T) -> Self {
        Self {
            delta,
            regime: Regime::ScaledLast,
            ..Self::unscaled(lambda_e, lambda_w, rho0)
        }
    }

    /// Unit variances everywhere, `rho0 = 1`.
    pub fn unit(m: usize, regime: Regime, delta: T) -> Self {
        Self {
            m,
            lambda_e: T::one(),
            lambda_w: vec![T::one(); m.saturating_sub(1)],
            rho0: T::one(),
            delta,
            regime,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 || self.m > MAX_AGENTS {
            return bad(format!("m must lie in 1..={MAX_AGENTS}, got {}", self.m));
        }
        if self.lambda_w.len() != self.m - 1 {
            return bad(format!(
                "expected {} transmission variances for m={}, got {}",
                self.m - 1,
                self.m,
                self.lambda_w.len()
            ));
        }
        if !(self.lambda_e.is_finite() && self.lambda_e > T::zero()) {
            return bad(format!("lambda_e must be positive and finite, got {}", self.lambda_e));
        }
        if let Some(w) = self
            .lambda_w
            .iter()
            .find(|w| !(w.is_finite() && **w >= T::zero()))
        {
            return bad(format!("lambda_w entries must be finite and non-negative, got {w}"));
        }
        if !(self.rho0.is_finite() && self.rho0 > T::zero()) {
            return bad(format!("rho0 must be positive and finite, got {}", self.rho0));
        }
        if !(self.delta.is_finite() && self.delta >= T::zero()) {
            return bad(format!("delta must be finite and non-negative, got {}", self.delta));
        }
        if self.regime == Regime::Unscaled && self.delta != T::zero() {
            return bad(format!("unscaled regime requires delta = 0, got {}", self.delta));
        }
        Ok(())
    }

    /// `lambda_e + sum(lambda_w)`: the equivalent noise variance when the
    /// transmitting agents ignore the prior.
    pub fn total_noise(&self) -> T {
        self.lambda_w.iter().fold(self.lambda_e, |acc, &w| acc + w)
    }

    /// Degree `2^m - 2` of the increment denominator as a polynomial in `rho`.
    pub fn denom_degree(&self) -> u32 {
        (1u32 << self.m) - 2
    }
}

/// Deterministic state after step `k`.
///
/// At `k = 0` nothing has been transmitted yet; `gamma`, `alpha` and `denom`
/// then hold the values a flat prior would produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionState<T> {
    pub k: u64,
    /// Public precision after step `k`.
    pub rho: T,
    /// Equivalent noise variance added by each transmitting agent.
    pub gamma: Vec<T>,
    /// Gain of each agent, `1..=m`.
    pub alpha: Vec<T>,
    /// Equivalent noise variance seen by the last agent, `lambda_e + sum(gamma)`.
    pub denom: T,
    /// Rounding error of `rho`, carried so long runs accumulate it
    /// compensated.
    #[serde(default)]
    pub rho_carry: T,
}

impl<T: Scalar> PrecisionState<T> {
    pub fn initial(config: &CascadeConfig<T>) -> Self {
        Self {
            k: 0,
            rho: config.rho0,
            gamma: config.lambda_w.clone(),
            alpha: vec![T::one(); config.m],
            denom: config.total_noise(),
            rho_carry: T::zero(),
        }
    }
}

/// Runs the gamma chain for the given prior precisions, writing gains and
/// noise contributions into the provided buffers. Returns the final
/// denominator, or the 1-based index of the first agent whose value is not
/// finite.
fn chain<T: Scalar>(
    config: &CascadeConfig<T>,
    sub_prior: T,
    last_prior: T,
    gamma: &mut [T],
    alpha: &mut [T],
) -> std::result::Result<T, usize> {
    let one = T::one();
    let mut acc = config.lambda_e;
    for (j, (&w, g)) in config.lambda_w.iter().zip(gamma.iter_mut()).enumerate() {
        let lift = one + sub_prior * acc;
        alpha[j] = lift.recip();
        *g = w * lift * lift;
        acc = acc + *g;
        if !acc.is_finite() {
            return Err(j + 1);
        }
    }
    alpha[config.m - 1] = (one + last_prior * acc).recip();
    Ok(acc)
}

/// `k^-delta`, with `k >= 1`.
pub fn scale_factor<T: Scalar>(k: u64, delta: T) -> T {
    if delta == T::zero() {
        return T::one();
    }
    (-delta * T::from_index(k).ln()).exp()
}

/// Allocation-free single step shared by the public stepping functions.
fn advance<T: Scalar>(
    config: &CascadeConfig<T>,
    k: u64,
    rho_prev: T,
    carry_prev: T,
    gamma: &mut [T],
    alpha: &mut [T],
) -> Result<(T, T, T)> {
    let (sub_prior, last_prior, carry) = match config.regime {
        Regime::Unscaled => (rho_prev, rho_prev, carry_prev),
        Regime::Scaled => (scale_factor(k, config.delta) * rho_prev, rho_prev, carry_prev),
        Regime::ZeroedPrior => (T::zero(), rho_prev, carry_prev),
        Regime::ScaledLast => {
            let s = scale_factor(k, config.delta);
            let p = s * rho_prev;
            (p, p, s * carry_prev)
        }
    };
    let denom = chain(config, sub_prior, last_prior, gamma, alpha)
        .map_err(|agent| Error::Overflow { k, agent })?;
    let (rho, carry) = two_sum(last_prior, denom.recip() + carry);
    if !rho.is_finite() {
        return Err(Error::Overflow { k, agent: config.m });
    }
    Ok((rho, carry, denom))
}

/// `a + b` rounded, and the exact rounding error.
fn two_sum<T: Scalar>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn step_in<T: Scalar>(
    config: &CascadeConfig<T>,
    state: &PrecisionState<T>,
    expected: &[Regime],
) -> Result<PrecisionState<T>> {
    config.validate()?;
    if !expected.contains(&config.regime) {
        return Err(Error::Config(format!(
            "stepping function for {expected:?} called with regime {:?}",
            config.regime
        )));
    }
    let k = state.k + 1;
    let mut gamma = vec![T::zero(); config.m - 1];
    let mut alpha = vec![T::zero(); config.m];
    let (rho, rho_carry, denom) = advance(config, k, state.rho, state.rho_carry, &mut gamma, &mut alpha)?;
    Ok(PrecisionState { k, rho, gamma, alpha, denom, rho_carry })
}

/// One step of the unscaled recursion.
pub fn step_precision<T: Scalar>(config: &CascadeConfig<T>, state: &PrecisionState<T>) -> Result<PrecisionState<T>> {
    step_in(config, state, &[Regime::Unscaled])
}

/// One step where agents `1..m` use the prior precision scaled by `k^-delta`.
pub fn step_precision_scaled<T: Scalar>(
    config: &CascadeConfig<T>,
    state: &PrecisionState<T>,
) -> Result<PrecisionState<T>> {
    step_in(config, state, &[Regime::Scaled])
}

/// One step where agents `1..m` ignore the public precision entirely.
pub fn step_precision_zeroed<T: Scalar>(
    config: &CascadeConfig<T>,
    state: &PrecisionState<T>,
) -> Result<PrecisionState<T>> {
    step_in(config, state, &[Regime::ZeroedPrior])
}

/// One step where every agent, including the publisher, scales the prior.
pub fn step_precision_scaled_last<T: Scalar>(
    config: &CascadeConfig<T>,
    state: &PrecisionState<T>,
) -> Result<PrecisionState<T>> {
    step_in(config, state, &[Regime::ScaledLast])
}

/// One step of whichever regime the config selects.
pub fn step<T: Scalar>(config: &CascadeConfig<T>, state: &PrecisionState<T>) -> Result<PrecisionState<T>> {
    step_in(
        config,
        state,
        &[Regime::Unscaled, Regime::Scaled, Regime::ZeroedPrior, Regime::ScaledLast],
    )
}

/// Iterates the configured regime from `rho0` and calls `visit` with every
/// state `k = 1..=k_max`. The state is reused between calls.
pub fn for_each_step<T, F>(config: &CascadeConfig<T>, k_max: u64, mut visit: F) -> Result<()>
where
    T: Scalar,
    F: FnMut(&PrecisionState<T>),
{
    config.validate()?;
    let mut state = PrecisionState::initial(config);
    for k in 1..=k_max {
        let (rho, carry, denom) = advance(config, k, state.rho, state.rho_carry, &mut state.gamma, &mut state.alpha)?;
        state.k = k;
        state.rho = rho;
        state.rho_carry = carry;
        state.denom = denom;
        visit(&state);
    }
    Ok(())
}

/// Runs the recursion to `k_max` and records the states picked by `schedule`.
pub fn run_trajectory<T: Scalar>(
    config: &CascadeConfig<T>,
    k_max: u64,
    schedule: SampleSchedule,
) -> Result<Vec<PrecisionState<T>>> {
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    let ks = schedule.steps(k_max);
    let mut out = Vec::with_capacity(ks.len());
    let mut next = ks.iter().copied().peekable();
    for_each_step(config, k_max, |s| {
        if next.peek() == Some(&s.k) {
            next.next();
            out.push(s.clone());
        }
    })?;
    Ok(out)
}

/// `(k, rho_k)` pairs of a trajectory, the input format of the rate fitter.
pub fn rho_samples<T: Scalar>(states: &[PrecisionState<T>]) -> Vec<(u64, T)> {
    states.iter().map(|s| (s.k, s.rho)).collect()
}

/// Increment denominator of the unscaled recursion evaluated at public
/// precision `rho`, computed through the gamma chain.
pub fn denominator<T: Scalar>(config: &CascadeConfig<T>, rho: T) -> Result<T> {
    config.validate()?;
    let mut gamma = vec![T::zero(); config.m - 1];
    let mut alpha = vec![T::zero(); config.m];
    chain(config, rho, rho, &mut gamma, &mut alpha).map_err(|agent| Error::Overflow { k: 0, agent })
}

/// Leading coefficient of the increment denominator as a polynomial in the
/// public precision: `lambda_e^(2^(m-1)) * prod_i lambda_w[i]^(2^(m-1-i))`.
pub fn leading_coefficient<T: Scalar>(config: &CascadeConfig<T>) -> Result<T> {
    config.validate()?;
    if config.m < 2 {
        return Err(Error::Domain("leading coefficient needs at least two agents".into()));
    }
    if config.lambda_w.iter().any(|w| *w == T::zero()) {
        return Err(Error::Domain(
            "leading coefficient undefined when a transmission variance is zero".into(),
        ));
    }
    let m = config.m as i32;
    let pow2 = |e: i32| T::lit(2f64.powi(e));
    let log = config
        .lambda_w
        .iter()
        .enumerate()
        .fold(pow2(m - 1) * config.lambda_e.ln(), |acc, (i, &w)| {
            acc + pow2(m - 2 - i as i32) * w.ln()
        });
    Ok(log.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// No transmission noise: the classical `rho0 + k / lambda_e`.
    Classical,
    /// Unscaled chain, exponent `1 / (2^m - 1)`.
    Thm1,
    /// Scaled chain with `delta < 1`.
    Thm2DeltaLt1,
    /// Scaled chain with `delta = 1`; constant from the fixed point.
    Thm2Delta1FixedPoint,
    /// Scaled chain with `delta > 1`: saturates at linear growth.
    RemarkDeltaGt1,
    /// Transmitting agents ignore the prior.
    RemarkZeroed,
}

/// Predicted growth `rho_k ~ constant * k^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction<T> {
    pub beta: T,
    pub constant: T,
    pub source: RateSource,
}

/// Theoretical growth exponent and constant for the configured regime.
pub fn predict_rate<T: Scalar>(config: &CascadeConfig<T>) -> Result<RatePrediction<T>> {
    config.validate()?;
    if config.regime == Regime::ScaledLast {
        return Err(Error::NoGrowth);
    }
    let one = T::one();
    let linear = |source| RatePrediction {
        beta: one,
        constant: config.total_noise().recip(),
        source,
    };
    if config.m == 1 || config.lambda_w.iter().all(|w| *w == T::zero()) {
        return Ok(linear(RateSource::Classical));
    }
    match config.regime {
        Regime::ZeroedPrior => Ok(linear(RateSource::RemarkZeroed)),
        Regime::Scaled if config.delta > one => Ok(linear(RateSource::RemarkDeltaGt1)),
        Regime::Scaled if config.delta == one => {
            let spec = riccati_spec(config)?;
            let constant = asymptotics::predict_limit(&spec)?.constant;
            Ok(RatePrediction {
                beta: one,
                constant,
                source: RateSource::Thm2Delta1FixedPoint,
            })
        }
        Regime::Unscaled | Regime::Scaled => {
            let a = leading_coefficient(config)?;
            let order = T::lit(((1u64 << config.m) - 1) as f64);
            let n = T::from_u32(config.denom_degree()).expect("degree representable");
            let lift = one + config.delta * n;
            let source = if config.regime == Regime::Unscaled {
                RateSource::Thm1
            } else {
                RateSource::Thm2DeltaLt1
            };
            Ok(RatePrediction {
                beta: lift / order,
                constant: (order / (lift * a)).powf(order.recip()),
                source,
            })
        }
        Regime::ScaledLast => unreachable!(),
    }
}

/// The chain's recursion written as a generic Riccati-like sequence:
/// `C = leading_coefficient`, `N = 2^m - 2`, and `f` the lower-order part of
/// the denominator expressed as a function of `y^(N-1)`.
///
/// `delta` is clamped to `[0, 1]`.
pub fn riccati_spec<T: Scalar>(config: &CascadeConfig<T>) -> Result<RiccatiSpec<T>> {
    let c = leading_coefficient(config)?;
    let n = config.denom_degree();
    let mut unscaled = config.clone();
    unscaled.regime = Regime::Unscaled;
    unscaled.delta = T::zero();
    let n_t = T::from_u32(n).expect("degree representable");
    let root = (n_t - T::one()).recip();
    let f = move |x: T| {
        let y = x.powf(root);
        match denominator(&unscaled, y) {
            Ok(d) => d - c * y.powi(n as i32),
            Err(_) => T::nan(),
        }
    };
    let delta = config.delta.max(T::zero()).min(T::one());
    RiccatiSpec::new(c, n, delta, Arc::new(f), config.rho0)
}
