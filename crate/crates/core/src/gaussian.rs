//! Scalar Gaussian beliefs in precision form and the conjugate update used by
//! every agent in the chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A Gaussian belief about the scalar state, stored as mean and precision.
///
/// Precision zero is an improper flat prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief<T> {
    pub mean: T,
    pub precision: T,
}

impl<T: Scalar> Belief<T> {
    pub fn new(mean: T, precision: T) -> Result<Self> {
        if !mean.is_finite() || !precision.is_finite() {
            return Err(Error::Domain(format!(
                "belief must be finite, got mean={mean}, precision={precision}"
            )));
        }
        if precision < T::zero() {
            return Err(Error::Domain(format!(
                "precision must be non-negative, got {precision}"
            )));
        }
        Ok(Self { mean, precision })
    }

    /// Belief from a mean and a (positive, possibly infinite) variance.
    pub fn from_variance(mean: T, variance: T) -> Result<Self> {
        if variance.is_nan() || variance <= T::zero() {
            return Err(Error::Domain(format!(
                "variance must be positive, got {variance}"
            )));
        }
        Self::new(mean, variance.recip())
    }

    /// Inverse precision; infinite for a flat prior.
    pub fn variance(&self) -> T {
        self.precision.recip()
    }
}

/// Weight placed on a new observation: `obs_precision / (prior_precision + obs_precision)`.
pub fn kalman_gain<T: Scalar>(prior_precision: T, obs_precision: T) -> Result<T> {
    check_precisions(prior_precision, obs_precision)?;
    Ok(obs_precision / (prior_precision + obs_precision))
}

/// Posterior belief after observing `observation = theta + noise` with noise
/// of precision `obs_precision`.
pub fn bayes_update<T: Scalar>(prior: Belief<T>, observation: T, obs_precision: T) -> Result<Belief<T>> {
    check_precisions(prior.precision, obs_precision)?;
    if !prior.mean.is_finite() || !observation.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite mean or observation: prior mean={}, observation={observation}",
            prior.mean
        )));
    }
    let precision = prior.precision + obs_precision;
    let alpha = obs_precision / precision;
    let mean = (T::one() - alpha) * prior.mean + alpha * observation;
    Ok(Belief { mean, precision })
}

fn check_precisions<T: Scalar>(prior_precision: T, obs_precision: T) -> Result<()> {
    if !prior_precision.is_finite() || !obs_precision.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite precision: prior={prior_precision}, observation={obs_precision}"
        )));
    }
    if prior_precision < T::zero() {
        return Err(Error::Domain(format!(
            "prior precision must be non-negative, got {prior_precision}"
        )));
    }
    if obs_precision <= T::zero() {
        return Err(Error::Domain(format!(
            "observation precision must be positive, got {obs_precision}"
        )));
    }
    Ok(())
}
