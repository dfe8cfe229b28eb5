//! Power-law fits `value ~ C k^beta` to trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit<T> {
    pub beta_hat: T,
    pub constant_hat: T,
    pub r_squared: T,
    /// Inclusive step range the fit used.
    pub window: (u64, u64),
    pub points: usize,
}

/// Top two decades of the sampled range: `[k_max / 100, k_max]`.
pub fn default_window<T>(samples: &[(u64, T)]) -> (u64, u64) {
    let k_max = samples.iter().map(|s| s.0).max().unwrap_or(1);
    ((k_max / 100).max(1), k_max)
}

/// Least squares line through `(ln k, ln value)` for samples with `k` inside
/// the inclusive `window`.
pub fn fit_power_law<T: Scalar>(samples: &[(u64, T)], window: (u64, u64)) -> Result<RateFit<T>> {
    let pts: Vec<(T, T)> = samples
        .iter()
        .filter(|(k, _)| *k >= window.0 && *k <= window.1)
        .map(|&(k, v)| {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Fit(format!("value at k={k} must be positive, got {v}")));
            }
            if k == 0 {
                return Err(Error::Fit("k = 0 has no logarithm".into()));
            }
            Ok((T::from_index(k).ln(), v.ln()))
        })
        .collect::<Result<_>>()?;
    if pts.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 samples in window {window:?}, got {}",
            pts.len()
        )));
    }
    let n = T::from_usize(pts.len()).expect("count representable");
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in &pts {
        let (dx, dy) = (x - mx, y - my);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::Fit("all samples share the same k".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = pts.iter().fold(T::zero(), |acc, &(x, y)| {
        let r = y - (intercept + slope * x);
        acc + r * r
    });
    // a flat series leaves only rounding noise in syy
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let r_squared = if flat {
        T::one()
    } else {
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    };
    Ok(RateFit {
        beta_hat: slope,
        constant_hat: intercept.exp(),
        r_squared,
        window,
        points: pts.len(),
    })
}

/// Mean of `value / k^beta` over samples in the top `tail_fraction` of the
/// logarithmic range `[1, k_max]`. Samples are expected to be log-spaced.
pub fn ratio_limit<T: Scalar>(samples: &[(u64, T)], beta: T, tail_fraction: T) -> Result<T> {
    if !(tail_fraction > T::zero() && tail_fraction <= T::one()) {
        return Err(Error::Fit(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let k_max = samples
        .iter()
        .map(|s| s.0)
        .max()
        .ok_or_else(|| Error::Fit("no samples".into()))?;
    let log_cut = T::from_index(k_max).ln() * (T::one() - tail_fraction);
    let mut sum = T::zero();
    let mut count = 0usize;
    for &(k, v) in samples {
        if k == 0 || T::from_index(k).ln() < log_cut {
            continue;
        }
        if !(v > T::zero() && v.is_finite()) {
            return Err(Error::Fit(format!("value at k={k} must be positive, got {v}")));
        }
        sum = sum + v / T::from_index(k).powf(beta);
        count += 1;
    }
    if count == 0 {
        return Err(Error::Fit("no samples in tail".into()));
    }
    Ok(sum / T::from_usize(count).expect("count representable"))
}
