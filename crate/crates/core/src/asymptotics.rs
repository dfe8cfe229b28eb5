//! Generic Riccati-like sequences
//!
//! ```text
//! X_k = X_{k-1} + 1 / (C * y^N + f(y^(N-1))),   y = k^-delta * X_{k-1}
//! ```
//!
//! and their asymptotics. For `delta < 1`, `X_k / k^beta` tends to
//! `[(N + 1) / ((1 + delta N) C)]^(1/(N+1))` with `beta = (1 + delta N)/(N + 1)`.
//! For `delta = 1`, `X_k / k` tends to the root `Y` of
//! `f(Y^(N-1)) = 1/Y - C Y^N`.
//!
//! The hypothesis `m < f(x) <= M x` cannot hold near `x = 0`, so `f` is only
//! checked where the recursion actually evaluates it.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::{geometric_steps, POINTS_PER_DECADE};

/// Caller-supplied lower-order term.
pub type AuxFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Bisection iteration cap for the fixed-point solver.
pub const MAX_BISECTIONS: usize = 200;

/// Default fraction of the logarithmic step range averaged by [`empirical_limit`].
pub const TAIL_FRACTION: f64 = 0.25;

#[derive(Clone)]
pub struct RiccatiSpec<T> {
    pub c: T,
    pub n: u32,
    pub delta: T,
    pub f: AuxFn<T>,
    pub x0: T,
}

impl<T: fmt::Debug> fmt::Debug for RiccatiSpec<T> {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("RiccatiSpec")
            .field("c", &self.c)
            .field("n", &self.n)
            .field("delta", &self.delta)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> RiccatiSpec<T> {
    pub fn new(c: T, n: u32, delta: T, f: AuxFn<T>, x0: T) -> Result<Self> {
        let spec = Self { c, n, delta, f, x0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > T::zero()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if self.n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if !(self.delta >= T::zero() && self.delta <= T::one()) {
            return Err(Error::Config(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if !(self.x0.is_finite() && self.x0 > T::zero()) {
            return Err(Error::Config(format!("X_0 must be positive, got {}", self.x0)));
        }
        Ok(())
    }

    /// `(1 + delta N) / (N + 1)`.
    pub fn beta(&self) -> T {
        let n = T::from_u32(self.n).expect("N representable");
        (T::one() + self.delta * n) / (n + T::one())
    }

    /// Increment denominator at scaled argument `y`.
    fn denominator(&self, k: u64, y: T) -> Result<T> {
        let n = self.n as i32;
        let fx = (self.f)(y.powi(n - 1));
        if !(fx.is_finite() && fx > T::zero()) {
            return Err(Error::Spec {
                k,
                msg: format!("f returned {fx} at argument {}", y.powi(n - 1)),
            });
        }
        Ok(self.c * y.powi(n) + fx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    ClosedFormDeltaLt1,
    FixedPointDelta1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiLimit<T> {
    pub beta: T,
    pub constant: T,
    pub method: LimitMethod,
}

/// `X_k` from `X_{k-1}`, for `k >= 1`.
pub fn riccati_step<T: Scalar>(spec: &RiccatiSpec<T>, k: u64, x_prev: T) -> Result<T> {
    if k == 0 {
        return Err(Error::Domain("step index starts at 1".into()));
    }
    if !(x_prev.is_finite() && x_prev > T::zero()) {
        return Err(Error::Domain(format!("X_(k-1) must be positive, got {x_prev}")));
    }
    let y = crate::cascade::scale_factor(k, spec.delta) * x_prev;
    let x = x_prev + spec.denominator(k, y)?.recip();
    if !x.is_finite() {
        return Err(Error::Spec { k, msg: format!("X_k not finite ({x})") });
    }
    Ok(x)
}

/// Predicted exponent and limiting constant of `X_k / k^beta`.
pub fn predict_limit<T: Scalar>(spec: &RiccatiSpec<T>) -> Result<RiccatiLimit<T>> {
    spec.validate()?;
    let beta = spec.beta();
    if spec.delta < T::one() {
        let n = T::from_u32(spec.n).expect("N representable");
        let one = T::one();
        let constant = ((n + one) / ((one + spec.delta * n) * spec.c)).powf((n + one).recip());
        return Ok(RiccatiLimit { beta, constant, method: LimitMethod::ClosedFormDeltaLt1 });
    }
    // In the limit y = X_k / k, so the lower-order term enters as f(Y^(N-1)).
    let n = spec.n as i32;
    let f = spec.f.clone();
    let constant = solve_balance(spec.c, spec.n, |y: T| f(y.powi(n - 1)))?;
    Ok(RiccatiLimit { beta, constant, method: LimitMethod::FixedPointDelta1 })
}

/// Root `Y > 0` of `f(Y) = 1/Y - C Y^N` for a spec with `delta = 1`.
///
/// `f` is applied to `Y` directly. The limit of the sequence itself, which
/// feeds `Y^(N-1)` to `f`, is what [`predict_limit`] returns.
pub fn fixed_point<T: Scalar>(spec: &RiccatiSpec<T>) -> Result<T> {
    spec.validate()?;
    if spec.delta != T::one() {
        return Err(Error::Config(format!(
            "fixed point requires delta = 1, got {}",
            spec.delta
        )));
    }
    let f = spec.f.clone();
    solve_balance(spec.c, spec.n, |y: T| f(y))
}

/// Bisection for the unique zero of the strictly decreasing
/// `g(Y) = 1/Y - C Y^N - h(Y)`.
fn solve_balance<T, H>(c: T, n: u32, h: H) -> Result<T>
where
    T: Scalar,
    H: Fn(T) -> T,
{
    let n = n as i32;
    let eval = |y: T| -> Result<(T, T)> {
        let hy = h(y);
        if !hy.is_finite() {
            return Err(Error::Spec { k: 0, msg: format!("f returned {hy} at {y}") });
        }
        Ok((y.recip() - c * y.powi(n) - hy, hy))
    };
    let not_monotone = || Error::Spec { k: 0, msg: "f not strictly increasing".into() };
    let two = T::lit(2.0);

    let (mut lo, mut hi) = (T::one(), T::one());
    let (g1, _) = eval(T::one())?;
    if g1 == T::zero() {
        return Ok(T::one());
    }
    let mut g_prev = g1;
    if g1 > T::zero() {
        loop {
            lo = hi;
            hi = hi * two;
            if !hi.is_finite() {
                return Err(not_monotone());
            }
            let (g, _) = eval(hi)?;
            if g >= g_prev {
                return Err(not_monotone());
            }
            if g <= T::zero() {
                break;
            }
            g_prev = g;
        }
    } else {
        loop {
            hi = lo;
            lo = lo / two;
            if lo == T::zero() {
                return Err(not_monotone());
            }
            let (g, _) = eval(lo)?;
            if g <= g_prev {
                return Err(not_monotone());
            }
            if g >= T::zero() {
                break;
            }
            g_prev = g;
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let (g, _) = eval(mid)?;
        if g == T::zero() {
            return Ok(mid);
        }
        if g > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever end balances better
    let (g_lo, _) = eval(lo)?;
    let (g_hi, _) = eval(hi)?;
    Ok(if g_lo.abs() <= g_hi.abs() { lo } else { hi })
}

/// Runs the recursion to `k_max` and averages `X_k / k^beta` over log-spaced
/// steps in the top `tail_fraction` of the logarithmic range `[1, k_max]`.
pub fn empirical_limit<T: Scalar>(spec: &RiccatiSpec<T>, k_max: u64, tail_fraction: T) -> Result<T> {
    spec.validate()?;
    if k_max < 100 {
        return Err(Error::Domain(format!("k_max must be at least 100, got {k_max}")));
    }
    if !(tail_fraction > T::zero() && tail_fraction < T::one()) {
        return Err(Error::Domain(format!(
            "tail fraction must lie in (0, 1), got {tail_fraction}"
        )));
    }
    let beta = spec.beta();
    let k_tail = (T::from_index(k_max).ln() * (T::one() - tail_fraction))
        .exp()
        .ceil()
        .to_u64()
        .unwrap_or(1);
    let ks = geometric_steps(k_tail, k_max, POINTS_PER_DECADE);
    let mut next = ks.iter().copied().peekable();
    let (mut sum, mut count) = (T::zero(), 0usize);
    let mut x = spec.x0;
    for k in 1..=k_max {
        x = riccati_step(spec, k, x)?;
        if next.peek() == Some(&k) {
            next.next();
            sum = sum + x / T::from_index(k).powf(beta);
            count += 1;
        }
    }
    Ok(sum / T::from_usize(count).expect("count representable"))
}

/// Last value `X_{k_max}` of the recursion.
pub fn run<T: Scalar>(spec: &RiccatiSpec<T>, k_max: u64) -> Result<T> {
    spec.validate()?;
    (1..=k_max).try_fold(spec.x0, |x, k| riccati_step(spec, k, x))
}
