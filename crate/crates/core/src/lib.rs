//! Word-of-mouth social learning with chains of scalar Kalman filter agents.
//!
//! * [`gaussian`]: precision-form conjugate update.
//! * [`cascade`]: deterministic precision recursion in every regime and the
//!   predicted growth rates.
//! * [`montecarlo`]: full stochastic simulation checking that the recursion is
//!   the Bayes posterior precision.
//! * [`asymptotics`]: generic Riccati-like sequences, their limits and the
//!   fixed-point solver.
//! * [`rate_fit`]: log-log fits of growth exponents and constants.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod asymptotics;
pub mod cascade;
pub mod error;
pub mod gaussian;
pub mod montecarlo;
pub mod rate_fit;
pub mod scalar;
pub mod schedule;

pub use asymptotics::{LimitMethod, RiccatiLimit, RiccatiSpec};
pub use cascade::{CascadeConfig, PrecisionState, RatePrediction, RateSource, Regime};
pub use error::{Error, Result};
pub use gaussian::Belief;
pub use montecarlo::{ConsistencyReport, McConfig, PathState};
pub use rate_fit::RateFit;
pub use scalar::Scalar;
pub use schedule::SampleSchedule;

pub type Belief64 = Belief<f64>;
pub type CascadeConfig64 = CascadeConfig<f64>;
pub type PrecisionState64 = PrecisionState<f64>;
pub type RatePrediction64 = RatePrediction<f64>;
pub type RateFit64 = RateFit<f64>;
pub type RiccatiSpec64 = RiccatiSpec<f64>;
pub type RiccatiLimit64 = RiccatiLimit<f64>;
pub type McConfig64 = McConfig<f64>;
pub type PathState64 = PathState<f64>;
pub type ConsistencyReport64 = ConsistencyReport<f64>;

pub type Belief32 = Belief<f32>;
pub type CascadeConfig32 = CascadeConfig<f32>;
pub type PrecisionState32 = PrecisionState<f32>;
