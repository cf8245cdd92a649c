//! Random linear delay differential equations
//! `z'(t) = A(θ_t ω) z(t) + B(θ_t ω) z(t - 1)` viewed as skew-product
//! semiflows on two fibers: continuous segments `C([-1,0], R^N)` and
//! `L = R^N × L_p([-1,0], R^N)`.
//!
//! The crate realizes seeded base flows ([`driver`]), discretizes both
//! fibers ([`fiber`]), propagates segments by the method of steps
//! ([`propagator`]), and estimates Lyapunov exponents together with
//! Oseledets filtrations and covariant subspaces ([`spectrum`]). The
//! [`harness`] module wires everything into file-configured experiments.

pub mod driver;
pub mod error;
pub mod fiber;
pub mod harness;
pub mod linalg;
pub mod propagator;
pub mod spectrum;

pub use driver::{CoefficientSample, Driver, DriverKind, DriverSpec, SummabilityReport};
pub use error::{Error, Result};
pub use fiber::{FiberKind, GridSpec, SegmentC, SegmentL, SubspaceFrame};
pub use propagator::{FundamentalMatrix, StepBounds, UnitStepOperator};
pub use spectrum::{ComparisonReport, SpectrumConfig, SpectrumReport};

/// Per-unit-step log rate at or below which a growth rate is treated as `-∞`.
pub const LN_RATE_FLOOR: f64 = -20.0;
