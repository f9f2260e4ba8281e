//! Nonparametric identification and estimation for finite mixture regressions.
//!
//! The crate has two halves that share a common model layer:
//!
//! * a *population oracle* ([`model`], [`identification`]) that evaluates exact
//!   conditional transforms (MGF, CF, CDF, moments) of analytically specified
//!   mixtures and runs the constructive identification procedures on them —
//!   slope limits, weight and level recovery, component-MGF solves, the
//!   fixed-effects variant with covariate-dependent weights, and the general-J
//!   machinery built on nested differentiation;
//! * a *sample pipeline* ([`dgp`], [`smoothing`], [`estimators`], [`harness`])
//!   that simulates switching-regression data and estimates the two-component
//!   mixture fully nonparametrically with Nadaraya-Watson transforms, including
//!   the truncated-series estimator of the component CDFs and a Monte Carlo
//!   harness for consistency checks.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `npmix` binary for file-driven batch use.

pub mod dgp;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod identification;
pub mod model;
pub mod numeric;
pub mod smoothing;

pub use error::{Error, Result};
