//! Error taxonomy shared across the crate.
//!
//! Variants are grouped so the CLI can map them onto exit codes:
//! configuration problems (exit 2), numeric degeneracies (exit 3) and
//! I/O failures (exit 4).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A transform was requested outside its declared domain, e.g. an MGF
    /// argument outside the interval a component distribution supports.
    #[error("domain error: {0}")]
    Domain(String),

    /// A characteristic-function denominator fell below the modulus floor.
    #[error("degenerate denominator: |value| = {modulus:e} below floor {floor:e}")]
    DegenerateDenominator { modulus: f64, floor: f64 },

    /// A kernel window contains no effective neighbours.
    #[error("empty kernel window at x = {at:?} (denominator mass {mass:e})")]
    EmptyWindow { at: Vec<f64>, mass: f64 },

    /// An exponential intermediate would exceed the overflow budget.
    #[error("overflow budget exceeded: |t|*max|z| = {0:.3e} > 700")]
    OverflowBudget(f64),

    /// The slope separation |Δ - ∇| fell below the floor; the two-component
    /// system is not invertible.
    #[error("parallel slopes: |delta - nabla| = {separation:e} below floor {floor:e}")]
    ParallelSlopes { separation: f64, floor: f64 },

    /// The principal-value complex logarithm is too close to the branch cut
    /// for the slope read-off to be trusted.
    #[error("principal-branch ambiguity: |a*nabla| = {0:.4} too close to pi")]
    BranchAmbiguity(f64),

    /// The CDF series would evaluate the conditional CDF too far outside the
    /// observed data range.
    #[error("series budget exceeded: arguments reach {reach:.3} beyond data range {lo:.3}..{hi:.3}")]
    SeriesBudget { reach: f64, lo: f64, hi: f64 },

    /// A linear system determinant fell below the relative floor.
    #[error("singular system `{system}`: relative determinant {det:e}")]
    SingularSystem { system: &'static str, det: f64 },

    /// Nested finite differencing lost all significant digits.
    #[error("ill-conditioned differentiation: {0}")]
    IllConditioned(String),

    /// Invalid configuration (bad field value, schema mismatch, ...).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code class for the CLI: 2 config, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Csv(_) => 4,
            _ => 3,
        }
    }
}
