//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor received an out-of-range or non-finite parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input vector had the wrong length for the spec it was paired with.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A forecast point lies outside the declared action domain.
    #[error("point {point:?} lies outside the action domain {domain}")]
    DomainViolation { point: Vec<f64>, domain: String },

    /// An operation needs a moment the distribution does not have.
    #[error("{family} has no finite absolute moment of order {order}")]
    MomentNotFinite { family: String, order: f64 },

    /// An expectation does not exist; the tail estimate exceeds tolerance.
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    /// A strictness claim requires a unique quantile and the distribution
    /// has a flat cdf stretch at the requested level.
    #[error("{family} has a non-unique quantile at level {level}")]
    NonUniqueQuantile { family: String, level: f64 },

    /// A shape function fails a monotonicity/convexity/positivity flag
    /// required by the consuming score family.
    #[error("shape `{shape}` is not {requirement}, required by {family}")]
    ShapeRequirement {
        family: String,
        shape: String,
        requirement: String,
    },

    /// Grid minimization ended on the outer search-box boundary, which
    /// signals the box missed the true minimizer.
    #[error("grid argmin {point:?} lies on the search-box boundary; enlarge the box")]
    BoundaryArgmin { point: Vec<f64> },

    /// The distribution panel does not span the identification space.
    #[error("distribution panel is rank deficient (smallest singular value {smallest_singular:.3e})")]
    RankDeficientPanel { smallest_singular: f64 },

    /// A spec literal failed to parse.
    #[error("parse error at byte {at} of `{input}`: {msg}")]
    Parse {
        input: String,
        at: usize,
        msg: String,
    },

    /// Forecast CSV problems (header shape, non-numeric cells).
    #[error("forecast table: {0}")]
    ForecastTable(String),

    /// The forecast file contained a header but no usable rows.
    #[error("no data rows")]
    NoDataRows,

    /// A documented operation precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
