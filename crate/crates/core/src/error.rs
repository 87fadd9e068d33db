use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("direction ({r}, {q}) is not in lowest terms")]
    NonCoprime { r: i64, q: i64 },
    #[error("direction ({r}, {q}) must satisfy 0 <= r <= q, q >= 1")]
    InvalidDirection { r: i64, q: i64 },
    #[error("irrational orientation beta = {0} must lie in [0, 1]")]
    BetaOutOfRange(f64),
    #[error("Peierls phase alpha = {0} violates |alpha| <= 1/2")]
    AlphaOutOfRange(f64),
    #[error("electric field amplitude F = {0} is negative")]
    NegativeField(f64),
    #[error("hopping amplitude {name} = {value} is negative")]
    NegativeHopping { name: &'static str, value: f64 },
    #[error("{0} is undefined for alpha = 0")]
    DivisionByZero(&'static str),
    #[error("extended index ({s}, {p}) is not on the original sublattice")]
    NotOnSublattice { s: i64, p: i64 },
    #[error("gauge conversion {from} -> {to} is not supported for this configuration")]
    UnsupportedGaugePair { from: &'static str, to: &'static str },
    #[error("operation requires a rational field direction")]
    IrrationalDirection,
    #[error("operation requires direction {expected}, got ({r}, {q})")]
    WrongDirection { expected: &'static str, r: i64, q: i64 },
    #[error("fiber window of {size} sites is smaller than the required {required}")]
    WindowTooSmall { size: usize, required: usize },
    #[error("rotated-basis period K = {0} must be even and positive")]
    OddK(usize),
    #[error("eigensolver did not converge")]
    ConvergenceFailure,
    #[error("quasimomentum grids do not match: {0}")]
    GridMismatch(String),
    #[error("line lost at kappa = {kappa}: best overlap {overlap:.3}")]
    LineLost { kappa: f64, overlap: f64 },
    #[error("spectrum carries no eigenvectors")]
    MissingEigenvectors,
    #[error("envelope width C = {0} must be positive")]
    NonpositiveC(f64),
    #[error("norm drifted by {drift:.3e} at t = {time} (tolerance {tolerance:.1e}); reduce dt")]
    NormDrift {
        drift: f64,
        time: f64,
        tolerance: f64,
    },
    #[error("spectral bounds too tight: expansion did not converge after {terms} terms")]
    BoundsTooTight { terms: usize },
    #[error("fit window holds {samples} samples, need at least {required}")]
    WindowTooShort { samples: usize, required: usize },
    #[error("power-law fit requires strictly positive data")]
    NonpositiveData,
    #[error("regime classification is ambiguous (scores transporting/ballistic/localized/oscillating = {scores:?})")]
    Ambiguous { scores: [f64; 4] },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
