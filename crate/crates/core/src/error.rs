use std::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("no grid cell lies beyond the plane x1 = {lambda}")]
    EmptyCap { lambda: f64 },
    #[error("region is empty")]
    EmptyRegion,
    #[error("operator size {n} exceeds the configured cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,
    #[error("point lies on the boundary of the half-space")]
    OnBoundary,
    #[error("measure must be positive, got {0}")]
    NonpositiveMeasure(f64),
    #[error("rate and bound must be positive, got gamma = {gamma}, c_inf = {c_inf}")]
    NonpositiveRate { gamma: f64, c_inf: f64 },
    #[error("extension height must be positive, got {0}")]
    NonpositiveHeight(f64),
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("barrier profile has not been tabulated")]
    ProfileUnavailable,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("state left the admissible range at t = {t}: value {value} outside [{lo}, {hi}]")]
    RangeExit { t: f64, value: f64, lo: f64, hi: f64 },
    #[error("Picard iteration stopped contracting at sweep {sweep} (increment {increment:e})")]
    PicardDivergence { sweep: usize, increment: f64 },
    #[error("trajectory too short: {0}")]
    TooShort(String),
    #[error("cannot build an overlapping ball net: {0}")]
    NetFailure(String),
    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidInput(msg.to_string())
    }
}
