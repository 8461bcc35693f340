use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: expected 1, 2 or 3")]
    InvalidDimension(usize),

    #[error("invalid size {0}: points per axis must be a power of two and at least 8")]
    InvalidSize(usize),

    #[error("non-positive length {0}")]
    NonPositiveLength(f64),

    #[error("invalid Sobolev exponent {0}: must lie in [-4, 4]")]
    InvalidSobolevIndex(f64),

    #[error("Fourier symbol is not finite at wavevector {0:?}")]
    NonFiniteSymbol(Vec<f64>),

    #[error("field has non-finite samples")]
    NonFiniteField,

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("support violation on axis {axis}: tail mass fraction {fraction:e} exceeds {threshold:e}")]
    SupportViolation { axis: usize, fraction: f64, threshold: f64 },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("trajectory is misaligned with the time grid: {0}")]
    MisalignedTrajectory(String),

    #[error("blowup detected at step {step}: max |u| = {magnitude:e}")]
    BlowupDetected { step: usize, magnitude: f64 },

    #[error("no convergence after {iterations} iterations (last ratio {last_ratio:e}){}", largest_working_delta.map(|d| format!("; largest working delta observed: {d:e}")).unwrap_or_default())]
    NoConvergence {
        iterations: usize,
        last_ratio: f64,
        largest_working_delta: Option<f64>,
    },

    #[error("fixed point fails u(0) = u0: relative residual {residual:e}")]
    FixedPointInconsistent { residual: f64 },

    #[error("invalid exponent {0}: mixed norms need exponents in [1, inf]")]
    InvalidExponent(f64),

    #[error("geometry overflow: {0}")]
    GeometryOverflow(String),

    #[error("conjugate gradient stagnated after {iterations} iterations (relative residual {residual:e}, smallest Ritz value {smallest_ritz:e})")]
    CgStagnation {
        iterations: usize,
        residual: f64,
        smallest_ritz: f64,
    },

    #[error("Lanczos iteration did not converge after {0} steps")]
    LanczosNonConvergence(usize),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("input violates precondition: {0}")]
    InvalidInput(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config validation error: {0}")]
    ConfigValidation(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    ///
    /// 0 pass, 2 config error, 3 solver non-convergence, 4 blowup, 5 io.
    /// Everything else is treated as a configuration problem since it stems
    /// from inputs the user controls.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::CgStagnation { .. }
            | Error::LanczosNonConvergence(_)
            | Error::FixedPointInconsistent { .. } => 3,
            Error::BlowupDetected { .. } => 4,
            Error::Io(_) | Error::Json(_) | Error::Snapshot(_) => 5,
            _ => 2,
        }
    }
}
