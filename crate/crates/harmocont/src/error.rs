use thiserror::Error;

/// Errors produced by the continuation toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("matrix singular to working precision at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("eigenvalue iteration failed to converge for trailing index {index}")]
    EigNonConvergence { index: usize },

    #[error("Newton failed to converge at the starting point (residual {residual:.3e})")]
    InvalidStart { residual: f64 },

    #[error("Newton corrector failed after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("continuation stalled: step size underflow at step {step} (ds {ds:.3e})")]
    BranchStall { step: usize, ds: f64 },

    #[error("bifurcation localization failed: {reason}")]
    LocalizationFailure { reason: String },

    #[error("periodic-orbit starter failed: {reason}; try a smaller amplitude")]
    StarterFailure { reason: String },

    #[error("degenerate amplitude ratio: denominator amplitude {amplitude:.3e} below {threshold:.1e}")]
    DegenerateRatio { amplitude: f64, threshold: f64 },

    #[error(
        "free-parameter count rule violated: {constraints} constraints require {required} free \
         parameters ({constraints} + 1 for pseudo-arclength), got {got}"
    )]
    CountRule {
        constraints: usize,
        required: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("chart export failed: missing column {column} in {file}")]
    MissingColumn { column: String, file: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
