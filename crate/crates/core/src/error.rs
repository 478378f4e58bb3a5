use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the toolkit.
///
/// Variants fall in two families: input problems (bad files, bad shapes, bad
/// parameters) and numerical problems (degenerate geometry, failed
/// optimization or convergence). [`Error::is_numerical`] separates them; the
/// CLI maps the first family to exit code 2 and the second to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite coordinate in row {row}")]
    NonFinite { row: usize },

    #[error("unsupported homology dimension {0} (supported: 0..=2)")]
    UnsupportedDimension(usize),

    #[error("diagram covers dimensions up to {available}, but {requested} were requested")]
    DimensionCoverage { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("row count mismatch: clean has {clean} rows, adversarial has {adversarial}")]
    Pairing { clean: usize, adversarial: usize },

    #[error("cannot normalize: loss at ratio 0 is zero")]
    Normalization,

    #[error("degenerate configuration: points {i} and {j} coincide on a critical edge")]
    Degenerate { i: usize, j: usize },

    #[error("kernel optimization failed: {0}")]
    Optimization(String),

    #[error("did not converge after {iterations} iterations (last iterate {last:?})")]
    Convergence { iterations: usize, last: Vec<f64> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Normalization
                | Error::Degenerate { .. }
                | Error::Optimization(_)
                | Error::Convergence { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}
