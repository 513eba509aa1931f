use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix shape {rows}x{cols} does not match {len} entries")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },

    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular value decomposition of a {rows}x{cols} matrix did not converge")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("{what}: argument {value} outside the domain (requires > {bound})")]
    Domain { what: &'static str, value: f64, bound: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("layer `{layer}`: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite {what} at step {step}; step aborted")]
    NonFiniteStep { what: &'static str, step: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True when the failure is numerical (decomposition or non-finite
    /// values) rather than a usage problem.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SvdNoConvergence { .. } | Error::NonFinite { .. } | Error::NonFiniteStep { .. } => {
                true
            }
            Error::Layer { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
