use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has (near) zero norm")]
    ZeroColumn(usize),
    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate index {0} in selection")]
    DuplicateIndex(usize),
    #[error("selection is empty")]
    EmptySelection,
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("atom {atom} is not unit norm (norm {norm})")]
    NotUnitNorm { atom: usize, norm: f64 },
    #[error("invalid sparse code: {0}")]
    InvalidCode(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sparsity must be in 1..={n_atoms}, got {sparsity}")]
    InvalidSparsity { sparsity: usize, n_atoms: usize },
    #[error("singular least-squares subproblem")]
    SingularSubproblem,
    #[error("coding column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("too few signals: {available} available after selection, {required} required")]
    TooFewSignals { available: usize, required: usize },
    #[error("kernel matrix is singular even after jitter")]
    SingularKernel,
    #[error("kernel Gram matrix is not positive semidefinite (tolerance {tol})")]
    IndefiniteGram { tol: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("label at line {line} is not binary: {value}")]
    NonBinaryLabel { line: usize, value: String },
    #[error("could not draw a split with both classes in the test set after {attempts} attempts")]
    DegenerateSplit { attempts: usize },
    #[error("metric needs both classes present")]
    SingleClass,
    #[error("model format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
