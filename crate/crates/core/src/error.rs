use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("coordinate {axis} = {value} lies outside the domain [{lower}, {upper}]")]
    OutOfDomain {
        axis: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("point has {found} coordinates, domain has {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("kernel estimate selects no base kernel")]
    EmptyKernel,
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("design holds no observations")]
    EmptyDesign,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("compatibility diagnostics require scalar groups, group {group} has dimension {dim}")]
    UnsupportedDiagnostic { group: usize, dim: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("lookup table has no task column {task} ({columns} columns)")]
    MissingColumn { task: usize, columns: usize },
    #[error("lookup table is empty")]
    EmptyTable,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
