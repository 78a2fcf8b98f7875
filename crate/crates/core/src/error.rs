use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {constraint}")]
    InvalidParameter { name: &'static str, constraint: String },

    #[error("path loss is singular at zero distance")]
    Singularity,

    #[error("integral of |z|^-alpha diverges: alpha < d is required (alpha = {alpha}, d = {dim})")]
    Divergent { alpha: f64, dim: usize },

    #[error("measures live on different partitions")]
    PartitionMismatch,

    #[error("grouping is not a partition of the bins: {0}")]
    NotAPartition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter { name, constraint: constraint.into() }
    }

    /// True for errors caused by the caller's inputs rather than by a failed run.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::Divergent { .. }
                | Error::PartitionMismatch
                | Error::NotAPartition(_)
                | Error::Config(_)
        )
    }
}
