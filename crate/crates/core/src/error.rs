use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unsupported dimension n={0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("{what} = {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("uncertified {what}: {detail}")]
    Uncertified { what: &'static str, detail: String },
    #[error("memory budget exceeded: {what} needs {required} bytes, budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        required: u64,
        budget: u64,
    },
    #[error("degenerate ratio: {0}")]
    Degenerate(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn range(what: &'static str, value: f64, range: impl Into<String>) -> Self {
        LabError::OutOfRange {
            what,
            value,
            range: range.into(),
        }
    }

    /// True for failures that mean a numerical certificate did not hold.
    pub fn is_certification(&self) -> bool {
        matches!(self, LabError::Uncertified { .. } | LabError::Degenerate(_))
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, LabError::BudgetExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
