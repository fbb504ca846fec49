use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unknown item id {0}")]
    UnknownItem(u32),
    #[error("unknown item token `{0}`")]
    UnknownToken(String),
    #[error("invalid item subset: {0}")]
    InvalidKApps(String),
    #[error("invalid size {size}: must be in 1..={max}")]
    InvalidSize { size: usize, max: usize },
    #[error("no record has at least {k} items")]
    NoEligibleRecord { k: usize },
    #[error("item subset does not occur in the dataset")]
    NotInDataset,
    #[error("trace of length {len} is too short (need at least {min})")]
    InsufficientTrace { len: usize, min: usize },
    #[error("chain did not converge within {steps} steps")]
    NotConverged { steps: usize, z_history: Vec<(usize, f64)> },
    #[error("mixing bound undefined for h1* = 0")]
    BoundUndefined,
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),
    #[error("enumeration needs {needed} subsets, budget is {budget}")]
    TooLarge { needed: u128, budget: u128 },
    #[error("no K-subset occurs in the dataset")]
    Undefined,
    #[error("rejection sampling gave up after {0} tries")]
    RejectionBudgetExceeded(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
