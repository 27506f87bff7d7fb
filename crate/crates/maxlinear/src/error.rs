use thiserror::Error;

/// Errors produced by model construction, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cycle detected in directed graph")]
    CycleDetected,

    #[error("row {0} has no positive entry")]
    ZeroRow(usize),

    #[error("column {0} is constant; rank transform undefined")]
    ConstantColumn(usize),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid max-projection descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("need {needed} exceedances but only {available} usable observations")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid input data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
