use thiserror::Error;

pub type Result<T> = std::result::Result<T, NndmError>;

/// Stage of [`crate::fit`] that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStage {
    Neighborhoods,
    CrossValidation,
    ConjugateUpdate,
    Alpha,
}

impl std::fmt::Display for FitStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FitStage::Neighborhoods => "neighborhood construction",
            FitStage::CrossValidation => "cross-validation",
            FitStage::ConjugateUpdate => "conjugate update",
            FitStage::Alpha => "alpha selection",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum NndmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cross-validation failed: {0}")]
    CvFailure(String),
    #[error("fit failed during {stage}: {source}")]
    Fit {
        stage: FitStage,
        #[source]
        source: Box<NndmError>,
    },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("model file version {found} is newer than the supported version {supported}")]
    Version { found: u64, supported: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NndmError {
    pub(crate) fn at(self, stage: FitStage) -> NndmError {
        NndmError::Fit {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn invalid_param(msg: impl Into<String>) -> NndmError {
    NndmError::InvalidParameter(msg.into())
}
