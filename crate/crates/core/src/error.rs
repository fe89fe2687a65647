use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration invariant does not hold. `field` names the violated key.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A factorization or solve failed (singular or indefinite matrix).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Root-MUSIC produced fewer admissible roots than there are sources.
    #[error("root-MUSIC found {found} admissible roots for {wanted} sources")]
    RootShortfall { found: usize, wanted: usize },

    #[error("power bisection failed: {0}")]
    Bisection(String),

    /// The fractional-programming objective decreased between rounds.
    #[error("FP objective decreased at iteration {iteration}: {previous} -> {current}")]
    NonMonotone {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    /// True when this error (or the error it wraps) is a configuration error.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::Parse(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attaches a pipeline stage name to errors.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
