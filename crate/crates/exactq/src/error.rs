use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parameters are infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Core(#[from] exactq_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl AppError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code: 2 for infeasible parameters, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Infeasible(_) | Self::Core(exactq_core::Error::NoFeasibleM) => 2,
            _ => 1,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
