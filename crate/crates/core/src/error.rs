use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or specification failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error("split error: stratum {stratum} has {size} subjects, need at least 3")]
    Split { stratum: String, size: usize },

    #[error("roster error: missing covariates {missing:?}")]
    Roster { missing: Vec<String> },

    #[error("objective error: {0}")]
    Objective(String),

    #[error("degenerate design: covariate `{column}` is constant")]
    DegenerateDesign { column: String },

    #[error("monotone likelihood: coefficient `{column}` exceeded |beta| > {bound} (separation)")]
    Separation { column: String, bound: f64 },

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("sampling exhausted for case {case:?}: 0 of {draws} draws accepted")]
    SamplingExhausted { case: Vec<String>, draws: u64 },

    #[error("selection error: {0}")]
    Selection(String),

    #[error("bootstrap error: {dropped} of {total} replicates undefined")]
    Bootstrap { dropped: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MissingColumn { .. }
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Split { .. }
            | Error::Roster { .. }
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::Objective(_)
            | Error::DegenerateDesign { .. }
            | Error::Separation { .. }
            | Error::Conditioning(_)
            | Error::MetricUndefined(_)
            | Error::SamplingExhausted { .. }
            | Error::Selection(_)
            | Error::Bootstrap { .. } => 4,
            Error::Io { .. } => 5,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
