use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("duplicate class name `{0}`")]
    DuplicateClass(String),

    #[error("label family mismatch: expected {expected}, found {found}")]
    LabelFamily { expected: String, found: String },

    #[error("not enough records: {0}")]
    Insufficient(String),

    #[error("corpus format error: {0}")]
    Format(String),

    #[error("corpus integrity error: {0}")]
    Integrity(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training failed at step {step}: {detail}")]
    Training { step: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// True for errors caused by bad user input (flags, config files, class
    /// names) rather than a failure while doing the work.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownClass(_)
                | Error::DuplicateClass(_)
                | Error::LabelFamily { .. }
                | Error::Insufficient(_)
                | Error::Toml(_)
        )
    }
}
