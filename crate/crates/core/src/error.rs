use std::path::PathBuf;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("profile does not exist: {0}")]
    ProfileExistence(String),

    #[error("field diverged: {0}")]
    Diverged(String),

    #[error("undefined scale: {0}")]
    UndefinedScale(String),

    #[error("initial guess outside the modulation basin: {0}")]
    GuessQuality(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("not a blow-up: {0}")]
    NotABlowup(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("unsupported snapshot version {version} in {}", path.display())]
    UnsupportedVersion { path: PathBuf, version: u16 },

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Json(_)
            | Error::Format { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Io { .. } => 2,
            Error::Diagnostic(_) | Error::InsufficientData(_) | Error::NotABlowup(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
