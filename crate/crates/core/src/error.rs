use thiserror::Error;

/// Errors raised across the toolkit. Each variant maps to one CLI exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid Fermi sea: {0}")]
    InvalidSea(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy error: {what} (achieved {achieved:.3e}, wanted {wanted:.3e})")]
    Accuracy {
        what: String,
        achieved: f64,
        wanted: f64,
    },

    #[error("size error: {what} has {size}, cap is {cap}")]
    Size {
        what: String,
        size: usize,
        cap: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("ambiguity error: {0}")]
    Ambiguity(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::InvalidModel(_) | Error::InvalidSea(_) => 2,
            Error::Domain(_)
            | Error::Accuracy { .. }
            | Error::Size { .. }
            | Error::Numeric(_)
            | Error::Ambiguity(_)
            | Error::Fit(_) => 3,
            Error::Capability(_) => 4,
        }
    }

    /// Short machine-readable class name used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid-model",
            Error::InvalidSea(_) => "invalid-sea",
            Error::Domain(_) => "domain",
            Error::Accuracy { .. } => "accuracy",
            Error::Size { .. } => "size",
            Error::Numeric(_) => "numeric",
            Error::Capability(_) => "capability",
            Error::Ambiguity(_) => "ambiguity",
            Error::Fit(_) => "fit",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
