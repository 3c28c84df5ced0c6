//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value outside an operation's stated domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data violated a structural invariant (geometry out of bounds,
    /// degenerate box, mismatched dimensions, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input file (manifest, sidecar, detections, script, CSV).
    #[error("parse error: {0}")]
    Parse(String),

    /// Bad pipeline configuration. Maps to exit code 2 in the CLI.
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps the error with a prefix, e.g. the scene id being processed.
    pub fn context(self, ctx: impl Into<String>) -> Self {
        Error::Context {
            context: ctx.into(),
            source: Box::new(self),
        }
    }

    /// CLI exit code contract: 0 success, 1 input error, 2 config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Context { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

/// Extension to attach context to any `Result` in one call.
pub trait ResultExt<T> {
    fn context(self, ctx: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, ctx: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.context(ctx))
    }
}
