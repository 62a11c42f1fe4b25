use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes or vector dimensions do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration value is outside its valid range.
    #[error("config error: {0}")]
    Config(String),

    /// Several configuration problems found in one validation pass.
    #[error("config error: {}", .0.join("; "))]
    ConfigList(Vec<String>),

    /// A NaN or infinity appeared where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A binary or text file failed to parse.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A text file failed to parse at a given line (1-based).
    #[error("format error at line {line}: {message}")]
    Line { line: usize, message: String },

    /// An item id could not be resolved.
    #[error("lookup error: unknown id `{0}`")]
    Lookup(String),

    /// Data is present but does not satisfy the operation's contract.
    #[error("data error: {0}")]
    Data(String),

    /// The input is degenerate for the requested computation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A query item has no same-class neighbors to use as positives.
    #[error("no positive candidates for `{0}`: its class has a single item")]
    EmptyCandidates(String),

    /// A sampling pool could not supply the requested number of ids.
    #[error("sampling pool `{pool}` short by {shortfall} (requested {requested}, available {available})")]
    PoolShortfall {
        pool: &'static str,
        requested: usize,
        available: usize,
        shortfall: usize,
    },

    /// Training produced a non-finite loss or gradient. Carries the most
    /// recent checkpoint that completed an epoch with finite values.
    #[error("training diverged in epoch {epoch}: {message}")]
    Diverged {
        epoch: u32,
        message: String,
        last_good: Box<crate::net::Checkpoint>,
    },

    /// Refused to replace an existing file.
    #[error("refusing to overwrite existing file {0} (pass --force)")]
    Exists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-friendly tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Config(_) | Error::ConfigList(_) => "config",
            Error::Numeric(_) => "numeric",
            Error::Format { .. } | Error::Line { .. } => "format",
            Error::Lookup(_) => "lookup",
            Error::Data(_) => "data",
            Error::Degenerate(_) => "degenerate",
            Error::EmptyCandidates(_) => "empty_candidates",
            Error::PoolShortfall { .. } => "pool_shortfall",
            Error::Diverged { .. } => "diverged",
            Error::Exists(_) => "exists",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
