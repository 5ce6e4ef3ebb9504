use std::fmt;

use crowdshield_core::{DataError, EncoderError, ModelError};

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError {
            kind: Kind::Usage,
            source: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        CliError {
            kind: Kind::Data,
            source: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn runtime(err: impl Into<anyhow::Error>) -> Self {
        CliError {
            kind: Kind::Runtime,
            source: err.into(),
        }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError {
            kind: self.kind,
            source: self.source.context(ctx),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError {
            kind: Kind::Data,
            source: e.into(),
        }
    }
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        let kind = match e {
            EncoderError::Config(_) => Kind::Usage,
            _ => Kind::Runtime,
        };
        CliError {
            kind,
            source: e.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match &e {
            ModelError::Data(_) | ModelError::Checkpoint(_) | ModelError::Empty(_) => Kind::Data,
            ModelError::Config(_) | ModelError::Encoder(EncoderError::Config(_)) => Kind::Usage,
            _ => Kind::Runtime,
        };
        CliError {
            kind,
            source: e.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
