use thiserror::Error;

/// Failure of a subcommand, carrying the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Sizing(String),
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Sizing(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl From<hodmd::Error> for CliError {
    fn from(e: hodmd::Error) -> Self {
        use hodmd::Error as E;
        let text = e.to_string();
        match e {
            E::Sizing { .. } => CliError::Sizing(text),
            E::Degenerate(_) | E::ZeroNormReference => CliError::Degenerate(text),
            E::InvalidArgument(_) | E::LengthMismatch { .. } | E::DimensionMismatch(_) => CliError::Config(text),
            E::Io(_) | E::Parse { .. } | E::Numerical(_) => CliError::Io(text),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}
