use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: simweight::Error,
    },

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn core(context: impl Into<String>, source: simweight::Error) -> Self {
        CliError::Core { context: context.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use simweight::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Io(_) => EXIT_DATA,
            CliError::Core { source, .. } => match source {
                E::InvalidParameter(_) => EXIT_USAGE,
                E::SingleClass | E::NumericalFailure(_) | E::RankDeficient | E::AllZero => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}
