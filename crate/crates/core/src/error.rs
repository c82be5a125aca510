use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time index {t} is outside the horizon 0..={horizon}")]
    OutOfHorizon { t: usize, horizon: usize },

    #[error("degenerate particle weights at t={t}: no particle is consistent with the measurement")]
    DegenerateWeights { t: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("exhaustive search refused: {count} candidate schedules exceeds the cap of {cap}")]
    SearchTooLarge { count: u128, cap: u128 },

    #[error("simulation {index}: {source}")]
    Simulation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Innermost error, unwrapping simulation context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Simulation { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
