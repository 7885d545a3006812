use std::path::PathBuf;

/// Everything the std layer can fail with. Each variant maps onto one of the
/// process exit codes through [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] nvsm_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Statistics(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use nvsm_core::Error as C;
        match self {
            Error::Usage(_) => EXIT_USAGE,
            Error::Statistics(_) => EXIT_NUMERIC,
            Error::Core(C::NonFinite(_) | C::ZeroVector | C::DegenerateDeviation { .. }) => {
                EXIT_NUMERIC
            }
            _ => EXIT_DATA,
        }
    }
}
