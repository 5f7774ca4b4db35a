use cfmimo_fbl::FblError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Fbl(#[from] FblError),

    #[error("placement {placement}{}: {source}", fade.map(|f| format!(", fade {f}")).unwrap_or_default())]
    InPlacement {
        placement: usize,
        fade: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_placement(self, placement: usize, fade: Option<usize>) -> Self {
        Error::InPlacement {
            placement,
            fade,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Unsupported(_) | Error::Json(_) => 2,
            Error::Numerical(_) | Error::Fbl(_) => 3,
            Error::InPlacement { source, .. } => source.exit_code(),
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
