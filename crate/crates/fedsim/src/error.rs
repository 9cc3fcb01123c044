use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Core(#[from] fedsim_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: fedsim_core::federation::wire::DecodeError,
    },
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 configuration, 3 data, 4 numeric fault, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use fedsim_core::Error as E;
        match self {
            AppError::Config(_) | AppError::Core(E::Config(_)) => 2,
            AppError::Data(_)
            | AppError::Image { .. }
            | AppError::Checkpoint { .. }
            | AppError::Core(E::Data(_) | E::Shape(_) | E::Decode(_)) => 3,
            AppError::Core(E::NumericFault { .. }) => 4,
            _ => 1,
        }
    }
}
