use std::path::PathBuf;

use thiserror::Error;

use crate::volgrid::{Dims, ElemKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("NRRD header line {line} ({text:?}): {reason}")]
    NrrdHeader { line: usize, text: String, reason: String },

    #[error("NRRD payload: expected {expected} bytes for the declared sizes, found {found}")]
    NrrdPayload { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: Dims, found: Dims },

    #[error("expected a {expected} volume, found {found}")]
    KindMismatch { expected: ElemKind, found: ElemKind },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no chambers detected")]
    NoChambers,

    #[error("seeded watershed needs at least one marker voxel")]
    EmptyMarkers,

    #[error("supervoxel {0} has no entry in the cluster mapping")]
    MissingCluster(u32),

    #[error("labeling contains no chambers")]
    EmptyLabeling,

    #[error("infeasible synthetic specimen: {0}")]
    InfeasibleSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_dims(expected: Dims, found: Dims) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimMismatch { expected, found })
        }
    }
}
