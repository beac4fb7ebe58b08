use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by the stage that produces them; [`Error::kind`]
/// collapses them into the coarse classes the CLI maps to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // data model
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad split ratios {0:?}: must be positive and sum to 1")]
    BadRatios([f64; 3]),
    #[error("unknown species id {id} (table has {count} species)")]
    UnknownSpecies { id: u32, count: usize },
    #[error("unknown chemical symbol `{0}`")]
    UnknownSymbol(String),
    #[error("cell vectors are linearly dependent but periodicity is requested")]
    SingularCell,
    #[error("non-finite coordinate at atom {atom}")]
    NonFiniteCoordinate { atom: usize },
    #[error("configuration {index} has no energy label")]
    MissingEnergy { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // featurization and formats
    #[error("cell too small: periodic width {width:.3} Å is below 2·cutoff = {required:.3} Å")]
    CellTooSmall { width: f64, required: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("checksum mismatch: expected {expected}, computed {computed}")]
    Checksum { expected: String, computed: String },
    #[error("unsupported version {found} (this build reads up to {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // numerics
    #[error("all sampled feature rows coincide; median distance is zero")]
    DegenerateDistances,
    #[error("Gram matrix is not positive definite even with regularization {lambda:e}")]
    SingularGram { lambda: f64 },
    #[error("composition matrix is rank deficient ({rank} < {species})")]
    RankDeficientComposition { rank: usize, species: usize },
    #[error("labels have zero spread; cannot standardize")]
    DegenerateLabels,
    #[error("no baseline energy for species id {0}")]
    MissingSpeciesBaseline(u32),
    #[error("length mismatch: {left} predictions for {right} configurations")]
    LengthMismatch { left: usize, right: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("alpha = {0} lies outside [0, 1]")]
    AlphaOutOfRange(f64),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateDistances
            | Error::SingularGram { .. }
            | Error::RankDeficientComposition { .. }
            | Error::DegenerateLabels
            | Error::NotSymmetric(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
