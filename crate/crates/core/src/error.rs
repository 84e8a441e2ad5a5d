use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel coefficient a(0) must vanish, got {0}")]
    NonzeroOrigin(num_complex::Complex64),

    #[error("kernel violates a(m) = conj(a(-m)) at offset {offset}")]
    ConjugateSymmetry { offset: i64 },

    #[error("power-law exponent must exceed 1, got {0}")]
    InvalidExponent(f64),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("Maryland potential resonant at site {site}: distance {distance:e} to a pole")]
    MarylandResonance { site: i64, distance: f64 },

    #[error("operator dimension {dimension} exceeds the configured maximum {max}")]
    DimensionOverflow { dimension: usize, max: usize },

    #[error("eigensolver failed to converge on {provenance}")]
    ConvergenceFailure { provenance: String },

    #[error(
        "eigendecomposition of {provenance} out of tolerance: residual {residual:e}, \
         orthonormality {orthonormality:e} (limit {limit:e})"
    )]
    EigenQuality {
        provenance: String,
        residual: f64,
        orthonormality: f64,
        limit: f64,
    },

    #[error("check requires a linear electric field; the operator uses a Maryland potential")]
    WrongPotentialFamily,

    #[error("no eigenvector is centered inside the interior window")]
    NoInteriorModes,

    #[error("source site {site} lies outside the interior window |k| <= {limit}")]
    SourceOutsideInterior { site: i64, limit: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config invalid at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("stage `{stage}` failed: {cause}")]
    StageFailure { stage: String, cause: String },

    #[error("malformed dump {path}: {message}")]
    MalformedDump { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            path: path.into(),
            message: message.into(),
        }
    }
}
