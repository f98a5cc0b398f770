use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("occupant count {occupants} out of range for {sites} sites")]
    Occupants { sites: usize, occupants: usize },

    #[error("sector dimension {dim} exceeds the configured maximum {max}")]
    DimensionTooLarge { dim: u128, max: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigensolver did not converge for {label}")]
    EigenConvergence { label: String },

    #[error("ground state is degenerate (gap {gap:e} below tolerance {tolerance:e})")]
    DegenerateGroundState {
        gap: f64,
        tolerance: f64,
        candidates: Box<[Vec<num_complex::Complex64>; 2]>,
    },

    #[error("initial and target states coincide (1 - overlap = {infidelity:e})")]
    StatesCoincide { infidelity: f64 },

    #[error("invalid protocol: {0}")]
    Protocol(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("time {t} outside [0, {tau}]")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("critical-time search failed: {message}")]
    TauSearch { message: String, history: Vec<(f64, f64)> },

    #[error("power-law fit failed: {message}")]
    Fit { message: String, best: Option<Box<crate::analysis::PowerLawFit>> },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: String, expected: u32 },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("missing section [{section}] in {path}")]
    MissingSection { path: String, section: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
