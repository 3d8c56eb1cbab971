use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    // hilbert
    #[error("dressed-state assignment conflict: labels {first} and {second} both claim eigenvector {eigenvector}")]
    AssignmentConflict {
        first: String,
        second: String,
        eigenvector: usize,
    },
    #[error("degenerate overlap for label {label}: top two overlaps differ by {gap:e}")]
    DegenerateOverlap { label: String, gap: f64 },

    // pulse
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-monotonic time stamp at line {line}: {t} ns does not exceed {previous} ns")]
    NonMonotonicTime { line: usize, t: f64, previous: f64 },

    // propagator
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("unitarity lost at t = {t} ns: defect {defect:e} exceeds {tolerance:e}")]
    UnitarityLost { t: f64, defect: f64, tolerance: f64 },
    #[error("no checkpoint at t = {0} ns")]
    UnknownCheckpoint(f64),

    // spectral
    #[error("matrix is not unitary: defect {0:e}")]
    NotUnitary(f64),
    #[error("need at least 3 phases, got {0}")]
    TooFewPhases(usize),
    #[error("distribution support mismatch: {0}")]
    SupportMismatch(String),
    #[error("window {index} ([{t_lo}, {t_hi}) ns) contains no checkpoint")]
    EmptyWindow { index: usize, t_lo: f64, t_hi: f64 },

    // curvature
    #[error("ambiguous eigenvector match at t = {t} ns: best overlap {overlap:.3} below threshold {threshold}")]
    AmbiguousMatch { t: f64, overlap: f64, threshold: f64 },
    #[error("trajectory too short for central differences: {0} points")]
    TooShort(usize),
    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),
    #[error("insufficient tail: {populated} populated bins above k_min = {k_min}, need {required}")]
    InsufficientTail {
        populated: usize,
        required: usize,
        k_min: f64,
    },

    // diagnostics
    #[error("operator {name} is not Hermitian: defect {defect:e}")]
    NotHermitian { name: String, defect: f64 },

    // gates
    #[error("logical projection is singular: smallest eigenvalue of M^dagger M is {0:e}")]
    SingularProjection(f64),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

/// Process exit codes used by the command-line front end.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const IO: i32 = 4;
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::InvalidParams(_)
            | Error::Parse { .. }
            | Error::NonMonotonicTime { .. }
            | Error::UnknownCheckpoint(_)
            | Error::Serde(_) => exit_code::CONFIG,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                exit_code::CONFIG
            }
            Error::Io { .. } => exit_code::IO,
            _ => exit_code::NUMERIC,
        }
    }
}
