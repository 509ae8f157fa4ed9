use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the admissible interval {interval}")]
    Domain {
        what: String,
        value: f64,
        interval: &'static str,
    },

    #[error("graph structure: {0}")]
    Structure(String),

    #[error("invalid dimensions T={t}, K={k}: both must be at least 2")]
    InvalidDims { t: usize, k: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("parameters are not canonical: |sum| = {max_abs_sum:e} for {what}")]
    NotCanonical { what: String, max_abs_sum: f64 },

    #[error("canonical coordinate vector has length {found}, expected {expected}")]
    CoordLength { expected: usize, found: usize },

    #[error("conditioning event {event} has zero probability")]
    ZeroConditioning { event: &'static str },

    #[error("zero denominator in ratio {0}")]
    ZeroDenominator(&'static str),

    #[error("transformed {entry} = {value} falls outside (0,1); admissible bound: {bound}")]
    RangeViolation {
        entry: String,
        value: f64,
        bound: String,
    },

    #[error("xi is not constant across items for {} cell(s), first at (t={}, k={}); max gap {max_gap:e}", cells.len(), cells[0].0, cells[0].1)]
    XiInconsistent {
        cells: Vec<(usize, usize)>,
        max_gap: f64,
    },

    #[error("eta = 1 gives only the identity transform")]
    TrivialTransform,

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("case Neither admits no eta-transform within the model family")]
    NeitherCase,

    #[error("generation failed after {attempts} attempt(s): {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("probability of category {category} in cell (t={t}, k={k}) is {value:e}, below {floor:e}")]
    ProbabilityUnderflow {
        t: usize,
        k: usize,
        category: &'static str,
        value: f64,
        floor: f64,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn mismatch(what: &str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            what: what.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
