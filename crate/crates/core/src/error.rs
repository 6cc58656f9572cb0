use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation, optimization and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Position, marginal or target weights fail validation.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// The incumbent allocation rule has zero slope everywhere, so bids carry no information.
    #[error("degenerate incumbent: allocation rule `{0}` is constant")]
    DegenerateIncumbent(String),

    /// The weight kernel is singular (incumbent slope is zero) at the given quantile.
    #[error("singular weight kernel at quantile {q}: incumbent slope is zero")]
    Singular { q: f64 },

    /// Truncation would remove the whole sample.
    #[error("sample too small for truncation: N = {samples}, truncated index l = {l}")]
    SampleTooSmall { samples: usize, l: usize },

    /// Weights are not implementable as a rank-based auction in the given environment.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The requested computation is not supported for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A simulation design failed; wraps the underlying error.
    #[error("design `{label}`: {source}")]
    Design {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
