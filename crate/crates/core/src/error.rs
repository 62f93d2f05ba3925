use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid length: {0}")]
    InvalidLength(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("incompatible lengths: {left} vs {right}")]
    IncompatibleLength { left: usize, right: usize },

    #[error("frequency {0} outside the open interval (0, 0.5)")]
    Aliasing(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fft length {0} is not a power of two")]
    FftLength(usize),

    #[error("cepstrum has imaginary residue {0:e}")]
    CepstrumNotReal(f64),

    #[error("band radius {radius} cannot absorb length difference {difference}")]
    InfeasibleBand { radius: usize, difference: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("bilinear discretization is singular: eigenvalue at 2/dt = {0}")]
    DiscretizationSingular(f64),

    #[error("simulation diverged at sample {index} (|y| = {value:e})")]
    Divergence { index: usize, value: f64 },

    #[error("norm is unbounded: {0}")]
    UnboundedNorm(String),

    #[error("incompatible models: {0}")]
    IncompatibleModel(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("measure failed on pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("measure failed while preparing item {index}: {source}")]
    Prepare {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
