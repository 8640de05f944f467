use thiserror::Error;

/// Errors produced by the crossover toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be parsed at all.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A file parsed but holds values outside the documented schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("w = {0} is odd; the dual-pair construction needs an even number of weeks (round up to {next})", next = .0 + 1)]
    OddWeeks(usize),

    #[error("design is not structurally valid: {0}")]
    InvalidDesign(String),

    #[error("undetectable difference: tau0 must be strictly positive")]
    UndetectableDifference,

    #[error(
        "tau not estimable: treatment column lies in the span of the period and patient columns"
    )]
    NotEstimable,

    #[error("no residual degrees of freedom left after fitting")]
    NoResidualDof,

    #[error("transform error: {0}")]
    Transform(String),

    /// A nonzero allocation imbalance was found in a stratum with no patients.
    #[error("internal inconsistency: nonzero imbalance {value} in empty stratum `{component}`")]
    EmptyStratumImbalance { component: &'static str, value: i64 },

    #[error("randomization test aborted: {failed} of {total} replicate fits failed (limit 5%)")]
    TooManyReplicateFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
