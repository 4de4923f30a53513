use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("need at least {required} replicates, got {got}")]
    InsufficientReplicates { required: usize, got: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(&'static str),

    #[error("step size violates eta*d_i + eta*d_j > 1 (smallest value {value})")]
    StepSizeDomain { value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("iteration counter is 1-based; got t = 0")]
    StepIndex,

    #[error("SGD diverged at step {step}: non-finite gradient or iterate")]
    Divergence { step: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("pivot undefined for zero spread")]
    DegeneratePivot,

    #[error("invalid batch layout: {0}")]
    Layout(String),

    #[error("insufficient data: needed {needed} observations, stream had {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("objective does not provide a Hessian oracle")]
    MissingHessian,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dataset format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
