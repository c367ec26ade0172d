use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown kernel name `{0}`")]
    UnknownKernel(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The absorber set does not cover every nonzero mode exactly once, so no
    /// transaction (and no free-field factorization) can be formed.
    #[error("absorber set is not complete: {0}")]
    IncompleteAbsorbers(String),

    #[error("offer wave is not normalized (squared norm {0})")]
    Unnormalized(f64),

    /// A quantity that must be nonnegative came out substantially negative;
    /// this points at a kernel/grid inconsistency rather than rounding.
    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
