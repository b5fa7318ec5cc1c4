use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Input values are unusable (non-finite entries, shape mismatch).
    #[error("invalid data: {0}")]
    Data(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The input has no usable signal, e.g. an all-zero spectrum or every
    /// null column constant.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("covariate design is rank deficient")]
    SingularDesign,

    /// The singular subspace requested is not identifiable.
    #[error("ill-posed subspace at k = {k}: eigen-gap {gap:e} is below tolerance")]
    IllPosedSubspace { k: usize, gap: f64 },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
