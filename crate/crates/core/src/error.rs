use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario, panel or parameter violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("angle grid exceeds the field of view: {0}")]
    FieldOfView(String),

    #[error("codebook oversamples the phase space: {entries} entries > 2^{bits}")]
    Oversampling { entries: usize, bits: u32 },

    #[error("search space too large: {size} configurations (limit {limit})")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("empty codebook for panel {0}")]
    EmptyCodebook(String),

    #[error("noise covariance is singular: {0}")]
    Singular(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension(_) => "dimension",
            Error::FieldOfView(_) => "field_of_view",
            Error::Oversampling { .. } => "oversampling",
            Error::SearchSpaceTooLarge { .. } => "search_space_too_large",
            Error::EmptyCodebook(_) => "empty_codebook",
            Error::Singular(_) => "singular",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::NonFinite(_) => "non_finite",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of numerical evaluation rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::UndefinedMetric(_) | Error::NonFinite(_)
        )
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
