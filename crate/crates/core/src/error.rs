use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sampler {sampler} returned {found:?}, expected {expected:?}")]
    DimensionMismatch {
        sampler: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("Q(t) is not symmetric at t={t}: max |Q - Q^T| = {asymmetry:e}")]
    AsymmetricQ { t: f64, asymmetry: f64 },

    /// `J(t)` lost row rank; carries sigma_min / sigma_max.
    #[error("constraint-degenerate at t={t}: J singular value ratio {sigma_ratio:e}")]
    ConstraintDegenerate { t: f64, sigma_ratio: f64 },

    /// `J(t)` has full row rank but the KKT matrix is still singular or too
    /// badly conditioned, so the fault lies with Q on the constraint nullspace.
    #[error("Q-degenerate at t={t}: KKT condition estimate {condition:e}")]
    QDegenerate { t: f64, condition: f64 },

    #[error("singular system matrix at t={t}")]
    Singular { t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("t={t} outside the path domain [0, {period}]")]
    OutOfRange { t: f64, period: f64 },

    #[error("dynamics unavailable for chain `{0}`")]
    DynamicsUnavailable(String),

    #[error("parameter file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("expression `{key}`: {message}")]
    Expression { key: String, message: String },

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
