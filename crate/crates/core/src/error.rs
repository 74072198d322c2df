use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or root search failed to reach its tolerance.
    #[error("numerical error: {message} (achieved error estimate {estimate:.3e})")]
    Numerical { message: String, estimate: f64 },

    /// The time stepper produced a non-contractive amplitude.
    #[error("solver error: {0}")]
    Solver(String),

    /// Master-equation coefficients are singular where u(t) vanishes.
    #[error("singular coefficient at grid index {index}: |u| = {abs_u:.3e}")]
    SingularCoefficient { index: usize, abs_u: f64 },

    /// Effective inverse temperature requested where v(t) is still zero.
    #[error("effective temperature undefined: v = {0:.3e} is below the floor")]
    Undefined(f64),

    /// The Fock truncation level does not hold enough probability mass.
    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, estimate: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            estimate,
        }
    }
}
