use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {what} (residual {residual:e})")]
    NumericalFailure { what: String, residual: f64 },

    /// The stroboscopic map has eigenvalues within `tol_unit` of 1, so the
    /// fixed point is either not unique or marginal.
    #[error("singular map: {} eigenvalue(s) within tolerance of 1", near_unit.len())]
    SingularMap { near_unit: Vec<Complex64> },

    #[error("matrix is not diagonalisable (eigenvector condition number {condition:e})")]
    NotDiagonalisable { condition: f64 },

    #[error("no steady state: inconsistent linear system (residual {residual:e})")]
    NoSteadyState { residual: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

impl Error {
    /// Stable machine-readable code used in CLI reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::SingularMap { .. } => "singular_map",
            Error::NotDiagonalisable { .. } => "not_diagonalisable",
            Error::NoSteadyState { .. } => "no_steady_state",
            Error::ResourceLimit(_) => "resource_limit",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
