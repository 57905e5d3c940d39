//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    #[error("all weights are zero")]
    DegenerateWeights,

    /// Weights violate the moment conditions, so the worst-case bias is unbounded.
    #[error("moment conditions violated (residual {residual:.3e}); worst-case bias is infinite")]
    InfiniteBias { residual: f64 },

    #[error("solver failure: {message} (iterations {iterations}, primal residual {primal_res:.3e}, dual residual {dual_res:.3e}, gap {gap:.3e})")]
    Solver {
        message: String,
        iterations: usize,
        primal_res: f64,
        dual_res: f64,
        gap: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver {
            message: msg.into(),
            iterations: 0,
            primal_res: f64::NAN,
            dual_res: f64::NAN,
            gap: f64::NAN,
        }
    }

    /// True for errors caused by bad input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidData(_)
                | Error::InsufficientSupport(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
