use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid model structure: {0}")]
    Structure(String),

    #[error("insufficient data: {samples} samples but the largest lag is {max_lag}")]
    InsufficientData { samples: usize, max_lag: usize },

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("fit is undefined: the true impulse response is constant")]
    UndefinedFit,

    #[error(
        "infeasible residual bound: rho = {rho:e} is below the least-squares residual {v_ls:e}"
    )]
    Infeasible { rho: f64, v_ls: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
