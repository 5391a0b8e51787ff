use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point lies outside the domain of `{0}`")]
    OutsideDomain(String),

    #[error("unsupported jet order {0} (supported: 0..=4)")]
    UnsupportedOrder(usize),

    #[error("unsupported dimension {0} (supported: 1..=4)")]
    UnsupportedDimension(usize),

    #[error("incompatible jets: {0}")]
    IncompatibleJets(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid finite-difference step {0:e}")]
    InvalidStep(f64),

    #[error("Hessian is not positive definite: {0}")]
    NotAMetric(String),

    #[error("degenerate metric (condition number {0:e})")]
    DegenerateMetric(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("step size collapsed to {h:e} at t = {t}: incompleteness suspected")]
    IncompletenessSuspected { t: f64, h: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),
}

pub type Result<T> = std::result::Result<T, Error>;
