use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite integrand value {value} at node {node}")]
    Evaluation { node: f64, value: String },

    #[error("unsupported weight: {0}")]
    UnsupportedWeight(String),

    #[error("determinant vanishes (I - K is singular) at s = {s}")]
    DeterminantZero { s: f64 },

    #[error("refinement did not converge; successive changes: {deltas:?}")]
    NonConvergence { deltas: Vec<f64> },

    #[error("sign convention could not be calibrated: {0}")]
    Convention(String),

    #[error("ODE integration failed at x = {x}: {reason}")]
    Ode { x: f64, reason: String },
}
