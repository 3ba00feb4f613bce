use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("singular linear operator: {0}")]
    SingularOperator(String),
    #[error("singular inner matrix: {0}")]
    SingularInner(String),
    #[error("eigen solver did not converge after {0} sweeps")]
    EigenConvergence(usize),
    #[error("sdp solver finished with status {0:?}")]
    Sdp(crate::sdp::SdpStatus),
    #[error("riccati iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("state overflow at t = {time}: norm {norm:e}")]
    Overflow { time: f64, norm: f64 },
    #[error("assumption gate failed: {}", .0.join("; "))]
    AssumptionGate(Vec<String>),
    #[error("residual check failed: {0}")]
    ResidualCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
