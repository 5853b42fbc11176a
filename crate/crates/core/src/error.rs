use thiserror::Error;

/// Errors raised by the estimation, analysis and adaptation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coloring filter denominator is unstable (gamma0 = {gamma0}, gamma1 = {gamma1})")]
    UnstableFilter { gamma0: f64, gamma1: f64 },

    #[error("transfer function evaluated at a pole (|denominator| = {magnitude:e})")]
    PoleEvaluation { magnitude: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("innovation covariance is singular or ill-conditioned (condition {condition:e})")]
    SingularInnovationCovariance { condition: f64 },

    #[error("Riccati iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("closed loop is unstable (spectral radius {radius})")]
    UnstableClosedLoop { radius: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("noise input transfer is rank deficient (smallest singular value {singular_value:e})")]
    RankDeficient { singular_value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnstableFilter { .. }
                | Error::PoleEvaluation { .. }
                | Error::SingularInnovationCovariance { .. }
                | Error::NoConvergence { .. }
                | Error::UnstableClosedLoop { .. }
                | Error::RankDeficient { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
