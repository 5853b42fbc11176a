use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{expm, LtiSystem};
use crate::error::{Error, Result};

/// Which value goes in the (2,1) entry of the continuous-time pendulum matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixConvention {
    /// `-ω_n`, as the model is commonly printed for this experiment.
    #[default]
    Paper,
    /// `-ω_n²`, the linearized equation of motion.
    Physical,
}

/// Physical parameters of the damped pendulum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub damping: f64,
    pub gravity: f64,
    pub sample_time: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            damping: 0.2,
            gravity: 9.81,
            sample_time: 0.05,
        }
    }
}

impl PendulumParams {
    /// Undamped natural frequency `sqrt(g/L)`.
    pub fn natural_frequency(&self) -> f64 {
        (self.gravity / self.length).sqrt()
    }

    /// `b / (2 m L² ω_n)`
    pub fn damping_ratio(&self) -> f64 {
        self.damping / (2.0 * self.mass * self.length * self.length * self.natural_frequency())
    }

    /// Continuous-time dynamics matrix for states `[θ, θ̇]`.
    pub fn continuous_matrix(&self, convention: MatrixConvention) -> DMatrix<f64> {
        let wn = self.natural_frequency();
        let stiffness = match convention {
            MatrixConvention::Paper => wn,
            MatrixConvention::Physical => wn * wn,
        };
        DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -stiffness, -2.0 * self.damping_ratio() * wn],
        )
    }
}

/// Discretizes the pendulum: `A = exp(A_c T)`, `B = [0; 1]`, `C = [1, 0]`.
pub fn discretize_pendulum(params: &PendulumParams, convention: MatrixConvention) -> Result<LtiSystem> {
    let PendulumParams { mass, length, damping, gravity, sample_time } = *params;
    if [mass, length, damping, gravity].iter().any(|v| !(*v > 0.0 && v.is_finite()))
        || !(sample_time >= 0.0 && sample_time.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "pendulum parameters must be positive: {params:?}"
        )));
    }
    let a = expm(&(params.continuous_matrix(convention) * sample_time));
    LtiSystem::new(
        a,
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
}
