//! Plant, coloring filter, augmentation and pendulum models.

mod augment;
mod coloring;
pub mod linalg;
mod pendulum;

use nalgebra::DMatrix;

pub use augment::{augment, AugmentedSystem};
pub use coloring::{jury_stable, ColoringFilter, Realization};
pub use linalg::{expm, solve_discrete_lyapunov, spectral_radius};
pub use pendulum::{discretize_pendulum, MatrixConvention, PendulumParams};

use crate::error::{Error, Result};

/// Discrete-time plant `x_k = A x_{k-1} + B v_{k-1}`, `y_k = C x_k + n_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square and non-empty, got {:?}",
                a.shape()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B must be {n}×l, got {:?}",
                b.shape()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "C must be m×{n}, got {:?}",
                c.shape()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("system matrices must be finite".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Process-noise input dimension.
    pub fn l(&self) -> usize {
        self.b.ncols()
    }

    /// Measurement dimension.
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// `B Q Bᵀ`, the state-space process-noise covariance for input covariance `q`.
    pub fn input_covariance(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        &self.b * q * self.b.transpose()
    }
}

/// Noise levels for an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// White process-noise covariance (l×l).
    pub q: DMatrix<f64>,
    /// Measurement-noise covariance (m×m).
    pub r: DMatrix<f64>,
    /// Target stationary variance of the colored process noise.
    pub sigma_v_sq: f64,
    /// Driving-noise variance for the coloring filter input.
    pub q_w: f64,
}

impl NoiseSpec {
    /// Scalar-channel spec whose driving variance is normalized so that the
    /// colored output has variance `sigma_v_sq`.
    pub fn for_filter(filter: &ColoringFilter, sigma_v_sq: f64, r: f64) -> Result<Self> {
        let spec = Self {
            q: DMatrix::from_element(1, 1, sigma_v_sq),
            r: DMatrix::from_element(1, 1, r),
            sigma_v_sq,
            q_w: filter.driving_variance(sigma_v_sq),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_v_sq >= 0.0) || !(self.q_w >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise variances must be non-negative".into(),
            ));
        }
        check_psd(&self.q, "Q", false)?;
        check_psd(&self.r, "R", true)
    }
}

fn check_psd(m: &DMatrix<f64>, name: &str, strict: bool) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{name} must be square")));
    }
    if (m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
        return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    let ok = if strict { min_eig > 0.0 } else { min_eig >= -1e-12 };
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive {}definite",
            if strict { "" } else { "semi" }
        )));
    }
    Ok(())
}
