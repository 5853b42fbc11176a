//! Second-order coloring (shaping) filters for the process noise.
//!
//! `H(z) = (γ₃ z + γ₂) / (z² + γ₁ z + γ₀)`, realized in controllable
//! canonical form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::linalg::solve_discrete_lyapunov;
use crate::error::{Error, Result};

/// Denominator magnitude below which [`ColoringFilter::evaluate`] reports a pole.
const POLE_THRESHOLD: f64 = 1e-12;

/// State-space realization `(A_H, B_H, C_H)` of a coloring filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// A stable second-order strictly proper coloring filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoringFilter {
    gamma: [f64; 4],
    realization: Realization,
}

/// Second-order Jury test for `z² + γ₁ z + γ₀`.
pub fn jury_stable(gamma0: f64, gamma1: f64) -> bool {
    gamma0.abs() < 1.0 && gamma1.abs() < 1.0 + gamma0
}

impl ColoringFilter {
    /// Builds the filter from its transfer-function coefficients.
    pub fn new(gamma0: f64, gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        if ![gamma0, gamma1, gamma2, gamma3].iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidParameter(
                "coloring filter coefficients must be finite".into(),
            ));
        }
        if !jury_stable(gamma0, gamma1) {
            return Err(Error::UnstableFilter { gamma0, gamma1 });
        }
        let a = DMatrix::from_row_slice(2, 2, &[-gamma1, -gamma0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        // First state carries z/den, the second 1/den, so the numerator
        // coefficients go in descending-power order.
        let c = DMatrix::from_row_slice(1, 2, &[gamma3, gamma2]);
        Ok(Self {
            gamma: [gamma0, gamma1, gamma2, gamma3],
            realization: Realization { a, b, c },
        })
    }

    /// Filter with conjugate poles `radius·e^{±j angle}` and numerator
    /// `gain·(z - zero)`.
    pub fn from_poles_zero(radius: f64, angle_deg: f64, zero: f64, gain: f64) -> Result<Self> {
        if radius < 0.0 || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pole radius must be non-negative, got {radius}"
            )));
        }
        if gain == 0.0 || !gain.is_finite() {
            return Err(Error::InvalidParameter("filter gain must be non-zero".into()));
        }
        let gamma0 = radius * radius;
        let gamma1 = -2.0 * radius * angle_deg.to_radians().cos() + 0.0;
        if radius >= 1.0 {
            return Err(Error::UnstableFilter { gamma0, gamma1 });
        }
        Self::new(gamma0, gamma1, -gain * zero + 0.0, gain)
    }

    /// `H(z) = 1/z`: a one-step delay of white noise, i.e. no coloring.
    pub fn white() -> Self {
        Self::new(0.0, 0.0, 0.0, 1.0).expect("pure delay is stable")
    }

    pub fn gamma(&self) -> [f64; 4] {
        self.gamma
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    pub fn a_h(&self) -> &DMatrix<f64> {
        &self.realization.a
    }

    pub fn b_h(&self) -> &DMatrix<f64> {
        &self.realization.b
    }

    pub fn c_h(&self) -> &DMatrix<f64> {
        &self.realization.c
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> [Complex64; 2] {
        let [g0, g1, _, _] = self.gamma;
        let disc = Complex64::new(g1 * g1 - 4.0 * g0, 0.0).sqrt();
        [(-g1 + disc) / 2.0, (-g1 - disc) / 2.0]
    }

    /// Evaluates `H(z)` directly from the coefficients.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        let [g0, g1, g2, g3] = self.gamma;
        let den = z * z + g1 * z + g0;
        if den.norm() < POLE_THRESHOLD {
            return Err(Error::PoleEvaluation { magnitude: den.norm() });
        }
        Ok((g3 * z + g2) / den)
    }

    /// Evaluates `C_H (zI - A_H)⁻¹ B_H` from the realization.
    pub fn evaluate_realization(&self, z: Complex64) -> Result<Complex64> {
        let r = &self.realization;
        let resolvent = DMatrix::<Complex64>::identity(2, 2) * z - r.a.map(Complex64::from);
        let x = resolvent
            .lu()
            .solve(&r.b.map(Complex64::from))
            .ok_or(Error::PoleEvaluation { magnitude: 0.0 })?;
        Ok((r.c.map(Complex64::from) * x)[(0, 0)])
    }

    /// Stationary state covariance of the realization driven by unit-variance
    /// white noise.
    pub fn unit_state_covariance(&self) -> DMatrix<f64> {
        let r = &self.realization;
        solve_discrete_lyapunov(&r.a, &(&r.b * r.b.transpose()))
            .expect("Jury-stable filter has a Lyapunov solution")
    }

    /// Squared H2 norm `Σ_k h_k²`, the output variance per unit input variance.
    pub fn h2_norm_sq(&self) -> f64 {
        let c = &self.realization.c;
        (c * self.unit_state_covariance() * c.transpose())[(0, 0)]
    }

    /// Driving-noise variance that gives the filter output a stationary
    /// variance of `sigma_v_sq`.
    pub fn driving_variance(&self, sigma_v_sq: f64) -> f64 {
        sigma_v_sq / self.h2_norm_sq()
    }

    /// Theoretical output autocovariance `C_H A_H^ℓ Σ C_Hᵀ · q_w`.
    pub fn output_autocovariance(&self, lag: usize, q_w: f64) -> f64 {
        let r = &self.realization;
        let sigma = self.unit_state_covariance() * q_w;
        let mut row: DMatrix<f64> = r.c.clone();
        for _ in 0..lag {
            row = &row * &r.a;
        }
        (row * sigma * r.c.transpose())[(0, 0)]
    }

    /// Output power spectrum `q_w |H(e^{jφ})|²` at normalized frequency `phi`.
    pub fn output_psd(&self, phi: f64, q_w: f64) -> f64 {
        let z = Complex64::from_polar(1.0, phi);
        q_w * self.evaluate(z).map(|h| h.norm_sqr()).unwrap_or(f64::INFINITY)
    }

    /// Column vector `[γ₀, γ₁, γ₂, γ₃]ᵀ`.
    pub fn gamma_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.gamma)
    }
}
