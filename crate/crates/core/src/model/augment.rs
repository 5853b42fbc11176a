use nalgebra::DMatrix;

use super::{ColoringFilter, LtiSystem};
use crate::error::{Error, Result};

/// Plant with the coloring filter states appended.
///
/// `x_aug = [x; x_H]`, `A_aug = [[A, B C_H], [0, A_H]]`, `B_aug = [0; B_H]`,
/// `C_aug = [C, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    base: LtiSystem,
    filter: ColoringFilter,
    system: LtiSystem,
}

impl AugmentedSystem {
    pub fn base(&self) -> &LtiSystem {
        &self.base
    }

    pub fn filter(&self) -> &ColoringFilter {
        &self.filter
    }

    /// The augmented system as a plain LTI triple.
    pub fn system(&self) -> &LtiSystem {
        &self.system
    }

    pub fn a_aug(&self) -> &DMatrix<f64> {
        self.system.a()
    }

    pub fn b_aug(&self) -> &DMatrix<f64> {
        self.system.b()
    }

    pub fn c_aug(&self) -> &DMatrix<f64> {
        self.system.c()
    }

    /// Plant-state dimension.
    pub fn plant_dim(&self) -> usize {
        self.base.n()
    }

    /// `B_aug q_w B_augᵀ`
    pub fn process_covariance(&self, q_w: f64) -> DMatrix<f64> {
        self.b_aug() * self.b_aug().transpose() * q_w
    }
}

/// Appends the coloring filter states to a single-input plant.
pub fn augment(system: &LtiSystem, filter: &ColoringFilter) -> Result<AugmentedSystem> {
    if system.l() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "augmentation needs a scalar process-noise channel, plant has l = {}",
            system.l()
        )));
    }
    let n = system.n();
    let m = system.m();
    let h = filter.realization();

    let mut a = DMatrix::<f64>::zeros(n + 2, n + 2);
    a.view_mut((0, 0), (n, n)).copy_from(system.a());
    a.view_mut((0, n), (n, 2)).copy_from(&(system.b() * &h.c));
    a.view_mut((n, n), (2, 2)).copy_from(&h.a);

    let mut b = DMatrix::<f64>::zeros(n + 2, 1);
    b.view_mut((n, 0), (2, 1)).copy_from(&h.b);

    let mut c = DMatrix::<f64>::zeros(m, n + 2);
    c.view_mut((0, 0), (m, n)).copy_from(system.c());

    Ok(AugmentedSystem {
        base: system.clone(),
        filter: filter.clone(),
        system: LtiSystem::new(a, b, c)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{discretize_pendulum, MatrixConvention, PendulumParams};
    use approx::assert_abs_diff_eq;

    fn sf1() -> ColoringFilter {
        ColoringFilter::from_poles_zero(0.8, 100.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn scalar_plant_block_layout() {
        let plant = LtiSystem::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let f = sf1();
        let aug = augment(&plant, &f).unwrap();
        let a = aug.a_aug();
        assert_eq!(a.shape(), (3, 3));
        assert_eq!(a[(0, 0)], 0.5);
        assert_eq!(a[(0, 1)], f.c_h()[(0, 0)]);
        assert_eq!(a[(0, 2)], f.c_h()[(0, 1)]);
        assert_eq!(a.view((1, 1), (2, 2)), f.a_h().view((0, 0), (2, 2)));
        assert_eq!(a[(1, 0)], 0.0);
        assert_eq!(a[(2, 0)], 0.0);
        assert_eq!(aug.b_aug().as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(aug.c_aug().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn pendulum_augmented_spectrum() {
        let plant = discretize_pendulum(&PendulumParams::default(), MatrixConvention::Paper).unwrap();
        let aug = augment(&plant, &sf1()).unwrap();
        assert_eq!(aug.a_aug().shape(), (4, 4));
        assert_eq!(aug.b_aug().as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        let expected = plant.spectral_radius().max(0.8);
        assert_abs_diff_eq!(aug.system().spectral_radius(), expected, epsilon = 1e-9);

        // block-triangular: eig(A_aug) = eig(A) ∪ eig(A_H)
        let mut got: Vec<f64> = aug.a_aug().complex_eigenvalues().iter().map(|e| e.norm()).collect();
        let mut want: Vec<f64> = plant
            .a()
            .complex_eigenvalues()
            .iter()
            .chain(sf1().a_h().complex_eigenvalues().iter())
            .map(|e| e.norm())
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_multi_input_plant() {
        let plant = LtiSystem::new(
            DMatrix::identity(2, 2) * 0.5,
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(augment(&plant, &sf1()), Err(Error::DimensionMismatch(_))));
    }
}
