//! Search coordinates for the coloring filter and their feasible region.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::ColoringFilter;

/// How the optimizer sees the coloring filter.
///
/// Both forms hold the numerator's leading coefficient at 1 and carry a
/// fourth coordinate `s`, the log of a multiplier on the driving-noise
/// variance (the overall output scale).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// `[γ₀, γ₁, γ₂, s]`
    DirectGamma,
    /// `[pole radius, pole angle (deg), zero, s]`
    #[default]
    PoleZero,
}

/// Box limits and stability margins of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub radius_max: f64,
    pub jury_margin: f64,
    pub zero_abs_max: f64,
    pub log_scale_abs_max: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            radius_max: 0.995,
            jury_margin: 0.005,
            zero_abs_max: 50.0,
            log_scale_abs_max: 5.0,
        }
    }
}

pub const SEARCH_DIM: usize = 4;

impl Parameterization {
    /// Maps a feasible search point to a coloring filter.
    pub fn filter(self, point: &[f64]) -> Result<ColoringFilter> {
        match self {
            Parameterization::PoleZero => ColoringFilter::from_poles_zero(point[0], point[1], point[2], 1.0),
            Parameterization::DirectGamma => ColoringFilter::new(point[0], point[1], point[2], 1.0),
        }
    }

    /// Search point describing `filter`, with log-scale `s`. The numerator is
    /// normalized to a unit leading coefficient.
    pub fn point_for(self, filter: &ColoringFilter, log_scale: f64) -> Vec<f64> {
        let [g0, g1, g2, g3] = filter.gamma();
        let lead = if g3 != 0.0 { g3 } else { 1.0 };
        match self {
            Parameterization::DirectGamma => vec![g0, g1, g2 / lead, log_scale],
            Parameterization::PoleZero => {
                let pole = filter.poles()[0];
                vec![pole.norm(), pole.arg().abs().to_degrees(), -g2 / lead, log_scale]
            }
        }
    }

    /// Relative initial simplex steps per coordinate.
    pub fn step_scales(self) -> [f64; SEARCH_DIM] {
        match self {
            Parameterization::PoleZero => [0.2, 30.0, 1.0, 0.5],
            Parameterization::DirectGamma => [0.2, 0.3, 1.0, 0.5],
        }
    }
}

/// Clamps a search point into the feasible region.
///
/// Pole–zero form: radius into `[0, radius_max]`, angle into `[0°, 180°]`.
/// Direct form: `(γ₀, γ₁)` into the Jury triangle shrunk by `jury_margin`,
/// i.e. `|γ₀| ≤ 1 - margin` and `|γ₁| ≤ (1 + γ₀)(1 - margin)`.
pub fn project_to_stable(point: &[f64], param: Parameterization, bounds: &Bounds) -> Vec<f64> {
    let mut p = point.to_vec();
    for v in p.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
    match param {
        Parameterization::PoleZero => {
            p[0] = p[0].clamp(0.0, bounds.radius_max);
            p[1] = p[1].clamp(0.0, 180.0);
        }
        Parameterization::DirectGamma => {
            let keep = 1.0 - bounds.jury_margin;
            p[0] = p[0].clamp(-keep, keep);
            let lim = (1.0 + p[0]) * keep;
            p[1] = p[1].clamp(-lim, lim);
        }
    }
    p[2] = p[2].clamp(-bounds.zero_abs_max, bounds.zero_abs_max);
    p[3] = p[3].clamp(-bounds.log_scale_abs_max, bounds.log_scale_abs_max);
    p
}
