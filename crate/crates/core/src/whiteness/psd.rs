use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{spectral_radius, ColoringFilter, LtiSystem};

/// Smallest singular value of the noise transfer accepted by [`recover_phi_v`].
const RANK_TOL: f64 = 1e-8;

/// Power spectral density on a grid of normalized frequencies in `[0, π]`.
///
/// Values follow the two-sided convention `Φ(φ) = Σ_ℓ Γ(ℓ) e^{-jφℓ}`, so a
/// white sequence of variance `σ²` has a flat level `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCurve {
    pub frequencies: Vec<f64>,
    pub values: Vec<DMatrix<Complex64>>,
}

impl PsdCurve {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Real part of the trace at each frequency (the PSD itself in the scalar case).
    pub fn levels(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.trace().re).collect()
    }

    /// `max / min` of [`levels`](Self::levels); 1 for a perfectly flat spectrum.
    pub fn flatness_ratio(&self) -> f64 {
        let levels = self.levels();
        let max = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = levels.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Root-mean-square of the relative deviation `(self - reference) / reference`.
    pub fn relative_rms_deviation(&self, reference: &PsdCurve) -> f64 {
        let a = self.levels();
        let b = reference.levels();
        assert_eq!(a.len(), b.len(), "grids differ");
        let sum: f64 = a.iter().zip(&b).map(|(x, r)| ((x - r) / r).powi(2)).sum();
        (sum / a.len() as f64).sqrt()
    }

    /// Root-mean-square of the Frobenius distance between matrices.
    pub fn rms_distance(&self, other: &PsdCurve) -> f64 {
        assert_eq!(self.len(), other.len(), "grids differ");
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        (sum / self.len() as f64).sqrt()
    }

    /// Every value is Hermitian and positive semidefinite to `tol`.
    pub fn is_hermitian_psd(&self, tol: f64) -> bool {
        self.values.iter().all(|v| {
            let herm = (v - v.adjoint()).norm() <= tol * (1.0 + v.norm());
            let sym = (v + v.adjoint()) * Complex64::from(0.5);
            herm && sym.symmetric_eigenvalues().iter().all(|&e| e >= -tol)
        })
    }
}

/// `points` frequencies evenly spaced over `[0, π]`, both ends included.
pub fn frequency_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "grid needs at least two points");
    (0..points)
        .map(|i| std::f64::consts::PI * i as f64 / (points - 1) as f64)
        .collect()
}

/// Process-noise spectrum feeding the plant input channel.
#[derive(Debug, Clone)]
pub enum NoiseSpectrum {
    /// White noise with covariance `Q` (l×l).
    Constant(DMatrix<f64>),
    /// Output of a coloring filter driven by white noise of variance `q_w`.
    Colored { filter: ColoringFilter, q_w: f64 },
    /// Tabulated on the same grid as the evaluation.
    Sampled(PsdCurve),
}

impl NoiseSpectrum {
    fn at(&self, index: usize, phi: f64) -> Result<DMatrix<Complex64>> {
        match self {
            NoiseSpectrum::Constant(q) => Ok(q.map(Complex64::from)),
            NoiseSpectrum::Colored { filter, q_w } => {
                let h = filter.evaluate(Complex64::from_polar(1.0, phi))?;
                Ok(DMatrix::from_element(1, 1, Complex64::from(q_w * h.norm_sqr())))
            }
            NoiseSpectrum::Sampled(curve) => {
                let f = curve.frequencies.get(index).copied().unwrap_or(f64::NAN);
                if (f - phi).abs() > 1e-12 {
                    return Err(Error::DimensionMismatch(
                        "sampled noise spectrum is on a different grid".into(),
                    ));
                }
                Ok(curve.values[index].clone())
            }
        }
    }
}

/// Transfer operators of the steady-state innovation at `e^{jφ}`.
///
/// Returns `(I - G, H)` with `G = C (zI - F)⁻¹ A K` mapping the measurement
/// noise and `H = C (zI - F)⁻¹ B z` mapping the process noise.
fn innovation_transfers(
    system: &LtiSystem,
    k: &DMatrix<f64>,
    f: &DMatrix<f64>,
    phi: f64,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = system.n();
    let m = system.m();
    let z = Complex64::from_polar(1.0, phi);
    let resolvent = DMatrix::<Complex64>::identity(n, n) * z - f.map(Complex64::from);
    let lu = resolvent.lu();
    let c = system.c().map(Complex64::from);
    let ak = (system.a() * k).map(Complex64::from);
    let b = system.b().map(Complex64::from);
    let singular = || Error::UnstableClosedLoop { radius: 1.0 };
    let g = &c * lu.solve(&ak).ok_or_else(singular)?;
    let h = &c * lu.solve(&b).ok_or_else(singular)? * z;
    Ok((DMatrix::identity(m, m) - g, h))
}

fn check_closed_loop(f: &DMatrix<f64>) -> Result<()> {
    let radius = spectral_radius(f);
    if radius >= 1.0 {
        return Err(Error::UnstableClosedLoop { radius });
    }
    Ok(())
}

/// Steady-state innovation spectrum
/// `Φ_z = (I - G) R (I - G)* + H Φ_v H*` on `grid`.
///
/// `k` and `f = A (I - K C)` are the fixed gain and error-propagation
/// matrix the filter runs with; `phi_v` is the spectrum actually driving
/// the plant input `B`.
pub fn innovations_psd_theoretical(
    system: &LtiSystem,
    k: &DMatrix<f64>,
    f: &DMatrix<f64>,
    r: &DMatrix<f64>,
    phi_v: &NoiseSpectrum,
    grid: &[f64],
) -> Result<PsdCurve> {
    check_closed_loop(f)?;
    let r = r.map(Complex64::from);
    let values = grid
        .iter()
        .enumerate()
        .map(|(i, &phi)| {
            let (ig, h) = innovation_transfers(system, k, f, phi)?;
            let pv = phi_v.at(i, phi)?;
            if pv.shape() != (h.ncols(), h.ncols()) {
                return Err(Error::DimensionMismatch(format!(
                    "process-noise spectrum is {:?}, input channel has {} entries",
                    pv.shape(),
                    h.ncols()
                )));
            }
            Ok(&ig * &r * ig.adjoint() + &h * pv * h.adjoint())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PsdCurve { frequencies: grid.to_vec(), values })
}

/// Reconstructs the process-noise spectrum from an innovation spectrum:
/// `Φ_v = H† (Φ_z - (I - G) R (I - G)*) H†*`.
pub fn recover_phi_v(
    phi_z: &PsdCurve,
    system: &LtiSystem,
    k: &DMatrix<f64>,
    f: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<PsdCurve> {
    check_closed_loop(f)?;
    let r = r.map(Complex64::from);
    let values = phi_z
        .frequencies
        .iter()
        .zip(&phi_z.values)
        .map(|(&phi, pz)| {
            let (ig, h) = innovation_transfers(system, k, f, phi)?;
            let svd = h.clone().svd(true, true);
            let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
            if smallest < RANK_TOL || h.ncols() > h.nrows() {
                return Err(Error::RankDeficient { singular_value: smallest });
            }
            let pinv = svd
                .pseudo_inverse(RANK_TOL)
                .map_err(|_| Error::RankDeficient { singular_value: smallest })?;
            let residual = pz - &ig * &r * ig.adjoint();
            Ok(&pinv * residual * pinv.adjoint())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PsdCurve { frequencies: phi_z.frequencies.clone(), values })
}

/// Welch estimate of a scalar series: Hann-windowed segments with the given
/// fractional overlap, one-sided grid `φ_k = 2πk / segment_length`.
pub fn welch_psd(series: &[f64], segment_length: usize, overlap: f64) -> Result<PsdCurve> {
    if segment_length < 2 {
        return Err(Error::InvalidParameter("segment length must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    if series.len() < 2 * segment_length {
        return Err(Error::InsufficientData(format!(
            "{} samples for segments of {segment_length}",
            series.len()
        )));
    }
    let step = ((segment_length as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window: Vec<f64> = (0..segment_length)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / segment_length as f64).cos()))
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_length);
    let bins = segment_length / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::default(); segment_length];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_length <= series.len() {
        for (b, (x, w)) in buf.iter_mut().zip(series[start..].iter().zip(&window)) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let norm = 1.0 / (segments as f64 * window_energy);
    Ok(PsdCurve {
        frequencies: (0..bins)
            .map(|k| std::f64::consts::TAU * k as f64 / segment_length as f64)
            .collect(),
        values: acc
            .into_iter()
            .map(|p| DMatrix::from_element(1, 1, Complex64::from(p * norm)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::steady_state;
    use crate::model::{discretize_pendulum, MatrixConvention, PendulumParams};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn pendulum() -> LtiSystem {
        discretize_pendulum(&PendulumParams::default(), MatrixConvention::Paper).unwrap()
    }

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn optimal_filter_innovations_are_flat() {
        let sys = pendulum();
        let q = m1(1.0);
        let r = m1(0.01);
        let ss = steady_state(&sys, &sys.input_covariance(&q), &r).unwrap();
        let grid = frequency_grid(256);
        let psd = innovations_psd_theoretical(&sys, &ss.k, &ss.f, &r, &NoiseSpectrum::Constant(q), &grid).unwrap();
        assert!(psd.flatness_ratio() < 1.0 + 1e-9, "ratio {}", psd.flatness_ratio());
        // flat level equals the steady-state innovation variance
        assert_abs_diff_eq!(psd.levels()[0], ss.s[(0, 0)], epsilon = 1e-9);
        assert!(psd.is_hermitian_psd(1e-9));
    }

    #[test]
    fn pure_measurement_noise() {
        let sys = pendulum();
        let k = DMatrix::zeros(2, 1);
        let f = sys.a() * 0.5; // any stable F with K = 0 leaves only R
        let psd = innovations_psd_theoretical(
            &sys,
            &k,
            &f,
            &m1(0.3),
            &NoiseSpectrum::Constant(m1(0.0)),
            &frequency_grid(16),
        )
        .unwrap();
        for l in psd.levels() {
            assert_abs_diff_eq!(l, 0.3, epsilon = 1e-15);
        }
    }

    #[test]
    fn unstable_closed_loop_rejected() {
        let sys = pendulum();
        let f = DMatrix::identity(2, 2) * 1.1;
        let err = innovations_psd_theoretical(
            &sys,
            &DMatrix::zeros(2, 1),
            &f,
            &m1(1.0),
            &NoiseSpectrum::Constant(m1(1.0)),
            &frequency_grid(4),
        );
        assert!(matches!(err, Err(Error::UnstableClosedLoop { .. })));
    }

    #[test]
    fn colored_round_trip() {
        let sys = pendulum();
        let r = m1(0.01);
        let ss = steady_state(&sys, &sys.input_covariance(&m1(1.0)), &r).unwrap();
        let filter = ColoringFilter::from_poles_zero(0.8, 100.0, 3.0, 1.0).unwrap();
        let spectrum = NoiseSpectrum::Colored { q_w: filter.driving_variance(1.0), filter };
        let grid = frequency_grid(256);
        let pz = innovations_psd_theoretical(&sys, &ss.k, &ss.f, &r, &spectrum, &grid).unwrap();
        assert!(pz.flatness_ratio() > 1.5);
        let pv = recover_phi_v(&pz, &sys, &ss.k, &ss.f, &r).unwrap();
        let NoiseSpectrum::Colored { filter, q_w } = &spectrum else { unreachable!() };
        for (phi, v) in grid.iter().zip(&pv.values) {
            assert_abs_diff_eq!(v[(0, 0)].re, filter.output_psd(*phi, *q_w), epsilon = 1e-8);
        }
    }

    #[test]
    fn scalar_single_frequency_by_hand() {
        // x_k = a x_{k-1} + v_{k-1}, y = x + n, fixed gain k
        let (a, kg, r, q) = (0.7, 0.4, 0.5, 2.0);
        let sys = LtiSystem::new(m1(a), m1(1.0), m1(1.0)).unwrap();
        let f = m1(a * (1.0 - kg));
        let phi = 0.9;
        let z = Complex64::from_polar(1.0, phi);
        let inv = 1.0 / (z - a * (1.0 - kg));
        let one_minus_g = 1.0 - inv * a * kg;
        let h = inv * z;
        let expected = one_minus_g.norm_sqr() * r + h.norm_sqr() * q;
        let psd = innovations_psd_theoretical(&sys, &m1(kg), &f, &m1(r), &NoiseSpectrum::Constant(m1(q)), &[phi]).unwrap();
        assert_abs_diff_eq!(psd.levels()[0], expected, epsilon = 1e-12);
        let back = recover_phi_v(&psd, &sys, &m1(kg), &f, &m1(r)).unwrap();
        assert_abs_diff_eq!(back.levels()[0], q, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_noise_transfer() {
        // B = 0: process noise never reaches the innovations
        let sys = LtiSystem::new(m1(0.5), m1(0.0), m1(1.0)).unwrap();
        let pz = PsdCurve { frequencies: vec![0.3], values: vec![DMatrix::from_element(1, 1, Complex64::from(1.0))] };
        assert!(matches!(
            recover_phi_v(&pz, &sys, &m1(0.2), &m1(0.4), &m1(1.0)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn welch_white_noise_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let psd = welch_psd(&x, 256, 0.5).unwrap();
        let levels = psd.levels();
        let mean = levels.iter().sum::<f64>() / levels.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean level {mean}");
    }

    #[test]
    fn welch_sinusoid_peak() {
        let bin = 40;
        let seg = 256;
        let omega = std::f64::consts::TAU * bin as f64 / seg as f64;
        let x: Vec<f64> = (0..4096).map(|k| (omega * k as f64).sin()).collect();
        let psd = welch_psd(&x, seg, 0.5).unwrap();
        let levels = psd.levels();
        let peak = (0..levels.len()).max_by(|&a, &b| levels[a].total_cmp(&levels[b])).unwrap();
        assert_eq!(peak, bin);
        assert_abs_diff_eq!(psd.frequencies[peak], omega, epsilon = 1e-12);
    }

    #[test]
    fn welch_needs_two_segments() {
        assert!(matches!(welch_psd(&[0.0; 300], 256, 0.5), Err(Error::InsufficientData(_))));
    }
}
