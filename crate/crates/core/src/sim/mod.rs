//! Truth-model simulation with colored process noise and estimation metrics.

mod experiment;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use experiment::{
    autocorr_report, run_estimator, run_experiment, run_trial, trial_truth, AutocorrReport, Estimator,
    EstimatorRun, ExperimentConfig, ExperimentResult, FilterSpec, PrSummary, TrialResult,
};

use crate::error::{Error, Result};
use crate::model::{ColoringFilter, LtiSystem};

/// Independent random sub-streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ProcessNoise = 0,
    MeasurementNoise = 1,
}

/// Deterministic generator for `(seed, trial, stream)`.
pub fn stream_rng(seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial * 8 + stream as u64);
    rng
}

/// Factor `L` with `L Lᵀ = cov` for a symmetric positive semidefinite `cov`.
fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = cov.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Colored noise `v_k = C_H X_k`, `X_{k+1} = A_H X_k + B_H w_k`, with
/// `w_k ~ N(0, q_w)` and `X_0` drawn from the stationary distribution.
pub fn generate_colored_noise(filter: &ColoringFilter, q_w: f64, steps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let h = filter.realization();
    let factor = psd_factor(&(filter.unit_state_covariance() * q_w));
    let mut state = &factor * normal_vector(rng, 2);
    let sd = q_w.max(0.0).sqrt();
    let (a, b, c) = (&h.a, &h.b, &h.c);
    let mut v = Vec::with_capacity(steps);
    for _ in 0..steps {
        v.push(c[(0, 0)] * state[0] + c[(0, 1)] * state[1]);
        let w: f64 = StandardNormal.sample(rng);
        let w = w * sd;
        let s0 = a[(0, 0)] * state[0] + a[(0, 1)] * state[1] + b[(0, 0)] * w;
        let s1 = a[(1, 0)] * state[0] + a[(1, 1)] * state[1] + b[(1, 0)] * w;
        state[0] = s0;
        state[1] = s1;
    }
    v
}

/// Simulated plant trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// `x_1 ..= x_N`
    pub x: Vec<DVector<f64>>,
    /// `y_1 ..= y_N`
    pub y: Vec<DVector<f64>>,
}

/// Propagates `x_k = A x_{k-1} + B v_{k-1}` from `x_0 = 0` and measures
/// `y_k = C x_k + n_k` with `n_k ~ N(0, R)`, for `k = 1..=v.len()`.
pub fn simulate_truth(system: &LtiSystem, v: &[f64], r: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<Truth> {
    if system.l() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "scalar process-noise sequence for a plant with l = {}",
            system.l()
        )));
    }
    let m = system.m();
    if r.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("R is {:?}, expected {m}×{m}", r.shape())));
    }
    let factor = psd_factor(r);
    let b = system.b().column(0).into_owned();
    let mut x = DVector::zeros(system.n());
    let mut truth = Truth { x: Vec::with_capacity(v.len()), y: Vec::with_capacity(v.len()) };
    for &vk in v {
        x = system.a() * &x + &b * vk;
        let y = system.c() * &x + &factor * normal_vector(rng, m);
        truth.x.push(x.clone());
        truth.y.push(y);
    }
    Ok(truth)
}

/// Per-component root-mean-square of `errors[burn_in..]`.
pub fn rmse(errors: &[DVector<f64>], burn_in: usize) -> Result<DVector<f64>> {
    let used = errors.get(burn_in..).filter(|e| !e.is_empty()).ok_or_else(|| {
        Error::InsufficientData(format!("{} errors with burn-in {burn_in}", errors.len()))
    })?;
    let mut acc = DVector::zeros(used[0].len());
    for e in used {
        acc += e.component_mul(e);
    }
    Ok((acc / used.len() as f64).map(f64::sqrt))
}

/// Root-mean-square of the error norm: `sqrt(Σ rmse_i²)`.
pub fn total_rmse(per_state: &DVector<f64>) -> f64 {
    per_state.norm()
}
