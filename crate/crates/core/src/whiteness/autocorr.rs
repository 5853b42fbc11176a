use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Lag count used by the whiteness cost and reports unless configured.
pub const DEFAULT_MAX_LAG: usize = 10;

/// Smallest eigenvalue of the lag-0 covariance treated as non-degenerate.
const DEGENERATE_VARIANCE: f64 = 1e-14;

/// Time-ordered innovation vectors of a common dimension, stored flat.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InnovationsLog {
    dim: usize,
    data: Vec<f64>,
}

impl InnovationsLog {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "innovation dimension must be positive");
        Self { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        Self { dim, data: Vec::with_capacity(dim * capacity) }
    }

    pub fn from_scalars(values: impl IntoIterator<Item = f64>) -> Self {
        Self { dim: 1, data: values.into_iter().collect() }
    }

    pub fn push(&mut self, z: &DVector<f64>) {
        assert_eq!(z.len(), self.dim, "innovation dimension changed");
        self.data.extend_from_slice(z.as_slice());
    }

    pub fn push_scalar(&mut self, z: f64) {
        assert_eq!(self.dim, 1);
        self.data.push(z);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Flat sample storage; for scalar logs this is the series itself.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Samples from index `start` on.
    pub fn tail(&self, start: usize) -> Self {
        let start = start.min(self.len());
        Self { dim: self.dim, data: self.data[start * self.dim..].to_vec() }
    }

    fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for k in 0..self.len() {
            for (m, v) in mean.iter_mut().zip(self.sample(k)) {
                *m += v;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutocorrOptions {
    pub remove_mean: bool,
}

impl Default for AutocorrOptions {
    fn default() -> Self {
        Self { remove_mean: true }
    }
}

/// Biased sample autocovariances `Γ̂(ℓ)`, `ℓ = 0..=L`, and their normalized form.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrEstimate {
    pub samples: usize,
    pub lag0: DMatrix<f64>,
    /// `lags[ℓ - 1] = Γ̂(ℓ)`
    pub lags: Vec<DMatrix<f64>>,
    /// `D^{-1/2} Γ̂(ℓ) D^{-1/2}` with `D = diag Γ̂(0)`; zero when degenerate.
    pub normalized: Vec<DMatrix<f64>>,
    /// Lag-0 covariance had an eigenvalue below `1e-14`.
    pub degenerate: bool,
}

impl AutocorrEstimate {
    pub fn max_lag(&self) -> usize {
        self.lags.len()
    }

    /// Normalized scalar autocorrelation at `lag` (first diagonal entry).
    pub fn rho(&self, lag: usize) -> f64 {
        self.normalized[lag - 1][(0, 0)]
    }

    /// `Σ_{ℓ ∈ lags} ‖normalized(ℓ)‖²_F`; infinite for a degenerate sequence.
    pub fn cost(&self, lags: &[usize]) -> Result<f64> {
        if let Some(&bad) = lags.iter().find(|&&l| l == 0 || l > self.max_lag()) {
            return Err(Error::InvalidParameter(format!(
                "lag {bad} outside 1..={}",
                self.max_lag()
            )));
        }
        if lags.is_empty() {
            return Ok(0.0);
        }
        if self.degenerate {
            return Ok(f64::INFINITY);
        }
        Ok(lags.iter().map(|&l| self.normalized[l - 1].norm_squared()).sum())
    }

    /// Number of lags `1..=L` whose normalized value lies within `±bound`.
    pub fn lags_within(&self, bound: f64) -> usize {
        self.normalized.iter().filter(|g| g.abs().max() <= bound).count()
    }
}

/// Cross-covariance at signed lag: `(1/N) Σ_k (z_k - z̄)(z_{k-ℓ} - z̄)ᵀ`.
///
/// Negative lags pair each sample with a later one, so
/// `lagged_covariance(ℓ) = lagged_covariance(-ℓ)ᵀ`.
pub fn lagged_covariance(log: &InnovationsLog, lag: isize, remove_mean: bool) -> Result<DMatrix<f64>> {
    let n = log.len();
    let shift = lag.unsigned_abs();
    if shift >= n {
        return Err(Error::InsufficientData(format!(
            "{n} samples for lag {lag}"
        )));
    }
    let m = log.dim();
    let mean = if remove_mean { log.mean() } else { vec![0.0; m] };
    let mut acc = DMatrix::<f64>::zeros(m, m);
    for k in shift..n {
        let (lead, trail) = if lag >= 0 { (k, k - shift) } else { (k - shift, k) };
        let a = log.sample(lead);
        let b = log.sample(trail);
        for i in 0..m {
            for j in 0..m {
                acc[(i, j)] += (a[i] - mean[i]) * (b[j] - mean[j]);
            }
        }
    }
    Ok(acc / n as f64)
}

pub fn empirical_autocorrelation(log: &InnovationsLog, max_lag: usize) -> Result<AutocorrEstimate> {
    empirical_autocorrelation_with(log, max_lag, AutocorrOptions::default())
}

pub fn empirical_autocorrelation_with(
    log: &InnovationsLog,
    max_lag: usize,
    opts: AutocorrOptions,
) -> Result<AutocorrEstimate> {
    let n = log.len();
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    if n <= max_lag {
        return Err(Error::InsufficientData(format!(
            "{n} samples for max lag {max_lag}"
        )));
    }
    if log.dim() == 1 {
        return Ok(scalar_autocorrelation(log.as_slice(), max_lag, opts));
    }
    let lag0 = lagged_covariance(log, 0, opts.remove_mean)?;
    let lags = (1..=max_lag)
        .map(|l| lagged_covariance(log, l as isize, opts.remove_mean))
        .collect::<Result<Vec<_>>>()?;
    let degenerate = lag0.clone().symmetric_eigenvalues().min() < DEGENERATE_VARIANCE;
    let normalized = if degenerate {
        lags.iter().map(|g| DMatrix::zeros(g.nrows(), g.ncols())).collect()
    } else {
        let inv_sd = lag0.diagonal().map(|d| 1.0 / d.sqrt());
        let scale = DMatrix::from_diagonal(&inv_sd);
        lags.iter().map(|g| &scale * g * &scale).collect()
    };
    Ok(AutocorrEstimate { samples: n, lag0, lags, normalized, degenerate })
}

fn scalar_autocorrelation(z: &[f64], max_lag: usize, opts: AutocorrOptions) -> AutocorrEstimate {
    let n = z.len();
    let mean = if opts.remove_mean { z.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let centered: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let gamma = |lag: usize| -> f64 {
        centered[lag..].iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let g0 = gamma(0);
    let degenerate = g0 < DEGENERATE_VARIANCE;
    let lags: Vec<f64> = (1..=max_lag).map(gamma).collect();
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    AutocorrEstimate {
        samples: n,
        lag0: one(g0),
        normalized: lags.iter().map(|&g| one(if degenerate { 0.0 } else { g / g0 })).collect(),
        lags: lags.into_iter().map(one).collect(),
        degenerate,
    }
}

/// Whiteness cost over the given lags.
pub fn whiteness_cost(log: &InnovationsLog, lags: &[usize]) -> Result<f64> {
    let Some(&max_lag) = lags.iter().max() else {
        return Ok(0.0);
    };
    empirical_autocorrelation(log, max_lag)?.cost(lags)
}

/// Two-sided Bartlett band `q / sqrt(N)` for the autocorrelation of a white
/// sequence, with `q` the standard normal quantile at `confidence`.
pub fn whiteness_bound(samples: usize, confidence: f64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InsufficientData("whiteness bound of an empty sequence".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let normal = Normal::standard();
    let q = normal.inverse_cdf(0.5 + confidence / 2.0);
    Ok(q / (samples as f64).sqrt())
}
