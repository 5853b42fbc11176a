//! The damped-pendulum comparison of the plain, perfectly augmented and
//! adaptive filters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_colored_noise, rmse, simulate_truth, stream_rng, total_rmse, Stream, Truth};
use crate::error::{Error, Result};
use crate::iwakf::{AdaptationConfig, AdaptationState, Iwakf, TraceRow};
use crate::kalman::{kf_step, FilterState};
use crate::model::{augment, discretize_pendulum, ColoringFilter, LtiSystem, MatrixConvention, PendulumParams};
use crate::whiteness::{empirical_autocorrelation, whiteness_bound, InnovationsLog};

/// Which coloring filter shapes the true process noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FilterSpec {
    /// Poles `0.8 e^{±j100°}`, zero at 3.
    Sf1,
    /// Poles `0.8 e^{±j130°}`, zero at 3.
    Sf2,
    /// Poles `0.8 e^{±j145°}`, zero at 3.
    Sf3,
    /// Pure delay: white process noise.
    White,
    Custom { gamma: [f64; 4] },
}

impl FilterSpec {
    pub fn build(&self) -> Result<ColoringFilter> {
        match *self {
            FilterSpec::Sf1 => ColoringFilter::from_poles_zero(0.8, 100.0, 3.0, 1.0),
            FilterSpec::Sf2 => ColoringFilter::from_poles_zero(0.8, 130.0, 3.0, 1.0),
            FilterSpec::Sf3 => ColoringFilter::from_poles_zero(0.8, 145.0, 3.0, 1.0),
            FilterSpec::White => Ok(ColoringFilter::white()),
            FilterSpec::Custom { gamma: [g0, g1, g2, g3] } => ColoringFilter::new(g0, g1, g2, g3),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::Sf1 => "sf1",
            FilterSpec::Sf2 => "sf2",
            FilterSpec::Sf3 => "sf3",
            FilterSpec::White => "white",
            FilterSpec::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub pendulum: PendulumParams,
    pub matrix_convention: MatrixConvention,
    pub filter: FilterSpec,
    /// Stationary variance of the true colored process noise.
    pub sigma_v_sq: f64,
    /// Measurement-noise variance.
    pub r: f64,
    pub steps: usize,
    pub seed: u64,
    pub trials: usize,
    /// Leading steps excluded from RMSE and autocorrelation metrics, capped
    /// at half the run (see [`ExperimentConfig::effective_burn_in`]).
    pub burn_in: usize,
    pub max_lag: usize,
    pub confidence: f64,
    /// The adaptive filter's innovations from this fraction of the run on
    /// are scored as post-convergence.
    pub convergence_fraction: f64,
    pub adaptation: AdaptationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pendulum: PendulumParams::default(),
            matrix_convention: MatrixConvention::Paper,
            filter: FilterSpec::Sf1,
            sigma_v_sq: 1.0,
            r: 0.01,
            steps: 20_000,
            seed: 42,
            trials: 20,
            burn_in: 500,
            max_lag: 10,
            confidence: 0.95,
            convergence_fraction: 0.5,
            adaptation: AdaptationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.sigma_v_sq > 0.0) || !(self.r > 0.0) {
            return bad("sigma_v_sq and r must be positive".into());
        }
        if self.max_lag == 0 {
            return bad("max_lag must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.convergence_fraction) {
            return bad("convergence_fraction must lie in [0, 1)".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)".into());
        }
        self.adaptation.validate()?;
        let post = self.steps - self.post_convergence_start();
        if post <= self.max_lag || self.steps - self.effective_burn_in() <= self.max_lag {
            return bad("too few steps for the requested lags".into());
        }
        self.filter.build()?;
        Ok(())
    }

    pub fn system(&self) -> Result<LtiSystem> {
        discretize_pendulum(&self.pendulum, self.matrix_convention)
    }

    /// `burn_in`, but never more than half the run so short runs still
    /// have data to score.
    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.min(self.steps / 2)
    }

    /// First step at which the adaptive filter's innovations are scored.
    pub fn post_convergence_start(&self) -> usize {
        ((self.steps as f64 * self.convergence_fraction) as usize).max(self.effective_burn_in())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Plain filter with variance-matched white process noise.
    Kf,
    /// Filter augmented with the true coloring filter.
    Aug,
    Iwakf,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Kf, Estimator::Aug, Estimator::Iwakf];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Kf => "kf",
            Estimator::Aug => "aug",
            Estimator::Iwakf => "iwakf",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Metrics and logs of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// Per-state RMSE of each estimator, indexed by [`Estimator`].
    pub rmse: [DVector<f64>; 3],
    /// `sqrt(Σ_i rmse_i²)` of each estimator.
    pub total_rmse: [f64; 3],
    pub pr_aug: f64,
    pub pr_iwakf: f64,
    pub innovations: [InnovationsLog; 3],
    pub trace: Vec<TraceRow>,
    pub final_gamma: [f64; 4],
}

impl TrialResult {
    pub fn innovations(&self, est: Estimator) -> &InnovationsLog {
        &self.innovations[est.index()]
    }

    pub fn rmse_of(&self, est: Estimator) -> &DVector<f64> {
        &self.rmse[est.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrSummary {
    pub mean_pr_aug: f64,
    pub std_pr_aug: f64,
    pub mean_pr_iwakf: f64,
    pub std_pr_iwakf: f64,
    /// Trial-mean total RMSE per estimator.
    pub mean_total_rmse: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub summary: PrSummary,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Posterior plant-state errors and innovations of one estimator on one
/// truth realization.
#[derive(Debug, Clone)]
pub struct EstimatorRun {
    pub errors: Vec<DVector<f64>>,
    pub innovations: InnovationsLog,
    /// Final state of the adaptive filter; `None` for the fixed filters.
    pub adaptation: Option<AdaptationState>,
}

/// Truth realization of trial `trial`.
pub fn trial_truth(config: &ExperimentConfig, trial: usize) -> Result<Truth> {
    let system = config.system()?;
    let true_filter = config.filter.build()?;
    let q_w = true_filter.driving_variance(config.sigma_v_sq);
    let mut rng = stream_rng(config.seed, trial as u64, Stream::ProcessNoise);
    let v = generate_colored_noise(&true_filter, q_w, config.steps, &mut rng);
    let mut rng = stream_rng(config.seed, trial as u64, Stream::MeasurementNoise);
    simulate_truth(&system, &v, &DMatrix::from_element(1, 1, config.r), &mut rng)
}

/// Runs one estimator over `truth`.
///
/// The plain filter uses `Q = σ_v² B Bᵀ` (white noise with the stationary
/// variance of `v`), the augmented filter the true coloring filter, and the
/// adaptive filter only `σ_v²` and `R`.
pub fn run_estimator(config: &ExperimentConfig, truth: &Truth, est: Estimator) -> Result<EstimatorRun> {
    let system = config.system()?;
    let n = system.n();
    match est {
        Estimator::Kf => {
            let q = system.input_covariance(&DMatrix::from_element(1, 1, config.sigma_v_sq));
            run_fixed_filter(&system, &q, config.r, truth, n)
        }
        Estimator::Aug => {
            let true_filter = config.filter.build()?;
            let q_w = true_filter.driving_variance(config.sigma_v_sq);
            let aug = augment(&system, &true_filter)?;
            run_fixed_filter(aug.system(), &aug.process_covariance(q_w), config.r, truth, n)
        }
        Estimator::Iwakf => {
            let mut adaptive = Iwakf::new(system, config.sigma_v_sq, config.r, config.adaptation.clone())?;
            let mut errors = Vec::with_capacity(truth.y.len());
            let mut innovations = InnovationsLog::with_capacity(1, truth.y.len());
            for (x, y) in truth.x.iter().zip(&truth.y) {
                let rec = adaptive.adapt_step(y[0])?;
                errors.push(x - adaptive.state().plant_estimate());
                innovations.push(&rec.z);
            }
            Ok(EstimatorRun { errors, innovations, adaptation: Some(adaptive.state().clone()) })
        }
    }
}

fn run_fixed_filter(system: &LtiSystem, q_effective: &DMatrix<f64>, r: f64, truth: &Truth, plant_dim: usize) -> Result<EstimatorRun> {
    let r = DMatrix::from_element(1, 1, r);
    let mut state = FilterState::diffuse(system.n());
    let mut errors = Vec::with_capacity(truth.y.len());
    let mut innovations = InnovationsLog::with_capacity(1, truth.y.len());
    for (x, y) in truth.x.iter().zip(&truth.y) {
        let (next, rec) = kf_step(&state, system, q_effective, &r, None, y)?;
        errors.push(x - next.x.rows(0, plant_dim));
        innovations.push(&rec.z);
        state = next;
    }
    Ok(EstimatorRun { errors, innovations, adaptation: None })
}

/// Runs trial `trial` of the experiment: one shared truth realization, all
/// three estimators.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let truth = trial_truth(config, trial)?;
    let [kf, aug, iw] = Estimator::ALL.map(|est| run_estimator(config, &truth, est));
    let (kf, aug, mut iw) = (kf?, aug?, iw?);
    let rmse_all = [
        rmse(&kf.errors, config.effective_burn_in())?,
        rmse(&aug.errors, config.effective_burn_in())?,
        rmse(&iw.errors, config.effective_burn_in())?,
    ];
    let totals = [total_rmse(&rmse_all[0]), total_rmse(&rmse_all[1]), total_rmse(&rmse_all[2])];
    let adaptation = iw.adaptation.take().expect("adaptive run keeps its state");
    Ok(TrialResult {
        trial,
        pr_aug: totals[1] / totals[0],
        pr_iwakf: totals[2] / totals[0],
        rmse: rmse_all,
        total_rmse: totals,
        innovations: [kf.innovations, aug.innovations, iw.innovations],
        final_gamma: adaptation.filter().gamma(),
        trace: adaptation.trace,
    })
}

/// Runs every trial (in parallel) and aggregates performance ratios.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<Vec<_>>>()?;
    let (mean_pr_aug, std_pr_aug) = mean_std(trials.iter().map(|t| t.pr_aug));
    let (mean_pr_iwakf, std_pr_iwakf) = mean_std(trials.iter().map(|t| t.pr_iwakf));
    let mut mean_total_rmse = [0.0; 3];
    for (i, slot) in mean_total_rmse.iter_mut().enumerate() {
        *slot = mean_std(trials.iter().map(|t| t.total_rmse[i])).0;
    }
    Ok(ExperimentResult {
        config: config.clone(),
        trials,
        summary: PrSummary { mean_pr_aug, std_pr_aug, mean_pr_iwakf, std_pr_iwakf, mean_total_rmse },
    })
}

/// Normalized innovation autocorrelation of one estimator in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrReport {
    pub estimator: Estimator,
    pub trial: usize,
    pub samples: usize,
    /// `normalized[ℓ - 1]`, `ℓ = 1..=max_lag`
    pub normalized: Vec<f64>,
    pub bound: f64,
    pub within: usize,
}

impl AutocorrReport {
    pub fn lag1_excess(&self) -> f64 {
        self.normalized[0].abs() / self.bound
    }
}

/// Autocorrelation summaries for every trial and estimator. The plain and
/// augmented filters are scored after the burn-in; the adaptive filter from
/// the post-convergence point.
pub fn autocorr_report(result: &ExperimentResult) -> Result<Vec<AutocorrReport>> {
    let cfg = &result.config;
    let mut out = Vec::with_capacity(result.trials.len() * 3);
    for trial in &result.trials {
        for est in Estimator::ALL {
            let start = match est {
                Estimator::Iwakf => cfg.post_convergence_start(),
                _ => cfg.effective_burn_in(),
            };
            let log = trial.innovations(est).tail(start);
            let ac = empirical_autocorrelation(&log, cfg.max_lag)?;
            let bound = whiteness_bound(log.len(), cfg.confidence)?;
            out.push(AutocorrReport {
                estimator: est,
                trial: trial.trial,
                samples: log.len(),
                normalized: (1..=cfg.max_lag).map(|l| ac.rho(l)).collect(),
                bound,
                within: ac.lags_within(bound),
            });
        }
    }
    Ok(out)
}
