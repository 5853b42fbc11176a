//! Innovations-whitening adaptive Kalman filter.
//!
//! The filter runs a Kalman filter on the plant augmented with a candidate
//! coloring filter. Every `reopt_period` steps it replays the augmented
//! filter over the most recent window of measurements for many candidate
//! filters, scores each by the whiteness cost of the replayed innovations,
//! and swaps in the best candidate if it beats the current filter on the
//! same window.

mod nelder_mead;
mod params;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use nelder_mead::{minimize, Minimum, SimplexOptions};
pub use params::{project_to_stable, Bounds, Parameterization, SEARCH_DIM};

use crate::error::{Error, Result};
use crate::kalman::{kf_step, FilterState, ScalarKf, StepRecord, DEFAULT_PRIOR_SCALE};
use crate::model::{augment, AugmentedSystem, ColoringFilter, LtiSystem};
use crate::whiteness::InnovationsLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_evals: usize,
    /// Multiplies the per-coordinate initial simplex steps.
    pub simplex_init_scale: f64,
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_evals: 160, simplex_init_scale: 1.0, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptationConfig {
    /// Capacity of the measurement buffer replayed by the objective.
    pub window_length: usize,
    /// Buffer length at which re-optimization starts. Until the buffer is
    /// full the objective replays everything collected so far.
    pub min_window: usize,
    pub lag_count: usize,
    pub reopt_period: usize,
    /// Leading fraction of each replay window excluded from the cost.
    pub burn_in_fraction: f64,
    pub optimizer: OptimizerConfig,
    pub parameterization: Parameterization,
    pub bounds: Bounds,
    /// Starting search point (in `parameterization` coordinates).
    pub initial: [f64; SEARCH_DIM],
    /// Also search from `initial` at every re-optimization, not only from
    /// the incumbent, and keep the better result.
    pub restart_from_initial: bool,
    pub swap: SwapPolicy,
}

/// How the running estimate is re-initialized when a new filter is accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapPolicy {
    /// Keep the plant block, zero the filter states and reset their
    /// covariance to `10 I` with zero cross-covariance.
    Reset,
    /// Take the state and covariance reached by the new filter's replay of
    /// the window.
    #[default]
    Replay,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            window_length: 10000,
            min_window: 1000,
            lag_count: 10,
            reopt_period: 1000,
            burn_in_fraction: 0.2,
            optimizer: OptimizerConfig::default(),
            parameterization: Parameterization::PoleZero,
            bounds: Bounds::default(),
            initial: [0.5, 90.0, 0.0, 0.0],
            restart_from_initial: true,
            swap: SwapPolicy::Replay,
        }
    }
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.lag_count == 0 {
            return bad("lag_count must be at least 1");
        }
        let usable = self.window_length as f64 * (1.0 - self.burn_in_fraction);
        if self.window_length <= self.lag_count || usable <= self.lag_count as f64 {
            return bad("window_length must exceed lag_count after burn-in");
        }
        let usable_min = self.min_window as f64 * (1.0 - self.burn_in_fraction);
        if self.min_window > self.window_length || usable_min <= self.lag_count as f64 {
            return bad("min_window must lie in (lag_count, window_length] after burn-in");
        }
        if self.reopt_period == 0 {
            return bad("reopt_period must be at least 1");
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return bad("burn_in_fraction must lie in [0, 1)");
        }
        if !(self.optimizer.tolerance > 0.0) || self.optimizer.max_evals == 0 {
            return bad("optimizer tolerance and max_evals must be positive");
        }
        if !(self.bounds.radius_max < 1.0) || !(self.bounds.jury_margin > 0.0) {
            return bad("bounds must keep the filter strictly stable");
        }
        let projected = project_to_stable(&self.initial, self.parameterization, &self.bounds);
        if projected != self.initial.to_vec() {
            return bad("initial point lies outside the feasible region");
        }
        Ok(())
    }

    fn lags(&self) -> Vec<usize> {
        (1..=self.lag_count).collect()
    }
}

/// Measurements of one replay window, with the plant estimate that
/// preceded its first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub measurements: Vec<f64>,
    pub plant_init: DVector<f64>,
}

/// Coloring filter and driving variance for a search point.
///
/// The driving variance is normalized so the candidate's output variance is
/// `sigma_v_sq · e^s`.
pub fn candidate(point: &[f64], param: Parameterization, sigma_v_sq: f64) -> Result<(ColoringFilter, f64)> {
    let filter = param.filter(point)?;
    let q_w = filter.driving_variance(sigma_v_sq) * point[3].exp();
    Ok((filter, q_w))
}

/// Whiteness cost of the augmented filter for `point` replayed over `window`.
///
/// The replay starts from the window's plant estimate with zero filter
/// states and `P₀ = 10 I`; the first `burn_in_fraction` of the innovations
/// are discarded.
pub fn evaluate_objective(
    point: &[f64],
    window: &Window,
    base: &LtiSystem,
    sigma_v_sq: f64,
    r: f64,
    config: &AdaptationConfig,
) -> Result<f64> {
    let skip = (window.measurements.len() as f64 * config.burn_in_fraction) as usize;
    if window.measurements.len() <= skip + config.lag_count {
        return Err(Error::InsufficientData(format!(
            "window of {} samples",
            window.measurements.len()
        )));
    }
    let mut log = InnovationsLog::with_capacity(1, window.measurements.len() - skip);
    replay(point, window, base, sigma_v_sq, r, config, |k, z| {
        if k >= skip {
            log.push_scalar(z);
        }
    })?;
    let est = crate::whiteness::empirical_autocorrelation(&log, config.lag_count)?;
    est.cost(&config.lags())
}

/// Estimate and covariance of the augmented filter for `point` at the end of
/// the same replay that [`evaluate_objective`] scores.
pub fn replay_state(
    point: &[f64],
    window: &Window,
    base: &LtiSystem,
    sigma_v_sq: f64,
    r: f64,
    config: &AdaptationConfig,
) -> Result<FilterState> {
    Ok(replay(point, window, base, sigma_v_sq, r, config, |_, _| {})?.filter_state())
}

fn replay(
    point: &[f64],
    window: &Window,
    base: &LtiSystem,
    sigma_v_sq: f64,
    r: f64,
    config: &AdaptationConfig,
    sink: impl FnMut(usize, f64),
) -> Result<ScalarKf> {
    let (filter, q_w) = candidate(point, config.parameterization, sigma_v_sq)?;
    let aug = augment(base, &filter)?;
    let n = base.n();
    if window.plant_init.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "window plant estimate has length {}, plant has {n}",
            window.plant_init.len()
        )));
    }
    let mut x0 = DVector::zeros(n + 2);
    x0.rows_mut(0, n).copy_from(&window.plant_init);
    let init = FilterState { x: x0, p: DMatrix::identity(n + 2, n + 2) * DEFAULT_PRIOR_SCALE };
    let mut kf = ScalarKf::new(aug.system(), &aug.process_covariance(q_w), r, &init)?;
    kf.run(&window.measurements, sink)?;
    Ok(kf)
}

/// Result of one [`optimize_gamma`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaOptimum {
    pub point: Vec<f64>,
    pub cost: f64,
    pub evals: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
}

/// Minimizes `objective` over the search space from `init` with Nelder–Mead,
/// projecting every candidate into the feasible set.
pub fn optimize_gamma<F>(objective: F, init: &[f64], config: &AdaptationConfig) -> GammaOptimum
where
    F: FnMut(&[f64]) -> f64,
{
    let param = config.parameterization;
    let bounds = config.bounds;
    let steps: Vec<f64> = param
        .step_scales()
        .iter()
        .map(|s| s * config.optimizer.simplex_init_scale)
        .collect();
    let opts = SimplexOptions {
        max_evals: config.optimizer.max_evals,
        tolerance: config.optimizer.tolerance,
        restart_shrink: Some(0.5),
    };
    let res = minimize(objective, |x| project_to_stable(x, param, &bounds), init, &steps, opts);
    GammaOptimum {
        point: res.point,
        cost: res.value,
        evals: res.evals,
        converged: res.converged,
        budget_exhausted: res.budget_exhausted,
    }
}

/// One re-optimization event.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// γ of the best candidate found.
    pub gamma: [f64; 4],
    pub q_w: f64,
    /// Window cost of that candidate.
    pub cost: f64,
    /// Window cost of the filter in use before the event.
    pub incumbent_cost: f64,
    pub accepted: bool,
    pub evals: usize,
}

/// Streaming state of the adaptive filter.
#[derive(Debug, Clone)]
pub struct AdaptationState {
    point: Vec<f64>,
    filter: ColoringFilter,
    q_w: f64,
    aug: AugmentedSystem,
    q_effective: DMatrix<f64>,
    kf_state: FilterState,
    buffer: VecDeque<(f64, DVector<f64>)>,
    steps: usize,
    /// `(step, J)` of every accepted filter.
    pub cost_history: Vec<(usize, f64)>,
    /// Accepted coloring filters, starting with the initial one.
    pub gamma_history: Vec<(usize, [f64; 4])>,
    pub trace: Vec<TraceRow>,
}

impl AdaptationState {
    pub fn filter(&self) -> &ColoringFilter {
        &self.filter
    }

    pub fn driving_variance(&self) -> f64 {
        self.q_w
    }

    pub fn search_point(&self) -> &[f64] {
        &self.point
    }

    pub fn kf_state(&self) -> &FilterState {
        &self.kf_state
    }

    /// Current plant-state estimate (filter states stripped).
    pub fn plant_estimate(&self) -> DVector<f64> {
        self.kf_state.x.rows(0, self.aug.plant_dim()).into_owned()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }
}

/// The adaptive filter: a plant, the noise levels it knows, and its
/// adaptation settings.
#[derive(Debug, Clone)]
pub struct Iwakf {
    base: LtiSystem,
    sigma_v_sq: f64,
    r: f64,
    config: AdaptationConfig,
    state: AdaptationState,
}

impl Iwakf {
    /// `sigma_v_sq` is the assumed process-noise variance and `r` the
    /// measurement-noise variance; nothing about the coloring is supplied.
    pub fn new(base: LtiSystem, sigma_v_sq: f64, r: f64, config: AdaptationConfig) -> Result<Self> {
        config.validate()?;
        if base.m() != 1 || base.l() != 1 {
            return Err(Error::DimensionMismatch(
                "adaptive filter needs a single measurement and noise channel".into(),
            ));
        }
        if !(r > 0.0) || !(sigma_v_sq > 0.0) {
            return Err(Error::InvalidParameter("noise variances must be positive".into()));
        }
        let point = config.initial.to_vec();
        let (filter, q_w) = candidate(&point, config.parameterization, sigma_v_sq)?;
        let aug = augment(&base, &filter)?;
        let d = aug.system().n();
        let state = AdaptationState {
            q_effective: aug.process_covariance(q_w),
            kf_state: FilterState::diffuse(d),
            buffer: VecDeque::with_capacity(config.window_length),
            steps: 0,
            cost_history: Vec::new(),
            gamma_history: vec![(0, filter.gamma())],
            trace: Vec::new(),
            point,
            filter,
            q_w,
            aug,
        };
        Ok(Self { base, sigma_v_sq, r, config, state })
    }

    pub fn state(&self) -> &AdaptationState {
        &self.state
    }

    pub fn config(&self) -> &AdaptationConfig {
        &self.config
    }

    /// Processes one measurement.
    pub fn adapt_step(&mut self, y: f64) -> Result<StepRecord> {
        let st = &mut self.state;
        let prior_plant = st.kf_state.x.rows(0, self.base.n()).into_owned();
        let r = DMatrix::from_element(1, 1, self.r);
        let (next, record) = kf_step(
            &st.kf_state,
            st.aug.system(),
            &st.q_effective,
            &r,
            None,
            &DVector::from_element(1, y),
        )?;
        st.kf_state = next;
        st.steps += 1;
        if st.buffer.len() == self.config.window_length {
            st.buffer.pop_front();
        }
        st.buffer.push_back((y, prior_plant));

        if st.buffer.len() >= self.config.min_window && st.steps.is_multiple_of(self.config.reopt_period) {
            self.reoptimize()?;
        }
        Ok(record)
    }

    fn window(&self) -> Window {
        let buf = &self.state.buffer;
        Window {
            measurements: buf.iter().map(|(y, _)| *y).collect(),
            plant_init: buf.front().map(|(_, x)| x.clone()).unwrap_or_else(|| DVector::zeros(self.base.n())),
        }
    }

    fn reoptimize(&mut self) -> Result<()> {
        let window = self.window();
        let (base, sigma, r, cfg) = (&self.base, self.sigma_v_sq, self.r, &self.config);
        let objective = |p: &[f64]| evaluate_objective(p, &window, base, sigma, r, cfg).unwrap_or(f64::INFINITY);
        let incumbent = evaluate_objective(&self.state.point, &window, base, sigma, r, cfg)?;
        let mut best = optimize_gamma(objective, &self.state.point, cfg);
        if cfg.restart_from_initial && self.state.point[..] != cfg.initial[..] {
            let fresh = optimize_gamma(objective, &cfg.initial, cfg);
            let evals = best.evals + fresh.evals;
            if fresh.cost < best.cost {
                best = fresh;
            }
            best.evals = evals;
        }
        let accepted = best.cost < incumbent;
        let (filter, q_w) = candidate(&best.point, cfg.parameterization, sigma)?;
        let step = self.state.steps;
        self.state.trace.push(TraceRow {
            step,
            gamma: filter.gamma(),
            q_w,
            cost: best.cost,
            incumbent_cost: incumbent,
            accepted,
            evals: best.evals + 1,
        });
        if accepted {
            let replayed = match cfg.swap {
                SwapPolicy::Reset => None,
                SwapPolicy::Replay => Some(replay_state(&best.point, &window, base, sigma, r, cfg)?),
            };
            self.swap_filter(best.point, filter, q_w, replayed)?;
            self.state.cost_history.push((step, best.cost));
            self.state.gamma_history.push((step, self.state.filter.gamma()));
        }
        Ok(())
    }

    /// Installs a new coloring filter. Without a replayed state the plant
    /// block of the estimate is kept and the filter block reset.
    fn swap_filter(
        &mut self,
        point: Vec<f64>,
        filter: ColoringFilter,
        q_w: f64,
        replayed: Option<FilterState>,
    ) -> Result<()> {
        let n = self.base.n();
        let aug = augment(&self.base, &filter)?;
        let next = replayed.unwrap_or_else(|| {
            let old = &self.state.kf_state;
            let mut x = DVector::zeros(n + 2);
            x.rows_mut(0, n).copy_from(&old.x.rows(0, n));
            let mut p = DMatrix::zeros(n + 2, n + 2);
            p.view_mut((0, 0), (n, n)).copy_from(&old.p.view((0, 0), (n, n)));
            p.view_mut((n, n), (2, 2)).copy_from(&(DMatrix::identity(2, 2) * DEFAULT_PRIOR_SCALE));
            FilterState { x, p }
        });
        let st = &mut self.state;
        st.kf_state = next;
        st.q_effective = aug.process_covariance(q_w);
        st.aug = aug;
        st.filter = filter;
        st.q_w = q_w;
        st.point = point;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
