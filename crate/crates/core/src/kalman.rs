//! Forecast / innovation / data-assimilation recursions of the linear
//! Kalman filter, and the steady-state (Riccati fixed point) quantities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::linalg::{spectral_radius, symmetrize};
use crate::model::LtiSystem;

/// Innovation covariances with a larger condition number are treated as singular.
const MAX_CONDITION: f64 = 1e12;
/// Iteration cap for [`steady_state`].
pub const RICCATI_MAX_ITER: usize = 10_000;
/// Convergence threshold for [`steady_state`], relative to `max(1, |P|∞)`.
pub const RICCATI_TOL: f64 = 1e-10;

/// Default prior covariance scale, `P₀ = 10 I`.
pub const DEFAULT_PRIOR_SCALE: f64 = 10.0;

/// Posterior mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl FilterState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Result<Self> {
        if p.shape() != (x.len(), x.len()) {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} with covariance {:?}",
                x.len(),
                p.shape()
            )));
        }
        Ok(Self { x, p: symmetrize(&p) })
    }

    /// `x₀ = 0`, `P₀ = 10 I`.
    pub fn diffuse(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            p: DMatrix::identity(n, n) * DEFAULT_PRIOR_SCALE,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Everything computed during one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub x_fc: DVector<f64>,
    pub p_fc: DMatrix<f64>,
    pub z: DVector<f64>,
    pub s: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub x_da: DVector<f64>,
    pub p_da: DMatrix<f64>,
}

impl StepRecord {
    pub fn posterior(&self) -> FilterState {
        FilterState { x: self.x_da.clone(), p: self.p_da.clone() }
    }
}

/// `x_fc = A x + B u`, `P_fc = A P Aᵀ + Q`.
pub fn forecast(
    state: &FilterState,
    system: &LtiSystem,
    q_effective: &DMatrix<f64>,
    u: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = system.n();
    if state.dim() != n || q_effective.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "forecast: system n = {n}, state {}, Q {:?}",
            state.dim(),
            q_effective.shape()
        )));
    }
    let mut x_fc = system.a() * &state.x;
    if let Some(u) = u {
        if u.len() != system.l() {
            return Err(Error::DimensionMismatch(format!(
                "forecast: input of length {}, expected {}",
                u.len(),
                system.l()
            )));
        }
        x_fc += system.b() * u;
    }
    let p_fc = symmetrize(&(system.a() * &state.p * system.a().transpose() + q_effective));
    Ok((x_fc, p_fc))
}

/// Innovation and measurement update.
pub fn assimilate(
    x_fc: &DVector<f64>,
    p_fc: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<StepRecord> {
    let (m, n) = c.shape();
    if x_fc.len() != n || p_fc.shape() != (n, n) || y.len() != m || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "assimilate: C {:?}, x {}, P {:?}, y {}, R {:?}",
            c.shape(),
            x_fc.len(),
            p_fc.shape(),
            y.len(),
            r.shape()
        )));
    }
    let z = y - c * x_fc;
    let s = symmetrize(&(c * p_fc * c.transpose() + r));
    let cp = c * p_fc;
    let gain_t = solve_spd(&s, &cp)?;
    let k = gain_t.transpose();
    let x_da = x_fc + &k * &z;
    let p_da = symmetrize(&((DMatrix::identity(n, n) - &k * c) * p_fc));
    Ok(StepRecord { x_fc: x_fc.clone(), p_fc: p_fc.clone(), z, s, k, x_da, p_da })
}

/// Solves `S X = B` for symmetric positive-definite `S`.
fn solve_spd(s: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = s.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::SingularInnovationCovariance { condition });
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovationCovariance { condition: f64::INFINITY })?;
    Ok(chol.solve(rhs))
}

/// One full filter step: forecast, then assimilate `y`.
pub fn kf_step(
    state: &FilterState,
    system: &LtiSystem,
    q_effective: &DMatrix<f64>,
    r: &DMatrix<f64>,
    u: Option<&DVector<f64>>,
    y: &DVector<f64>,
) -> Result<(FilterState, StepRecord)> {
    let (x_fc, p_fc) = forecast(state, system, q_effective, u)?;
    let rec = assimilate(&x_fc, &p_fc, y, system.c(), r)?;
    Ok((rec.posterior(), rec))
}

/// Steady-state filter quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Forecast covariance at the fixed point.
    pub p_fc: DMatrix<f64>,
    /// Gain `P_fc Cᵀ S⁻¹`.
    pub k: DMatrix<f64>,
    /// Error-propagation matrix `A (I - K C)`.
    pub f: DMatrix<f64>,
    /// Innovation covariance `C P_fc Cᵀ + R`.
    pub s: DMatrix<f64>,
    /// Fixed-point residual `|P - Ric(P)|∞` at exit.
    pub residual: f64,
    pub iterations: usize,
}

fn riccati_map(
    p_fc: &DMatrix<f64>,
    system: &LtiSystem,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let c = system.c();
    let n = system.n();
    let s = symmetrize(&(c * p_fc * c.transpose() + r));
    let k = solve_spd(&s, &(c * p_fc))?.transpose();
    let p_da = symmetrize(&((DMatrix::identity(n, n) - &k * c) * p_fc));
    let next = symmetrize(&(system.a() * p_da * system.a().transpose() + q));
    Ok((next, k, s))
}

/// Iterates the covariance recursion to its fixed point (the DARE solution).
pub fn steady_state(system: &LtiSystem, q_effective: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<SteadyState> {
    let n = system.n();
    if q_effective.shape() != (n, n) || r.shape() != (system.m(), system.m()) {
        return Err(Error::DimensionMismatch(format!(
            "steady_state: n = {n}, Q {:?}, R {:?}",
            q_effective.shape(),
            r.shape()
        )));
    }
    let mut p = symmetrize(q_effective);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < RICCATI_MAX_ITER {
        let (next, _, _) = riccati_map(&p, system, q_effective, r)?;
        residual = (&next - &p).abs().max();
        p = next;
        iterations += 1;
        if !residual.is_finite() {
            break;
        }
        let scale = p.abs().max().max(1.0);
        if residual <= 1e-14 * scale {
            break;
        }
    }
    let scale = p.abs().max().max(1.0);
    if !(residual <= RICCATI_TOL * scale) {
        return Err(Error::NoConvergence { residual, iterations });
    }
    let (again, k, s) = riccati_map(&p, system, q_effective, r)?;
    residual = (&again - &p).abs().max();
    let f = system.a() * (DMatrix::identity(n, n) - &k * system.c());
    let radius = spectral_radius(&f);
    if radius >= 1.0 {
        return Err(Error::UnstableClosedLoop { radius });
    }
    Ok(SteadyState { p_fc: p, k, f, s, residual, iterations })
}

/// Allocation-free time-varying Kalman filter for a single scalar measurement.
///
/// Matrices are stored row-major. This is the inner loop of the adaptive
/// objective, which replays the filter over a data window many thousands of
/// times per re-optimization; [`kf_step`] is the general reference.
///
/// Once a covariance update changes `P` by less than `1e-14` relative to its
/// size, the covariance has reached the Riccati fixed point to working
/// precision and later steps reuse the frozen gain.
#[derive(Debug, Clone)]
pub struct ScalarKf {
    dim: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    q: Vec<f64>,
    r: f64,
    x: Vec<f64>,
    p: Vec<f64>,
    tmp: Vec<f64>,
    pc: Vec<f64>,
    xf: Vec<f64>,
    pf_prev: Vec<f64>,
    frozen: Option<f64>,
    /// `c A`, used once the gain is frozen
    ca: Vec<f64>,
}

const FREEZE_TOL: f64 = 1e-14;

impl ScalarKf {
    pub fn new(system: &LtiSystem, q_effective: &DMatrix<f64>, r: f64, init: &FilterState) -> Result<Self> {
        let n = system.n();
        if system.m() != 1 || q_effective.shape() != (n, n) || init.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "scalar filter: m = {}, n = {n}, Q {:?}, state {}",
                system.m(),
                q_effective.shape(),
                init.dim()
            )));
        }
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        Ok(Self {
            dim: n,
            a: row_major(system.a()),
            c: system.c().as_slice().to_vec(),
            q: row_major(q_effective),
            r,
            x: init.x.as_slice().to_vec(),
            p: row_major(&init.p),
            tmp: vec![0.0; n * n],
            pc: vec![0.0; n],
            xf: vec![0.0; n],
            pf_prev: vec![f64::INFINITY; n * n],
            frozen: None,
            ca: vec![0.0; n],
        })
    }

    /// Runs one step and returns the innovation and its variance.
    pub fn step(&mut self, y: f64) -> Result<(f64, f64)> {
        let d = self.dim;
        let (a, p, tmp) = (&self.a, &mut self.p, &mut self.tmp);
        if let Some(s) = self.frozen {
            // pc holds the frozen gain P_fc cᵀ / s
            let innov = y - self.ca.iter().zip(&self.x).map(|(u, v)| u * v).sum::<f64>();
            for i in 0..d {
                let row = &a[i * d..(i + 1) * d];
                self.xf[i] = row.iter().zip(&self.x).map(|(u, v)| u * v).sum();
            }
            for i in 0..d {
                self.x[i] = self.xf[i] + self.pc[i] * innov;
            }
            return Ok((innov, s));
        }
        // x_fc = A x
        for i in 0..d {
            let row = &a[i * d..(i + 1) * d];
            self.xf[i] = row.iter().zip(&self.x).map(|(u, v)| u * v).sum();
        }
        // tmp = A P
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += a[i * d + k] * p[k * d + j];
                }
                tmp[i * d + j] = acc;
            }
        }
        // P_fc = tmp Aᵀ + Q (symmetric, fill upper then mirror)
        for i in 0..d {
            for j in i..d {
                let mut acc = self.q[i * d + j];
                for k in 0..d {
                    acc += tmp[i * d + k] * a[j * d + k];
                }
                p[i * d + j] = acc;
                p[j * d + i] = acc;
            }
        }
        // pc = P_fc cᵀ, s = c pc + r
        let mut s = self.r;
        for i in 0..d {
            let acc: f64 = (0..d).map(|k| p[i * d + k] * self.c[k]).sum();
            self.pc[i] = acc;
            s += self.c[i] * acc;
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::SingularInnovationCovariance { condition: f64::INFINITY });
        }
        let (mut change, mut size) = (0.0f64, 0.0f64);
        for (prev, &cur) in self.pf_prev.iter_mut().zip(p.iter()) {
            change = change.max((cur - *prev).abs());
            size = size.max(cur.abs());
            *prev = cur;
        }
        let innov = y - self.c.iter().zip(&self.xf).map(|(u, v)| u * v).sum::<f64>();
        let inv_s = 1.0 / s;
        for i in 0..d {
            self.x[i] = self.xf[i] + self.pc[i] * inv_s * innov;
        }
        // P_da = P_fc - pc pcᵀ / s
        for i in 0..d {
            for j in i..d {
                let v = p[i * d + j] - self.pc[i] * self.pc[j] * inv_s;
                p[i * d + j] = v;
                p[j * d + i] = v;
            }
        }
        if change <= FREEZE_TOL * size.max(1.0) {
            self.frozen = Some(s);
            for k in self.pc.iter_mut() {
                *k *= inv_s;
            }
            for j in 0..d {
                self.ca[j] = (0..d).map(|i| self.c[i] * a[i * d + j]).sum();
            }
        }
        Ok((innov, s))
    }

    /// Filters `ys` in order, passing each step index and innovation to `sink`.
    /// Same results as calling [`step`](Self::step) repeatedly; once the gain
    /// freezes, common state sizes run on stack arrays.
    pub fn run(&mut self, ys: &[f64], mut sink: impl FnMut(usize, f64)) -> Result<()> {
        let mut k = 0;
        while k < ys.len() && self.frozen.is_none() {
            sink(k, self.step(ys[k])?.0);
            k += 1;
        }
        let rest = &ys[k..];
        match self.dim {
            2 => self.run_frozen::<2>(rest, k, &mut sink),
            3 => self.run_frozen::<3>(rest, k, &mut sink),
            4 => self.run_frozen::<4>(rest, k, &mut sink),
            5 => self.run_frozen::<5>(rest, k, &mut sink),
            6 => self.run_frozen::<6>(rest, k, &mut sink),
            _ => {
                for (i, &y) in rest.iter().enumerate() {
                    sink(k + i, self.step(y)?.0);
                }
            }
        }
        Ok(())
    }

    fn run_frozen<const D: usize>(&mut self, ys: &[f64], offset: usize, sink: &mut impl FnMut(usize, f64)) {
        let dot = |u: &[f64; D], v: &[f64; D]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        let arr = |s: &[f64]| -> [f64; D] { s.try_into().expect("state size") };
        let a: [[f64; D]; D] = std::array::from_fn(|i| arr(&self.a[i * D..(i + 1) * D]));
        let (ca, gain) = (arr(&self.ca), arr(&self.pc));
        let mut x = arr(&self.x);
        for (i, &y) in ys.iter().enumerate() {
            let innov = y - dot(&ca, &x);
            x = std::array::from_fn(|r| dot(&a[r], &x) + gain[r] * innov);
            sink(offset + i, innov);
        }
        self.x.copy_from_slice(&x);
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    /// Current analysis estimate and covariance.
    pub fn filter_state(&self) -> FilterState {
        let d = self.dim;
        FilterState {
            x: DVector::from_column_slice(&self.x),
            p: DMatrix::from_row_slice(d, d, &self.p),
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }
}
