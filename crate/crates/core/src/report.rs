//! CSV artifacts for experiment results.
//!
//! Comma-separated with a header row; floats are written with 17 significant
//! digits so they round-trip exactly.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::kalman::steady_state;
use crate::model::augment;
use crate::sim::{AutocorrReport, Estimator, ExperimentConfig, ExperimentResult};
use crate::whiteness::{innovations_psd_theoretical, welch_psd, NoiseSpectrum, PsdCurve};

/// Welch segment length used for `psd_<est>.csv`.
pub const PSD_SEGMENT: usize = 256;

/// [`PSD_SEGMENT`], or the largest power of two that still leaves two
/// segments for short runs.
pub fn segment_length(samples: usize) -> usize {
    let half = (samples / 2).max(2);
    PSD_SEGMENT.min(1 << half.ilog2())
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per trial: per-state and total RMSE of every estimator, then the
/// two performance ratios.
pub fn write_metrics(result: &ExperimentResult, mut out: impl Write) -> io::Result<()> {
    let states = result.trials.first().map_or(0, |t| t.rmse[0].len());
    let mut header = vec!["trial".to_string()];
    for est in Estimator::ALL {
        header.extend((1..=states).map(|i| format!("rmse_{}_x{i}", est.name())));
        header.push(format!("total_rmse_{}", est.name()));
    }
    header.extend(["pr_aug".to_string(), "pr_iwakf".to_string()]);
    writeln!(out, "{}", header.join(","))?;
    for t in &result.trials {
        let mut row = vec![t.trial.to_string()];
        for est in Estimator::ALL {
            row.extend(t.rmse_of(est).iter().map(|v| fmt_float(*v)));
            row.push(fmt_float(t.total_rmse[est as usize]));
        }
        row.extend([fmt_float(t.pr_aug), fmt_float(t.pr_iwakf)]);
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Normalized autocorrelation per trial and lag for one estimator.
pub fn write_autocorr(reports: &[AutocorrReport], est: Estimator, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "trial,lag,value,bound,within")?;
    for rep in reports.iter().filter(|r| r.estimator == est) {
        for (i, v) in rep.normalized.iter().enumerate() {
            let within = u8::from(v.abs() <= rep.bound);
            writeln!(out, "{},{},{},{},{within}", rep.trial, i + 1, fmt_float(*v), fmt_float(rep.bound))?;
        }
    }
    Ok(())
}

/// Every re-optimization event of every trial.
pub fn write_adaptation_trace(result: &ExperimentResult, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "trial,step,gamma0,gamma1,gamma2,gamma3,q_w,cost,incumbent_cost,accepted,evals")?;
    for t in &result.trials {
        for row in &t.trace {
            let g: Vec<String> = row.gamma.iter().map(|v| fmt_float(*v)).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.trial,
                row.step,
                g.join(","),
                fmt_float(row.q_w),
                fmt_float(row.cost),
                fmt_float(row.incumbent_cost),
                u8::from(row.accepted),
                row.evals
            )?;
        }
    }
    Ok(())
}

/// Trial-mean Welch spectrum of one estimator's innovations after burn-in,
/// with the steady-state theoretical spectrum where the filter is fixed.
pub fn write_psd(result: &ExperimentResult, est: Estimator, mut out: impl Write) -> io::Result<()> {
    let (welch, theory) = innovation_spectra(result, est).map_err(io::Error::other)?;
    match &theory {
        Some(_) => writeln!(out, "frequency,welch,theory")?,
        None => writeln!(out, "frequency,welch")?,
    }
    let levels = welch.levels();
    let theory_levels = theory.map(|t| t.levels());
    for (i, f) in welch.frequencies.iter().enumerate() {
        write!(out, "{},{}", fmt_float(*f), fmt_float(levels[i]))?;
        if let Some(t) = &theory_levels {
            write!(out, ",{}", fmt_float(t[i]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn innovation_spectra(result: &ExperimentResult, est: Estimator) -> Result<(PsdCurve, Option<PsdCurve>)> {
    let cfg = &result.config;
    let mut mean: Option<PsdCurve> = None;
    for t in &result.trials {
        let log = t.innovations(est).tail(cfg.effective_burn_in());
        let curve = welch_psd(log.as_slice(), segment_length(log.len()), 0.5)?;
        match &mut mean {
            None => mean = Some(curve),
            Some(acc) => acc.values.iter_mut().zip(curve.values).for_each(|(a, v)| *a += v),
        }
    }
    let mut welch = mean.ok_or_else(|| crate::Error::InsufficientData("no trials".into()))?;
    let n = result.trials.len() as f64;
    welch.values.iter_mut().for_each(|v| *v /= num_complex::Complex64::new(n, 0.0));
    let theory = theoretical_spectrum(cfg, est, &welch.frequencies)?;
    Ok((welch, theory))
}

/// Steady-state innovation spectrum of the fixed-model estimators against
/// the true colored process noise. `None` for the adaptive filter, whose
/// model changes during the run.
pub fn theoretical_spectrum(config: &ExperimentConfig, est: Estimator, grid: &[f64]) -> Result<Option<PsdCurve>> {
    let system = config.system()?;
    let truth = config.filter.build()?;
    let q_w = truth.driving_variance(config.sigma_v_sq);
    let r = DMatrix::from_element(1, 1, config.r);
    match est {
        Estimator::Kf => {
            let q = system.input_covariance(&DMatrix::from_element(1, 1, config.sigma_v_sq));
            let ss = steady_state(&system, &q, &r)?;
            let phi_v = NoiseSpectrum::Colored { filter: truth, q_w };
            innovations_psd_theoretical(&system, &ss.k, &ss.f, &r, &phi_v, grid).map(Some)
        }
        Estimator::Aug => {
            let aug = augment(&system, &truth)?;
            let ss = steady_state(aug.system(), &aug.process_covariance(q_w), &r)?;
            let phi_v = NoiseSpectrum::Constant(DMatrix::from_element(1, 1, q_w));
            innovations_psd_theoretical(aug.system(), &ss.k, &ss.f, &r, &phi_v, grid).map(Some)
        }
        Estimator::Iwakf => Ok(None),
    }
}

/// Single-column innovations of trial 0 for one estimator.
pub fn write_innovations(result: &ExperimentResult, est: Estimator, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "innovation")?;
    if let Some(t) = result.trials.first() {
        for z in t.innovations(est).as_slice() {
            writeln!(out, "{}", fmt_float(*z))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }
}
