use std::io::Write;

use iwakf_core::kalman::steady_state;
use iwakf_core::model::augment;
use iwakf_core::report::{segment_length, theoretical_spectrum};
use iwakf_core::sim::{run_estimator, trial_truth, Estimator};
use iwakf_core::whiteness::{
    frequency_grid, innovations_psd_theoretical, recover_phi_v, welch_psd, NoiseSpectrum,
};
use nalgebra::DMatrix;

use crate::config::resolve;
use crate::{CliError, PsdCheckArgs};

const FLAT_TOL: f64 = 1e-9;
const ROUND_TRIP_TOL: f64 = 1e-6;
/// Flatness above this marks a spectrum as visibly colored.
const COLORED_FLATNESS: f64 = 1.5;

fn verdict(name: &str, ok: bool, failures: &mut Vec<String>) -> &'static str {
    if ok {
        "pass"
    } else {
        failures.push(name.to_string());
        "FAIL"
    }
}

/// Evaluates the innovation-spectrum identities of the configured plant and
/// filter, and compares a Welch estimate against theory.
pub fn psd_check(args: &PsdCheckArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.points < 2 {
        return Err(CliError::Input("--points must be at least 2".into()));
    }
    let cfg = resolve(&args.config)?;
    let system = cfg.system()?;
    let filter = cfg.filter.build()?;
    let q_w = filter.driving_variance(cfg.sigma_v_sq);
    let r = DMatrix::from_element(1, 1, cfg.r);
    let grid = frequency_grid(args.points);
    let w = |e: std::io::Error| CliError::Input(format!("stdout: {e}"));
    let mut failures = Vec::new();

    writeln!(out, "filter {}  grid {} points", cfg.filter.name(), args.points).map_err(w)?;

    // plain filter, matched to white noise of variance sigma_v^2
    let q = system.input_covariance(&DMatrix::from_element(1, 1, cfg.sigma_v_sq));
    let plain = steady_state(&system, &q, &r)?;
    let white = NoiseSpectrum::Constant(DMatrix::from_element(1, 1, cfg.sigma_v_sq));
    let flat = innovations_psd_theoretical(&system, &plain.k, &plain.f, &r, &white, &grid)?.flatness_ratio();
    let v = verdict("white flatness", flat < 1.0 + FLAT_TOL, &mut failures);
    writeln!(out, "white v, matched filter:     flatness - 1 = {:.3e}  {v}", flat - 1.0).map_err(w)?;

    let colored = NoiseSpectrum::Colored { filter: filter.clone(), q_w };
    let phi_z = innovations_psd_theoretical(&system, &plain.k, &plain.f, &r, &colored, &grid)?;
    let ratio = phi_z.flatness_ratio();
    let label = if ratio > COLORED_FLATNESS { "expected-colored" } else { "near-flat" };
    writeln!(out, "colored v, plain filter:     flatness = {ratio:.4}  {label}").map_err(w)?;

    let aug = augment(&system, &filter)?;
    let matched = steady_state(aug.system(), &aug.process_covariance(q_w), &r)?;
    let driving = NoiseSpectrum::Constant(DMatrix::from_element(1, 1, q_w));
    let flat = innovations_psd_theoretical(aug.system(), &matched.k, &matched.f, &r, &driving, &grid)?.flatness_ratio();
    let v = verdict("augmented flatness", flat < 1.0 + FLAT_TOL, &mut failures);
    writeln!(out, "colored v, augmented filter: flatness - 1 = {:.3e}  {v}", flat - 1.0).map_err(w)?;

    let recovered = recover_phi_v(&phi_z, &system, &plain.k, &plain.f, &r)?;
    let truth: Vec<f64> = grid.iter().map(|&phi| filter.output_psd(phi, q_w)).collect();
    let rms = (recovered
        .levels()
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
        .sqrt();
    let v = verdict("round trip", rms < ROUND_TRIP_TOL, &mut failures);
    writeln!(out, "recovered Phi_v RMS error:   {rms:.3e}  {v}").map_err(w)?;

    let mut sim = cfg.clone();
    sim.steps = args.welch_steps;
    sim.validate()?;
    let truth = trial_truth(&sim, 0)?;
    let run = run_estimator(&sim, &truth, Estimator::Kf)?;
    let log = run.innovations.tail(sim.effective_burn_in());
    let welch = welch_psd(log.as_slice(), segment_length(log.len()), 0.5)?;
    let theory = theoretical_spectrum(&sim, Estimator::Kf, &welch.frequencies)?
        .expect("plain filter has a fixed spectrum");
    let dev = welch.relative_rms_deviation(&theory);
    let v = verdict("welch", dev < args.welch_tolerance, &mut failures);
    writeln!(
        out,
        "Welch vs theory ({} samples): relative RMS = {dev:.4} (tolerance {})  {v}",
        log.len(),
        args.welch_tolerance
    )
    .map_err(w)?;

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failures.join(", ")))
    }
}
