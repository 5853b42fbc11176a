//! Shared fixtures for the benchmarks.

use iwakf_core::iwakf::Window;
use iwakf_core::sim::{trial_truth, ExperimentConfig, FilterSpec};
use iwakf_core::LtiSystem;
use nalgebra::DVector;

/// Pendulum plant and a window of SF2 measurements.
pub fn window(samples: usize) -> (ExperimentConfig, LtiSystem, Window) {
    let cfg = ExperimentConfig { filter: FilterSpec::Sf2, steps: samples, trials: 1, ..Default::default() };
    let truth = trial_truth(&cfg, 0).expect("default config simulates");
    let system = cfg.system().expect("default pendulum discretizes");
    let window = Window { measurements: truth.y.iter().map(|y| y[0]).collect(), plant_init: DVector::zeros(system.n()) };
    (cfg, system, window)
}
