use iwakf_core::kalman::{kf_step, steady_state, FilterState};
use iwakf_core::model::spectral_radius;
use iwakf_core::sim::{run_estimator, trial_truth, Estimator, ExperimentConfig, FilterSpec};
use iwakf_core::whiteness::{empirical_autocorrelation, whiteness_bound};
use nalgebra::{DMatrix, DVector};

fn white_config(steps: usize) -> ExperimentConfig {
    ExperimentConfig { filter: FilterSpec::White, steps, trials: 1, ..Default::default() }
}

#[test]
fn optimal_filter_innovations_are_white_with_predicted_variance() {
    let cfg = white_config(50_000);
    let truth = trial_truth(&cfg, 0).unwrap();
    let run = run_estimator(&cfg, &truth, Estimator::Kf).unwrap();
    let log = run.innovations.tail(cfg.burn_in);
    let ac = empirical_autocorrelation(&log, 10).unwrap();
    let bound = whiteness_bound(log.len(), 0.95).unwrap();
    assert!(ac.lags_within(bound) >= 8, "{:?}", ac.normalized);

    let sys = cfg.system().unwrap();
    let q = sys.input_covariance(&DMatrix::from_element(1, 1, cfg.sigma_v_sq));
    let ss = steady_state(&sys, &q, &DMatrix::from_element(1, 1, cfg.r)).unwrap();
    let s = ss.s[(0, 0)];
    assert!((ac.lag0[(0, 0)] / s - 1.0).abs() < 0.05, "var {} vs S {s}", ac.lag0[(0, 0)]);
}

#[test]
fn optimal_filter_is_unbiased() {
    let cfg = white_config(50_000);
    let truth = trial_truth(&cfg, 0).unwrap();
    let run = run_estimator(&cfg, &truth, Estimator::Kf).unwrap();
    let tail = &run.errors[cfg.burn_in..];
    let n = tail.len() as f64;
    for i in 0..2 {
        let mean = tail.iter().map(|e| e[i]).sum::<f64>() / n;
        let rms = (tail.iter().map(|e| e[i] * e[i]).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 0.1 * rms, "state {i}: mean {mean}, rms {rms}");
    }
}

#[test]
fn time_varying_covariance_converges_to_riccati_fixed_point() {
    let cfg = white_config(1000);
    let sys = cfg.system().unwrap();
    let q = sys.input_covariance(&DMatrix::from_element(1, 1, 1.0));
    let r = DMatrix::from_element(1, 1, cfg.r);
    let ss = steady_state(&sys, &q, &r).unwrap();
    assert!(ss.residual < 1e-10);
    assert!(spectral_radius(&ss.f) < 1.0);

    let mut st = FilterState::diffuse(2);
    let mut p_fc = DMatrix::zeros(2, 2);
    for _ in 0..3000 {
        let (next, rec) = kf_step(&st, &sys, &q, &r, None, &DVector::zeros(1)).unwrap();
        p_fc = rec.p_fc;
        st = next;
    }
    assert!((p_fc - &ss.p_fc).abs().max() < 1e-8);
}
