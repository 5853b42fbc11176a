use std::io::Write;
use std::path::PathBuf;

use iwakf_core::report::{write_adaptation_trace, write_autocorr, write_innovations, write_metrics, write_psd};
use iwakf_core::sim::{autocorr_report, run_experiment, Estimator};

use crate::config::resolve;
use crate::manifest::{sha256_hex, RunManifest, MANIFEST_FILE};
use crate::{io_error, CliError, SimulateArgs, DEFAULT_OUT_DIR, OUT_DIR_ENV};

fn out_dir(args: &SimulateArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs the experiment, writes the artifacts and the manifest, and prints
/// the performance summary.
pub fn simulate(args: &SimulateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let cfg = resolve(&args.config)?;
    let dir = out_dir(args);
    let result = run_experiment(&cfg)?;
    let reports = autocorr_report(&result)?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut add = |name: String, write: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Numerical(format!("{name}: {e}")))?;
        files.push((name, buf));
        Ok(())
    };
    add("metrics.csv".into(), &|b| write_metrics(&result, b))?;
    add("adaptation_trace.csv".into(), &|b| write_adaptation_trace(&result, b))?;
    for est in Estimator::ALL {
        add(format!("autocorr_{}.csv", est.name()), &|b| write_autocorr(&reports, est, b))?;
        add(format!("psd_{}.csv", est.name()), &|b| write_psd(&result, est, b))?;
        add(format!("innovations_{}.csv", est.name()), &|b| write_innovations(&result, est, b))?;
    }

    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut manifest = RunManifest::new(&cfg);
    for (name, bytes) in &files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        manifest.checksums.insert(name.clone(), sha256_hex(bytes));
    }
    let text = toml::to_string(&manifest).map_err(|e| CliError::Input(format!("manifest: {e}")))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;

    let s = &result.summary;
    let within = |est: Estimator| {
        let r: Vec<_> = reports.iter().filter(|r| r.estimator == est).collect();
        r.iter().map(|r| r.within as f64).sum::<f64>() / r.len() as f64
    };
    let w = |e: std::io::Error| CliError::Input(format!("stdout: {e}"));
    writeln!(
        out,
        "filter {}  steps {}  trials {}  seed {}",
        cfg.filter.name(),
        cfg.steps,
        cfg.trials,
        cfg.seed
    )
    .map_err(w)?;
    writeln!(out, "{:<10}{:>12}{:>10}{:>10}{:>16}", "estimator", "total_rmse", "PR", "PR_std", "white_lags").map_err(w)?;
    let rows = [
        (Estimator::Kf, 1.0, 0.0),
        (Estimator::Aug, s.mean_pr_aug, s.std_pr_aug),
        (Estimator::Iwakf, s.mean_pr_iwakf, s.std_pr_iwakf),
    ];
    for (est, pr, sd) in rows {
        writeln!(
            out,
            "{:<10}{:>12.5}{:>10.4}{:>10.4}{:>13.2}/{}",
            est.name(),
            s.mean_total_rmse[est as usize],
            pr,
            sd,
            within(est),
            cfg.max_lag
        )
        .map_err(w)?;
    }
    writeln!(out, "PR_IWAKF / PR_Aug = {:.4}", s.mean_pr_iwakf / s.mean_pr_aug).map_err(w)?;
    writeln!(out, "artifacts in {}", dir.display()).map_err(w)?;
    Ok(())
}
