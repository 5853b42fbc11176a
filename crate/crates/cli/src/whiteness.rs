use std::io::Write;
use std::path::Path;

use iwakf_core::whiteness::{empirical_autocorrelation, whiteness_bound, InnovationsLog};

use crate::{CliError, WhitenessArgs};

/// Bartlett bands are a large-sample approximation.
const MIN_RELIABLE_SAMPLES: usize = 30;

/// Reads one numeric column from a CSV file with a header row.
pub fn read_series(path: &Path, column: Option<&str>) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(bad("empty file".into()));
    }
    let index = match column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("no column named {name:?}")))?,
        None if headers.len() == 1 => 0,
        None => return Err(bad(format!("{} columns; choose one with --column", headers.len()))),
    };
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = record.get(index).ok_or_else(|| bad(format!("row {} is short", row + 2)))?;
        let v: f64 = field
            .parse()
            .map_err(|_| bad(format!("row {}: {field:?} is not a number", row + 2)))?;
        if !v.is_finite() {
            return Err(bad(format!("row {}: non-finite value", row + 2)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(values)
}

/// Prints the normalized autocorrelation per lag against the Bartlett bound
/// and the whiteness cost over those lags.
pub fn whiteness(args: &WhitenessArgs, out: &mut impl Write) -> Result<(), CliError> {
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(CliError::Input("--confidence must lie in (0, 1)".into()));
    }
    if args.max_lag == 0 {
        return Err(CliError::Input("--max-lag must be at least 1".into()));
    }
    let series = read_series(&args.input, args.column.as_deref())?;
    let n = series.len();
    if n < 2 {
        return Err(CliError::Input(format!("{}: need at least 2 samples", args.input.display())));
    }
    let max_lag = args.max_lag.min(n - 1);
    if max_lag < args.max_lag {
        eprintln!("iwakf: only {n} samples, reporting lags 1..{max_lag}");
    }
    if n < MIN_RELIABLE_SAMPLES {
        eprintln!("iwakf: {n} samples is too few for the bound to be reliable");
    }
    let log = InnovationsLog::from_scalars(series);
    let est = empirical_autocorrelation(&log, max_lag)?;
    let bound = whiteness_bound(n, args.confidence)?;
    let lags: Vec<usize> = (1..=max_lag).collect();
    let cost = est.cost(&lags)?;

    let w = |e: std::io::Error| CliError::Input(format!("stdout: {e}"));
    writeln!(out, "samples {n}  bound {bound:.6} ({:.0}%)", args.confidence * 100.0).map_err(w)?;
    if est.degenerate {
        writeln!(out, "degenerate: the series has zero variance").map_err(w)?;
    }
    writeln!(out, "{:>4} {:>12} {:>6}", "lag", "rho", "result").map_err(w)?;
    for l in &lags {
        let rho = est.rho(*l);
        let verdict = if rho.abs() <= bound { "pass" } else { "FAIL" };
        writeln!(out, "{l:>4} {rho:>12.6} {verdict:>6}").map_err(w)?;
    }
    writeln!(out, "J = {cost:.6e}").map_err(w)?;
    writeln!(out, "{}/{max_lag} lags within bound", est.lags_within(bound)).map_err(w)?;
    Ok(())
}
