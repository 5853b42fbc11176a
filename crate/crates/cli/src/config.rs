//! Experiment configuration: TOML file (or earlier manifest) plus flags.

use std::path::Path;

use iwakf_core::sim::{ExperimentConfig, FilterSpec};

use crate::manifest::RunManifest;
use crate::{CliError, ConfigArgs, FilterChoice};

/// Parses a config file. A manifest is accepted too, in which case its
/// resolved config is used.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig, CliError> {
    let bad = |e: toml::de::Error| CliError::Input(format!("{}: {e}", origin.display()));
    let table: toml::Table = toml::from_str(text).map_err(bad)?;
    if table.contains_key("config") && table.contains_key("version") {
        let manifest: RunManifest = toml::from_str(text).map_err(bad)?;
        return Ok(manifest.config);
    }
    toml::from_str(text).map_err(bad)
}

/// Resolves the config from the optional file and the command-line
/// overrides, then validates it.
pub fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text, path)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(max_lag) = args.max_lag {
        cfg.max_lag = max_lag;
    }
    match (args.filter, &args.gamma) {
        (Some(FilterChoice::Custom), Some(g)) => cfg.filter = FilterSpec::Custom { gamma: gamma4(g)? },
        (Some(FilterChoice::Custom), None) => {
            if !matches!(cfg.filter, FilterSpec::Custom { .. }) {
                return Err(CliError::Input("--filter custom needs --gamma g0,g1,g2,g3".into()));
            }
        }
        (Some(choice), None) => cfg.filter = preset(choice),
        (Some(_), Some(_)) => return Err(CliError::Input("--gamma only applies to --filter custom".into())),
        (None, Some(g)) => cfg.filter = FilterSpec::Custom { gamma: gamma4(g)? },
        (None, None) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn preset(choice: FilterChoice) -> FilterSpec {
    match choice {
        FilterChoice::Sf1 => FilterSpec::Sf1,
        FilterChoice::Sf2 => FilterSpec::Sf2,
        FilterChoice::Sf3 => FilterSpec::Sf3,
        FilterChoice::White => FilterSpec::White,
        FilterChoice::Custom => unreachable!("custom needs coefficients"),
    }
}

fn gamma4(values: &[f64]) -> Result<[f64; 4], CliError> {
    values
        .try_into()
        .map_err(|_| CliError::Input(format!("--gamma needs 4 values, got {}", values.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> ConfigArgs {
        ConfigArgs::default()
    }

    #[test]
    fn defaults_resolve() {
        assert_eq!(resolve(&args()).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn flags_override() {
        let a = ConfigArgs { seed: Some(7), steps: Some(3000), filter: Some(FilterChoice::Sf3), ..args() };
        let cfg = resolve(&a).unwrap();
        assert_eq!((cfg.seed, cfg.steps, cfg.filter), (7, 3000, FilterSpec::Sf3));
    }

    #[test]
    fn custom_needs_gamma() {
        let a = ConfigArgs { filter: Some(FilterChoice::Custom), ..args() };
        assert!(matches!(resolve(&a), Err(CliError::Input(_))));
        let a = ConfigArgs { filter: Some(FilterChoice::Custom), gamma: Some(vec![0.1, 0.2, 0.0, 1.0]), ..args() };
        assert_eq!(resolve(&a).unwrap().filter, FilterSpec::Custom { gamma: [0.1, 0.2, 0.0, 1.0] });
    }

    #[test]
    fn unstable_gamma_is_numerical() {
        let a = ConfigArgs { gamma: Some(vec![0.5, 2.0, 0.0, 1.0]), ..args() };
        assert!(matches!(resolve(&a), Err(CliError::Numerical(_))));
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = parse_config("steps = 5000\n[filter]\nkind = \"sf2\"\n[adaptation]\nlag_count = 12\n", Path::new("x")).unwrap();
        assert_eq!(cfg.steps, 5000);
        assert_eq!(cfg.filter, FilterSpec::Sf2);
        assert_eq!(cfg.adaptation.lag_count, 12);
        assert_eq!(cfg.adaptation.window_length, ExperimentConfig::default().adaptation.window_length);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(parse_config("stepz = 5\n", Path::new("x")).is_err());
    }
}
