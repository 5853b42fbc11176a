use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use iwakf_core::model::ColoringFilter;
use iwakf_core::sim::{generate_colored_noise, stream_rng, Stream};

fn iwakf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwakf")).args(args).env_remove("IWAKF_OUT_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_series(path: &Path, header: &str, values: impl IntoIterator<Item = f64>) {
    let mut text = format!("{header}\n");
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, text).unwrap();
}

fn pr_of(table: &str, estimator: &str) -> f64 {
    let row = table.lines().find(|l| l.starts_with(estimator)).unwrap();
    row.split_whitespace().nth(2).unwrap().parse().unwrap()
}

#[test]
fn smoke_run_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let start = Instant::now();
    let o = iwakf(&["simulate", "--trials", "1", "--steps", "200", "--out", out.to_str().unwrap()]);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = iwakf(&[
        "simulate", "--filter", "sf1", "--seed", "42", "--trials", "2", "--steps", "5000", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(pr_of(&stdout(&o), "aug") < 1.0, "{}", stdout(&o));

    let manifest: toml::Table = toml::from_str(&std::fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(42));
    assert_eq!(manifest["config"]["steps"].as_integer(), Some(5000));
    let sums = manifest["checksums"].as_table().unwrap();
    for name in [
        "metrics.csv",
        "adaptation_trace.csv",
        "autocorr_kf.csv",
        "autocorr_aug.csv",
        "autocorr_iwakf.csv",
        "psd_kf.csv",
        "psd_aug.csv",
        "psd_iwakf.csv",
        "innovations_kf.csv",
    ] {
        let bytes = std::fs::read(out.join(name)).unwrap();
        assert_eq!(sums[name].as_str().unwrap(), iwakf_cli::manifest::sha256_hex(&bytes), "{name}");
    }
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = iwakf(&["simulate", "--filter", "sf2", "--trials", "2", "--steps", "3000", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = a.join("manifest.toml");
    let o = iwakf(&["simulate", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&manifest).unwrap(), std::fs::read(b.join("manifest.toml")).unwrap());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_iwakf"))
        .args(["simulate", "--trials", "1", "--steps", "300"])
        .env("IWAKF_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("metrics.csv").exists());
}

#[test]
fn missing_config_exits_2_naming_the_path() {
    let o = iwakf(&["simulate", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/exp.toml"));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "steps = \"many\"\n").unwrap();
    let o = iwakf(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = iwakf(&["simulate", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_values_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "steps = 400\ntrials = 1\nseed = 3\n[filter]\nkind = \"sf3\"\n").unwrap();
    let out = dir.path().join("o");
    let o = iwakf(&["simulate", "--config", path.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("filter sf3  steps 400  trials 1  seed 9"), "{text}");
}

#[test]
fn unstable_gamma_exits_3() {
    let o = iwakf(&["simulate", "--filter", "custom", "--gamma", "0.5,2.0,0,1", "--steps", "300"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = iwakf(&["psd-check", "--filter", "custom", "--gamma", "1.2,0,0,1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn whiteness_on_white_noise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("white.csv");
    let mut rng = stream_rng(5, 0, Stream::ProcessNoise);
    write_series(&path, "innovation", generate_colored_noise(&ColoringFilter::white(), 1.0, 50_000, &mut rng));
    let o = iwakf(&["whiteness", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.ends_with("lags within bound")).unwrap();
    let within: usize = line.split('/').next().unwrap().parse().unwrap();
    assert!(within >= 8, "{text}");
}

#[test]
fn whiteness_alternating_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("alt4.csv");
    write_series(&short, "z", [1.0, -1.0, 1.0, -1.0]);
    let o = iwakf(&["whiteness", short.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lag1 = text.lines().find(|l| l.trim_start().starts_with("1 ")).unwrap();
    assert!(lag1.contains("-0.750000"), "{text}");

    let long = dir.path().join("alt.csv");
    write_series(&long, "z", (0..1000).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }));
    let text = stdout(&iwakf(&["whiteness", long.to_str().unwrap()]));
    let lag1 = text.lines().find(|l| l.trim_start().starts_with("1 ")).unwrap();
    assert!(lag1.ends_with("FAIL"), "{text}");
}

#[test]
fn whiteness_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(iwakf(&["whiteness", empty.to_str().unwrap()]).status.code(), Some(2));
    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, "z\n").unwrap();
    assert_eq!(iwakf(&["whiteness", header_only.to_str().unwrap()]).status.code(), Some(2));
    let malformed = dir.path().join("bad.csv");
    std::fs::write(&malformed, "z\n0.1\nabc\n").unwrap();
    assert_eq!(iwakf(&["whiteness", malformed.to_str().unwrap()]).status.code(), Some(2));
    let two = dir.path().join("two.csv");
    std::fs::write(&two, "a,b\n1,2\n3,4\n").unwrap();
    assert_eq!(iwakf(&["whiteness", two.to_str().unwrap()]).status.code(), Some(2));
    let o = iwakf(&["whiteness", two.to_str().unwrap(), "--column", "b"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(iwakf(&["whiteness", "/nonexistent.csv"]).status.code(), Some(2));
}

#[test]
fn psd_check_reports() {
    let o = iwakf(&["psd-check", "--filter", "white", "--welch-steps", "50000"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.ends_with("pass")).count() == 4, "{text}");

    let o = iwakf(&["psd-check", "--filter", "sf3"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("expected-colored"));
}
