use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcd_cli::output::CSV_HEADER;
use tempfile::TempDir;

const FINITE: &str =
    r#"{"type": "gaussian_finite", "thetas": [0.4, 0.6, 0.8, 1.0], "theta_star": 0.4}"#;
const GDECUSUM: &str = r#"{"type": "gdecusum", "mu": 0.08, "h": "inf"}"#;

/// Small budgets so each run takes well under a second.
fn config(family: &str, detectors: &[&str], thresholds: &str, extra: &str) -> String {
    format!(
        r#"{{
  "family": {family},
  "detectors": [{}],
  "thresholds": {thresholds},
  "trials": 200,
  "cadd_trials": 100,
  "pdc_cycles": 2000,
  "longrun_trials": 4,
  "gamma_grid": [1, 5],
  "seed": 11{extra}
}}"#,
        detectors.join(", ")
    )
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

fn qcd(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcd"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn check_family_accepts_least_favorable_member() {
    let fx = Fixture::new();
    let cfg = fx.write("c.json", &config(FINITE, &[GDECUSUM], "[3.0]", ""));
    let out = qcd("check-family", &cfg, &[]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("0.080000"), "{stdout}");
    assert!(stdout.contains("positive under every member"));
}

#[test]
fn check_family_rejects_a_control_that_drifts_down() {
    let fx = Fixture::new();
    let family = FINITE.replace(r#""theta_star": 0.4"#, r#""theta_star": 1.0"#);
    let cfg = fx.write("c.json", &config(&family, &[GDECUSUM], "[3.0]", ""));
    let out = qcd("check-family", &cfg, &[]);
    assert_eq!(code(&out), 2);
    let stderr = text(&out.stderr);
    assert!(stderr.contains("N(0.4, 1) (drift -0.1)"), "{stderr}");
}

#[test]
fn missing_theta_star_is_a_config_error() {
    let fx = Fixture::new();
    let family = FINITE.replace(r#", "theta_star": 0.4"#, "");
    let cfg = fx.write("c.json", &config(&family, &[GDECUSUM], "[3.0]", ""));
    let out = qcd("check-family", &cfg, &[]);
    assert_eq!(code(&out), 1);
    let stderr = text(&out.stderr);
    assert!(
        stderr.contains("theta_star") && stderr.contains("line 2"),
        "{stderr}"
    );
}

#[test]
fn bad_thresholds_and_flags_are_config_errors() {
    let fx = Fixture::new();
    let cfg = fx.write("c.json", &config(FINITE, &[GDECUSUM], "[3.0, 3.0]", ""));
    let out = qcd("curve", &cfg, &["--stdout"]);
    assert_eq!(code(&out), 1);
    assert!(text(&out.stderr).contains("thresholds[1]"));

    let cfg = fx.write("d.json", &config(FINITE, &[GDECUSUM], "[3.0]", ""));
    assert_eq!(
        code(&qcd("curve", &cfg, &["--stdout", "--threads", "0"])),
        1
    );
    assert_eq!(code(&qcd("curve", &cfg, &["--bogus"])), 1);
    assert_eq!(code(&qcd("curve", &cfg, &[])), 1, "no destination");
}

#[test]
fn pdc_reports_both_estimators_and_the_bound() {
    let fx = Fixture::new();
    let cfg = fx.write("c.json", &config(FINITE, &[GDECUSUM], "[3.0]", ""));
    let out = qcd("pdc", &cfg, &[]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(
        stdout.contains("renewal-reward") && stdout.contains("long-run"),
        "{stdout}"
    );
    let bound = stdout.lines().find(|l| l.contains("bound")).unwrap();
    assert!(bound.ends_with("0.500000"), "{bound}");
}

#[test]
fn pdc_of_a_full_sampling_detector_is_refused() {
    let fx = Fixture::new();
    let cfg = fx.write(
        "c.json",
        &config(FINITE, &[r#"{"type": "cusum"}"#], "[3.0]", ""),
    );
    let out = qcd("pdc", &cfg, &[]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("PDC is identically 1"));
}

#[test]
fn single_detector_and_threshold_gives_header_and_one_row() {
    let fx = Fixture::new();
    let cfg = fx.write("c.json", &config(FINITE, &[GDECUSUM], "[3.0]", ""));
    let csv = fx.path("out.csv");
    let out = qcd("curve", &cfg, &["--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    assert!(out.stdout.is_empty());
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(!body.contains('\r'));
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 13);
    assert_eq!(&fields[..3], ["gdecusum", "0.4", "3"]);
    assert_eq!(fields[9], "renewal-reward");
    assert_eq!(&fields[10..], ["200", "0", "11"]);
}

#[test]
fn curve_is_reproducible_for_a_seed() {
    let fx = Fixture::new();
    let cfg = fx.write("c.json", &config(FINITE, &[GDECUSUM], "[2.0, 3.0]", ""));
    let run = |name: &str, extra: &[&str]| {
        let p = fx.path(name);
        let mut args = vec!["--out", p.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(code(&qcd("curve", &cfg, &args)), 0);
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv", &[]);
    assert_eq!(a, run("b.csv", &[]));
    assert_eq!(a, run("c.csv", &["--threads", "2"]));
    assert_ne!(a, run("d.csv", &["--seed", "12"]));
}

#[test]
fn replication_config_gives_one_row_per_detector_and_threshold() {
    let fx = Fixture::new();
    let detectors = [r#"{"type": "cusum"}"#, r#"{"type": "gcusum"}"#, GDECUSUM];
    let cfg = fx.write(
        "c.json",
        &config(FINITE, &detectors, "[2.0, 3.0]", r#", "output": "rep.csv""#),
    );
    let out = qcd("curve", &cfg, &["--stdout"]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let rows: Vec<Vec<&str>> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for a in ["2", "3"] {
        let names: Vec<&str> = rows.iter().filter(|r| r[2] == a).map(|r| r[0]).collect();
        assert_eq!(names, ["cusum", "gcusum", "gdecusum"]);
    }
    // Full-sampling detectors use every observation.
    assert!(rows
        .iter()
        .filter(|r| r[0] != "gdecusum")
        .all(|r| r[8] == "1" && r[9] == "long-run"));
}

#[test]
fn estimator_failure_removes_the_partial_file() {
    let fx = Fixture::new();
    let cfg = fx.write(
        "c.json",
        &config(
            FINITE,
            &[r#"{"type": "cusum"}"#],
            "[1.0, 40.0]",
            r#", "horizon": 50"#,
        )
        .replace("[1, 5]", "[1]"),
    );
    let csv = fx.path("out.csv");
    let out = qcd("curve", &cfg, &["--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("censored"));
    assert!(!csv.exists());
}

#[test]
fn simulate_writes_json_reports() {
    let fx = Fixture::new();
    let cfg = fx.write("c.json", &config(FINITE, &[GDECUSUM], "[2.0]", ""));
    let out = qcd("simulate", &cfg, &[]);
    assert_eq!(code(&out), 0, "{}", text(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let report = &doc[0]["reports"][0];
    assert_eq!(doc[0]["detector"], "gdecusum");
    assert_eq!(report["threshold"], 2.0);
    assert!(report["cadd"]["points"].as_array().unwrap().len() >= 2);
}
