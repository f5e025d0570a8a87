use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PROTOGRAPH: &str = r#"{"kind": "protograph", "base": [[3, 3]]}"#;
const EMAC: &str = r#"{"kind": "emac",
    "user1": {"kind": "regular", "variable_degree": 3, "check_degree": 6},
    "user2": {"kind": "regular", "variable_degree": 3, "check_degree": 6}}"#;
const SLEPIAN_WOLF: &str = r#"{"kind": "slepian_wolf", "gamma": 0.5, "p": 0.5,
    "user1": {"kind": "regular", "variable_degree": 3, "check_degree": 6},
    "user2": {"kind": "regular", "variable_degree": 3, "check_degree": 6}}"#;

struct Run {
    dir: TempDir,
    out: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().expect("exit code")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.out.stderr).into_owned()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }

    fn csv_lines(&self, name: &str) -> Vec<String> {
        fs::read_to_string(self.path(name))
            .unwrap()
            .lines()
            .map(str::to_owned)
            .collect()
    }
}

fn saturate(command: &str, config: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_saturate"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(extra)
        .output()
        .unwrap();
    Run { dir, out }
}

fn config(system: &str, analysis: &str) -> String {
    format!(r#"{{"system": {system}, "analysis": {analysis}}}"#)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn protograph_thresholds_match_the_scalar_code() {
    let run = saturate(
        "threshold",
        &config(PROTOGRAPH, r#"{"threshold": {"grid": [0.3, 0.45, 0.5, 1.0]}}"#),
        &[],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let report = run.json("threshold.json");
    let result = &report["result"]["report"];
    let bp = result["bp_threshold"]["value"].as_f64().unwrap();
    let pot = result["potential_threshold"]["value"].as_f64().unwrap();
    assert!((bp - 0.4294).abs() < 1e-3);
    assert!((pot - 0.4881).abs() < 1e-3);
    assert_eq!(report["tool"], "saturate");
    assert_eq!(report["config_sha256"].as_str().unwrap().len(), 64);
    assert!(report["version"].is_string());
    assert!(report["tolerances"]["bisection"].is_number());

    let lines = run.csv_lines("energy_gap.csv");
    assert_eq!(lines[0], "epsilon,gap,fixed_points");
    assert_eq!(lines.len(), 5);
    // below the BP threshold there is no nontrivial fixed point
    assert!(lines[1].ends_with(",inf,0"));
}

#[test]
fn empty_grid_is_a_config_error() {
    let run = saturate("threshold", &config(PROTOGRAPH, r#"{"threshold": {"grid": []}}"#), &[]);
    assert_eq!(run.code(), 2);
}

#[test]
fn unknown_keys_and_missing_blocks_are_config_errors() {
    let run = saturate(
        "threshold",
        &config(PROTOGRAPH, r#"{"threshold": {"grid": [0.5], "grdi": [0.4]}}"#),
        &[],
    );
    assert_eq!(run.code(), 2);
    let run = saturate("coupled", &config(PROTOGRAPH, r#"{"threshold": {"grid": [0.5]}}"#), &[]);
    assert_eq!(run.code(), 2);
    let run = saturate("verify", "{not json", &[]);
    assert_eq!(run.code(), 2);
}

#[test]
fn theta_sweep_writes_one_report_per_theta() {
    let run = saturate(
        "threshold",
        &config(
            SLEPIAN_WOLF,
            r#"{"threshold": {"grid": [0.1, 0.3], "theta_sweep": [0.25, 0.5, 0.75, 1.0]}}"#,
        ),
        &[],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let mut previous = f64::INFINITY;
    for tag in ["0p25", "0p5", "0p75", "1"] {
        let r = run.json(&format!("threshold_theta_{tag}.json"));
        let pot = r["result"]["report"]["potential_threshold"]["value"].as_f64().unwrap();
        // a cleaner second channel lets the first one tolerate more erasures
        assert!(pot < previous);
        previous = pot;
        assert_eq!(run.csv_lines(&format!("energy_gap_theta_{tag}.csv")).len(), 3);
    }
    let run = saturate(
        "threshold",
        &config(PROTOGRAPH, r#"{"threshold": {"grid": [0.5], "theta_sweep": [0.5]}}"#),
        &[],
    );
    assert_eq!(run.code(), 2);
}

#[test]
fn saturation_demo_and_profile_shape() {
    let run = saturate(
        "coupled",
        &config(
            PROTOGRAPH,
            r#"{"coupled": {"half_length": [16], "window": [3], "epsilon": [0.47, 0.5], "record_every": 7}}"#,
        ),
        &[],
    );
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let summary = run.json("coupled.json");
    let runs = summary["result"]["runs"].as_array().unwrap();
    assert_eq!(runs[0]["decoded"], true);
    assert_eq!(runs[1]["decoded"], false);
    for r in runs {
        let recorded = r["iterations_recorded"].as_u64().unwrap() as usize;
        let lines = run.csv_lines(r["profile"].as_str().unwrap());
        assert_eq!(lines[0], "iteration,position,component,value");
        assert_eq!(lines.len() - 1, recorded * (2 * 16 + 3) * 2);
    }
    let bounds = summary["result"]["width_bounds"].as_array().unwrap();
    assert!(bounds[0]["min_window"].as_f64().unwrap() > 3.0);
    assert!(bounds[1]["min_window"].is_null());
}

#[test]
fn zero_window_is_a_config_error() {
    let run = saturate(
        "coupled",
        &config(PROTOGRAPH, r#"{"coupled": {"half_length": [16], "window": [0], "epsilon": [0.4]}}"#),
        &[],
    );
    assert_eq!(run.code(), 2);
}

#[test]
fn iteration_budget_exhaustion_is_a_numerical_failure() {
    let run = saturate(
        "coupled",
        &config(
            PROTOGRAPH,
            r#"{"coupled": {"half_length": [16], "window": [3], "epsilon": [0.47], "max_iter": 5}}"#,
        ),
        &[],
    );
    assert_eq!(run.code(), 3);
}

#[test]
fn example_systems_verify_cleanly() {
    for system in [PROTOGRAPH, EMAC, SLEPIAN_WOLF] {
        let run = saturate("verify", &config(system, r#"{"verify": {"samples": 200}}"#), &[]);
        assert_eq!(run.code(), 0, "{}", run.stderr());
        assert_eq!(run.json("verify.json")["result"]["passed"], true);
        let lines = run.csv_lines("checks.csv");
        assert!(lines[0].starts_with("check,passed"));
        assert!(lines.len() > 20);
    }
}

#[test]
fn corrupted_potential_fails_the_gradient_check() {
    let run = saturate(
        "verify",
        &config(PROTOGRAPH, r#"{"verify": {"samples": 100, "corrupt_variable_potential": true}}"#),
        &[],
    );
    assert_eq!(run.code(), 4);
    assert!(run.stderr().contains("variable-potential-gradient"), "{}", run.stderr());
}

#[test]
fn zero_samples_is_a_config_error() {
    let run = saturate("verify", &config(PROTOGRAPH, r#"{"verify": {"samples": 0}}"#), &[]);
    assert_eq!(run.code(), 2);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let analysis = r#"{"threshold": {"grid": [0.2, 0.3, 0.4]},
        "coupled": {"half_length": [8], "window": [3], "epsilon": [0.3], "record_every": 5},
        "verify": {"samples": 100, "seed": 9}}"#;
    let cfg = config(EMAC, analysis);
    for command in ["threshold", "coupled", "verify"] {
        let a = saturate(command, &cfg, &[]);
        let b = saturate(command, &cfg, &["--jobs", "1"]);
        let c = saturate(command, &cfg, &["--jobs", "3"]);
        assert_eq!(a.code(), 0, "{}", a.stderr());
        let files = read_dir_sorted(&a.dir.path().join("out"));
        assert!(!files.is_empty());
        assert_eq!(files, read_dir_sorted(&b.dir.path().join("out")), "{command}");
        assert_eq!(files, read_dir_sorted(&c.dir.path().join("out")), "{command}");
    }
}
