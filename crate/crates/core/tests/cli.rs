//! The command-line binary: artifacts and exit statuses.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaseq::cli::exit;
use gaseq::model::{ScenarioFile, ScenarioModel};
use gaseq::scenarios;
use tempfile::TempDir;

fn write_scenario(dir: &Path, name: &str, model: &ScenarioModel) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, ScenarioFile::from_model(model).to_toml().unwrap()).unwrap();
    path
}

fn gaseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaseq")).args(args).output().unwrap()
}

fn code(out: &Output) -> u8 {
    out.status.code().expect("exited normally") as u8
}

fn run(scenarios: &[&Path], command: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<String> = Vec::new();
    for s in scenarios {
        args.push("--scenario".into());
        args.push(s.display().to_string());
    }
    args.extend(["--command".into(), command.into(), "--out".into(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    gaseq(&refs)
}

#[test]
fn explore_monopoly_reports_zero_widths() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "monopoly", &scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.0));
    let out = dir.path().join("out");
    let o = run(&[&s], "explore", &out, &["--jobs", "1"]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("intervals.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let width: f64 = row.split('\t').nth(10).unwrap().parse().unwrap();
        assert!(width.abs() <= 1e-12, "{row}");
    }
    for f in ["solution.tsv", "services.tsv", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn compare_writes_side_by_side_table() {
    let dir = TempDir::new().unwrap();
    let bc = write_scenario(dir.path(), "bc", &scenarios::hub_market(0.01));
    let cf = write_scenario(dir.path(), "cf", &scenarios::hub_market(0.0));
    let out = dir.path().join("out");
    let o = run(&[&bc, &cf], "compare", &out, &["--jobs", "2"]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    let tsv = std::fs::read_to_string(out.join("comparison.tsv")).unwrap();
    assert!(tsv.starts_with("tag\ta_min\ta_max\tb_min\tb_max"));
    assert_eq!(tsv.lines().count(), 102);
    assert!(out.join("comparison.txt").exists());
}

#[test]
fn inadmissible_scenario_fails_validation_without_artifacts() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "cartel", &scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.5));
    let out = dir.path().join("out");
    for command in ["validate", "solve", "explore"] {
        let o = run(&[&s], command, &out, &[]);
        assert_eq!(code(&o), exit::VALIDATION);
        assert!(String::from_utf8_lossy(&o.stderr).contains("cartelization excluded"));
        assert!(!out.exists());
    }
}

#[test]
fn malformed_and_missing_files() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "periods = []\nnodes = []\nsurprise = 1\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&run(&[&bad], "solve", &out, &[])), exit::VALIDATION);
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&run(&[&missing], "solve", &out, &[])), exit::IO);
    assert!(!out.exists());
}

#[test]
fn usage_errors() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "m", &scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.0));
    let out = dir.path().join("out");
    assert_eq!(code(&run(&[&s], "solve", &out, &["--tol-feas", "-1"])), exit::USAGE);
    assert_eq!(code(&run(&[&s], "compare", &out, &[])), exit::USAGE);
    assert_eq!(code(&run(&[&s, &s], "solve", &out, &[])), exit::USAGE);
    assert_eq!(code(&gaseq(&["--command", "solve"])), exit::USAGE);
    let chain = write_scenario(dir.path(), "chain", &scenarios::congested_chain());
    assert_eq!(code(&run(&[&s, &chain], "compare", &out, &[])), exit::USAGE);
}

#[test]
fn explore_resumes_from_saved_solution() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "paths", &scenarios::two_paths());
    let first = dir.path().join("first");
    assert_eq!(code(&run(&[&s], "solve", &first, &[])), exit::OK);
    let base = first.join("solution.tsv");
    let second = dir.path().join("second");
    let o = run(&[&s], "report", &second, &["--base", base.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Maximum difference"));
    let fresh = dir.path().join("fresh");
    assert_eq!(code(&run(&[&s], "explore", &fresh, &["--jobs", "1"])), exit::OK);
    assert_eq!(
        std::fs::read(second.join("intervals.tsv")).unwrap(),
        std::fs::read(fresh.join("intervals.tsv")).unwrap()
    );
}

#[test]
fn explore_refuses_an_inexact_base() {
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "paths", &scenarios::two_paths());
    let first = dir.path().join("first");
    assert_eq!(code(&run(&[&s], "solve", &first, &[])), exit::OK);
    let text = std::fs::read_to_string(first.join("solution.tsv")).unwrap();
    let spoiled: String = text
        .lines()
        .map(|l| if l.starts_with("0\t") { "0\tqP\t-\tF1\tn1\t-\tt1\t2.5".to_string() } else { l.to_string() })
        .map(|l| l + "\n")
        .collect();
    let base = dir.path().join("spoiled.tsv");
    std::fs::write(&base, spoiled).unwrap();
    let out = dir.path().join("out");
    let o = run(&[&s], "explore", &out, &["--base", base.to_str().unwrap()]);
    assert_eq!(code(&o), exit::SOLVER);
    assert!(!out.exists());
}

#[test]
fn sub_roundoff_uniqueness_tolerance_is_reported_as_breach() {
    // Interval widths carry rounding of order 1e-14; demanding 1e-300
    // turns that into a breach of the uniqueness statements.
    let dir = TempDir::new().unwrap();
    let s = write_scenario(dir.path(), "cf", &scenarios::hub_market(0.0));
    let out = dir.path().join("out");
    let o = run(&[&s], "explore", &out, &["--tol-unique", "1e-300"]);
    assert_eq!(code(&o), exit::THEORY, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}
