use std::process::{Command, Output};

use dslab::cli::config::ExperimentConfig;
use dslab::cli::report::{Report, SCHEMA};

fn dslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dslab")).args(args).env_remove("DSLAB_OUT_DIR").output().expect("binary runs")
}

fn report(out: &Output) -> Report {
    Report::from_json(&out.stdout).expect("stdout is a report")
}

#[test]
fn en_measure_single_index() {
    let out = dslab(&["en-measure", "--n", "5", "--psi", "1/2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r.schema, SCHEMA);
    assert_eq!(r.rows[0]["measure"], "4/5");
    assert!(r.passed);
}

#[test]
fn malformed_arguments_exit_with_2() {
    for args in [
        &["en-measure", "--n", "5", "--psi", "half"][..],
        &["en-measure", "--n", "5", "--psi", "{\"family\": \"nope\"}"],
        &["no-such-command"],
        &["padic", "--p", "4", "--max-n", "10", "--psi", "1/2"],
    ] {
        let out = dslab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn help_and_version_exit_with_0() {
    assert_eq!(dslab(&["--help"]).status.code(), Some(0));
    assert_eq!(dslab(&["--version"]).status.code(), Some(0));
}

#[test]
fn real_suite_passes() {
    let out = dslab(&["verify", "--field", "real", "--max-n", "300"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r.passed);
    assert!(r.rows.iter().all(|row| row["failures"] == 0));
    assert!(r.summary.contains_key("max_pv_ratio"));
}

#[test]
fn failed_check_exits_with_1_and_lists_operands() {
    // The stated p-adic scaling inequality has counterexamples.
    let out = dslab(&["verify", "--field", "padic"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert!(!r.passed);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAILED union_scaling"), "{stderr}");
    assert!(r.failures().all(|v| v.check == "union_scaling"));
}

#[test]
fn json_report_round_trips() {
    let out = dslab(&["overlap", "--m", "3", "--n", "5", "--psi", "1/4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r.to_json(), out.stdout);
}

#[test]
fn blocks_csv_splits_rationals() {
    let out = dslab(&["blocks", "--boundaries", "2,10,40", "--psi", "1/4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,S_num,S_den,B_num,B_den,Q_num,Q_den,R_num,R_den,exact"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "seed = 9\n[psi]\nfamily = \"constant\"\nvalue = \"1/3\"\nlo = 2\nhi = 30\n[ranges]\nlo = 2\nmax_n = 30\n")
        .unwrap();
    let out = dslab(&["--config", path.to_str().unwrap(), "union-z", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r.config.seed, 4);
    let again = ExperimentConfig::from_toml(&r.config.to_toml()).unwrap();
    assert_eq!(again, r.config);
}

#[test]
fn out_dir_receives_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dslab"))
        .args(["en-measure", "--n", "7", "--psi", "1/3", "--out", "nested/e7.json"])
        .env("DSLAB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let written = std::fs::read(dir.path().join("e7.json")).unwrap();
    assert_eq!(report(&Output { stdout: written, ..out }).rows[0]["n"], 7);
    assert!(!dir.path().join("e7.json.partial").exists());
}

#[test]
fn timing_is_opt_in() {
    let plain = report(&dslab(&["en-measure", "--n", "4", "--psi", "1/2"]));
    let timed = report(&dslab(&["en-measure", "--n", "4", "--psi", "1/2", "--timing"]));
    assert!(plain.timing_ms.is_none());
    assert!(timed.timing_ms.is_some());
}
