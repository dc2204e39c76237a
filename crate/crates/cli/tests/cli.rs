use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

use cyclelab_cli::config::ExperimentConfig;
use cyclelab_cli::golden::{config_text, list_golden, run_golden};
use cyclelab_cli::report::Report;
use cyclelab_cli::run::echo_revalidates;
use cyclelab_cli::{exit, run};

fn bundled(file: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(config_text(file).unwrap()).unwrap()
}

fn cyclelab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cyclelab")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn config_path(file: &str) -> String {
    format!("{}/configs/{file}", env!("CARGO_MANIFEST_DIR"))
}

fn without_wall_time(dir: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wallTime").unwrap();
    v
}

#[test]
fn manifest_is_stable_and_complete() {
    let m = list_golden();
    assert!(m.len() >= 10);
    assert_eq!(m, list_golden());
    let mut names: Vec<&str> = m.iter().map(|e| e.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), m.len());
    for e in &m {
        assert!(config_text(&e.config).is_some(), "{} is not bundled", e.config);
        let on_disk = fs::read_to_string(config_path(&e.config)).unwrap();
        assert_eq!(on_disk, config_text(&e.config).unwrap());
    }
    for code in [exit::PASS, exit::ASSERTION, exit::CONFIG, exit::NUMERICAL] {
        assert!(m.iter().any(|e| e.expected_exit == code), "no entry exits {code}");
    }
}

#[test]
fn every_golden_entry_exits_as_declared() {
    let dir = tempfile::tempdir().unwrap();
    for e in list_golden() {
        let r = run_golden(&e, dir.path());
        assert!(r.as_expected(), "{}: exit {} (expected {}), error {:?}", e.name, r.exit, e.expected_exit, r.error);
        if let Some(report) = &r.report {
            // schema round trip: the echo re-validates to the same config
            let echo = echo_revalidates(report).unwrap();
            assert_eq!(echo, bundled(&e.config));
            assert_eq!(Report::read(&dir.path().join(&e.name)).unwrap(), *report);
            for a in &report.artifacts {
                assert!(dir.path().join(&e.name).join(a).exists());
            }
        }
    }
}

#[test]
fn linear_flow_converges_to_the_rotation_vector() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&bundled("linear_flow.json"), dir.path()).unwrap();
    assert!(report.passed);
    let r3 = 3f64.sqrt();
    for route in report.results["routes"].as_array().unwrap() {
        assert_eq!(route["converged"], true);
        let v = route["value"].as_array().unwrap();
        assert!((v[0].as_f64().unwrap() - 1.0 / r3).abs() < 1e-3);
        assert!((v[1].as_f64().unwrap() - 2f64.sqrt() / r3).abs() < 1e-3);
    }
    assert_eq!(report.results["routes"].as_array().unwrap().len(), 5);
}

#[test]
fn counterexample_writes_clusters_and_separates() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&bundled("counterexample.json"), dir.path()).unwrap();
    let sep = report.assertions.iter().find(|a| a.name == "balancedSeparation").unwrap();
    assert!(sep.passed);
    let csv = fs::read_to_string(dir.path().join("balanced.csv")).unwrap();
    assert!(csv.starts_with("coord_0,coord_1,s,t\n"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn reports_are_deterministic() {
    for file in ["linear_flow.json", "counterexample.json", "stable_norm_conformal.json", "exhaustion.json"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let (code, _, err) = cyclelab(&[
                bundled(file).subcommand(),
                "--config",
                &config_path(file),
                "--out",
                d.path().to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "{file}: {err}");
        }
        assert_eq!(without_wall_time(a.path()), without_wall_time(b.path()), "{file}");
        let report = Report::read(a.path()).unwrap();
        for art in &report.artifacts {
            assert_eq!(fs::read(a.path().join(art)).unwrap(), fs::read(b.path().join(art)).unwrap(), "{file}: {art}");
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config_path("golden_solenoid.json");
    for (d, threads) in [(&a, "1"), (&b, "4")] {
        let (code, _, err) = cyclelab(&["solenoid", "--config", &cfg, "--out", d.path().to_str().unwrap(), "--threads", threads]);
        assert_eq!(code, 0, "{err}");
    }
    assert_eq!(without_wall_time(a.path()), without_wall_time(b.path()));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let (code, stdout, _) = cyclelab(&["asymptotic", "--config", &config_path("linear_flow.json"), "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("PASS routesAgree"));

    let (code, stdout, _) = cyclelab(&["asymptotic", "--config", &config_path("oscillator_converged.json"), "--out", out]);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL converged"));

    let (code, _, stderr) = cyclelab(&["asymptotic", "--config", &config_path("negative_tol.json"), "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("at tol"), "{stderr}");

    let (code, _, stderr) = cyclelab(&["asymptotic", "--config", &config_path("unknown_field.json"), "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("tolerance"), "{stderr}");

    let (code, _, stderr) = cyclelab(&["solenoid", "--config", &config_path("linear_flow.json"), "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("subcommand"), "{stderr}");

    let (code, _, _) = cyclelab(&["asymptotic", "--config", "/nonexistent/config.json", "--out", out]);
    assert_eq!(code, 2);

    let (code, _, stderr) = cyclelab(&["asymptotic", "--config", &config_path("ode_underflow.json"), "--out", out]);
    assert_eq!(code, 3);
    assert!(stderr.contains("integration failure"), "{stderr}");
}

#[test]
fn golden_listing() {
    let (code, stdout, _) = cyclelab(&["golden"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), list_golden().len());
    assert!(stdout.contains("linear-flow"));
}

#[test]
fn field_paths_in_errors() {
    let cases = [
        (r#"{"schemaVersion": 1, "subcommand": "stablenorm", "geometry": {"dim": 2}, "classes": [[1, "x"]], "nMax": 4, "resolution": 8}"#, "classes[0][1]"),
        (r#"{"schemaVersion": 1, "subcommand": "stablenorm", "geometry": {"dim": 2, "bogus": 1}, "classes": [[1, 0]], "nMax": 4, "resolution": 8}"#, "geometry.bogus"),
        (r#"{"schemaVersion": 2, "subcommand": "stablenorm", "geometry": {"dim": 2}, "classes": [[1, 0]], "nMax": 4, "resolution": 8}"#, "schemaVersion"),
        (r#"{"schemaVersion": 1, "subcommand": "stablenorm", "geometry": {"dim": 2}, "classes": [[1, 0]], "nMax": 4, "resolution": 1}"#, "resolution"),
        (r#"{"schemaVersion": 1, "subcommand": "nope"}"#, "subcommand"),
        (r#"{"schemaVersion": 1}"#, "subcommand"),
        (r#"[1, 2]"#, "(root)"),
    ];
    for (text, path) in cases {
        let e = ExperimentConfig::from_json(text).unwrap_err();
        assert_eq!(e.path, path, "{text}: {e}");
    }
}

#[test]
fn configs_round_trip_through_serialization() {
    for e in list_golden().iter().filter(|e| e.expected_exit != exit::CONFIG) {
        let cfg = bundled(&e.config);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg, "{}", e.name);
    }
}
