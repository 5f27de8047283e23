use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn walkport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walkport"))
        .args(args)
        .env("WALKPORT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(format!("{name}-report.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Parses stdout and checks it against the shipped schema.
fn report(o: &Output, kind: &str) -> Value {
    let v: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&o.stderr)
        )
    });
    let validator = jsonschema::validator_for(&schema(kind)).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(&v)
        .map(|e| format!("{e} at {}", e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{kind} report violates its schema: {errors:#?}");
    v
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time");
    v
}

#[test]
fn position_dependent_run_reaches_unit_fidelity() {
    let o = walkport(&[
        "run",
        "--n",
        "2",
        "--m",
        "2",
        "--variant",
        "position-dependent",
        "--alpha",
        "0.6,0",
        "--beta",
        "0.8,0",
        "--mode",
        "enumerate",
    ]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "run");
    assert!((v["aggregate"]["min_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((v["aggregate"]["total_probability"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["aggregate"]["pass"], true);
    assert_eq!(v["tool"]["name"], "walkport");
}

#[test]
fn basis_secret_gives_unit_fidelity_everywhere() {
    for variant in ["homogeneous", "position-dependent"] {
        let o = walkport(&[
            "run",
            "--n",
            "2",
            "--m",
            "3",
            "--variant",
            variant,
            "--alpha",
            "1,0",
            "--beta",
            "0,0",
        ]);
        assert_eq!(code(&o), 0, "{variant}");
        let v = report(&o, "run");
        for row in v["outcomes"].as_array().unwrap() {
            assert!((row["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn homogeneous_plans_follow_omega() {
    let o = walkport(&["run", "--n", "2", "--m", "2", "--variant", "homogeneous"]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "run");
    let rows = v["outcomes"].as_array().unwrap();
    assert!(!rows.is_empty());
    for row in rows {
        let plan: Vec<&str> = row["plan"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p.as_str().unwrap())
            .collect();
        let expected = if row["omega"] == 1 { ["Z", "ZX"] } else { ["I", "X"] };
        assert_eq!(plan, expected, "{row}");
        assert!((row["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    }
    let total: f64 = rows.iter().map(|r| r["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn rz_and_receiver_choice_are_echoed() {
    let o = walkport(&[
        "run",
        "--n",
        "1",
        "--m",
        "3",
        "--variant",
        "homogeneous",
        "--rz-correction",
        "--corrected-receiver",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "run");
    assert_eq!(v["config"]["rz_correction"], true);
    assert_eq!(v["config"]["corrected_receiver"], 1);
    assert!(v["outcomes"][0]["plan"][0].as_str().unwrap().starts_with("Rz("));
}

#[test]
fn circuit_dump_lists_both_stages() {
    let o = walkport(&[
        "run",
        "--n",
        "2",
        "--m",
        "3",
        "--variant",
        "position-dependent",
        "--dump-circuit",
    ]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "run");
    assert_eq!(v["circuit"]["stage_one"].as_array().unwrap().len(), 2);
    assert_eq!(v["circuit"]["stage_two"].as_array().unwrap().len(), 3);
    let plain = report(
        &walkport(&["run", "--n", "2", "--m", "3", "--variant", "position-dependent"]),
        "run",
    );
    assert!(plain.get("circuit").is_none());
}

#[test]
fn reports_are_deterministic_apart_from_wall_time() {
    let args = [
        "run",
        "--n",
        "2",
        "--m",
        "3",
        "--variant",
        "homogeneous",
        "--mode",
        "sample",
        "--seed",
        "17",
    ];
    let a = report(&walkport(&args), "run");
    let b = report(&walkport(&args), "run");
    assert_eq!(a["outcomes"].as_array().unwrap().len(), 1);
    assert_eq!(without_wall_time(a), without_wall_time(b));

    let args = [
        "security",
        "--n",
        "2",
        "--m",
        "2",
        "--variant",
        "position-dependent",
        "--details",
    ];
    let a = without_wall_time(report(&walkport(&args), "security"));
    let b = without_wall_time(report(&walkport(&args), "security"));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn out_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = walkport(&[
        "run",
        "--n",
        "1",
        "--m",
        "2",
        "--variant",
        "homogeneous",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("PASS"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(jsonschema::is_valid(&schema("run"), &v));
}

#[test]
fn invalid_flags_exit_two() {
    let cases: &[&[&str]] = &[
        &[
            "run",
            "--n",
            "2",
            "--m",
            "2",
            "--variant",
            "homogeneous",
            "--alpha",
            "1,0",
            "--beta",
            "1,0",
        ],
        &[
            "run",
            "--n",
            "2",
            "--m",
            "2",
            "--variant",
            "homogeneous",
            "--alpha",
            "0.6",
        ],
        &["run", "--n", "2", "--m", "1", "--variant", "homogeneous"],
        &["run", "--n", "2", "--m", "2", "--variant", "diagonal"],
        &[
            "run",
            "--n",
            "2",
            "--m",
            "2",
            "--variant",
            "position-dependent",
            "--rz-correction",
        ],
        &[
            "run",
            "--n",
            "2",
            "--m",
            "2",
            "--variant",
            "homogeneous",
            "--corrected-receiver",
            "3",
        ],
        &["verify", "--n", "0", "--m", "2"],
        &["verify"],
        &[
            "security",
            "--n",
            "2",
            "--m",
            "2",
            "--variant",
            "homogeneous",
            "--measured",
            "3",
            "--probe",
            "r1",
        ],
        &[
            "security",
            "--n",
            "2",
            "--m",
            "2",
            "--variant",
            "homogeneous",
            "--probe",
            "x1",
        ],
    ];
    for args in cases {
        assert_eq!(code(&walkport(args)), 2, "{args:?}");
    }
}

#[test]
fn unnormalized_secret_is_accepted_with_normalize() {
    let o = walkport(&[
        "run",
        "--n",
        "1",
        "--m",
        "2",
        "--variant",
        "homogeneous",
        "--alpha",
        "3,0",
        "--beta",
        "0,4",
        "--normalize",
    ]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "run");
    assert!((v["secret"]["alpha"][0].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn verify_two_by_two_passes() {
    let o = walkport(&["verify", "--n", "2", "--m", "2"]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "verify");
    assert_eq!(v["pass"], true);
    assert!(v["first_failure"].is_null());
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == "dense_oracle"));
}

#[test]
fn verify_all_passes_within_budget() {
    let o = walkport(&["verify", "--all"]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "verify");
    assert_eq!(v["shapes"].as_array().unwrap().len(), 9);
    assert!(v["wall_time"].as_f64().unwrap() < 60.0);
}

#[test]
fn full_remaining_probe_is_rejected_with_the_reason() {
    let o = walkport(&[
        "security",
        "--n",
        "2",
        "--m",
        "2",
        "--variant",
        "homogeneous",
        "--probe",
        "ALL_REMAINING",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pure"));
    let o = walkport(&[
        "security",
        "--n",
        "2",
        "--m",
        "2",
        "--variant",
        "homogeneous",
        "--measured",
        "1",
        "--probe",
        "s2,r1,r2",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pure"));
}

#[test]
fn position_dependent_sweeps_pass() {
    let o = walkport(&[
        "security",
        "--n",
        "3",
        "--m",
        "2",
        "--variant",
        "position-dependent",
        "--measured",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "security");
    assert!(v["worst_deviation"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["scenario_count"], 14);

    let o = walkport(&["security", "--n", "2", "--m", "2", "--variant", "position-dependent"]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(&o, "security")["failed"], 0);
}

/// The homogeneous sweep does not come out phase blind: the lead walker on its
/// own sees the phase once the other sender has measured. The report says so
/// and the exit code follows.
#[test]
fn homogeneous_two_by_two_sweep_reports_the_leak() {
    let o = walkport(&["security", "--n", "2", "--m", "2", "--variant", "homogeneous"]);
    assert_eq!(code(&o), 1);
    let v = report(&o, "security");
    assert_eq!(v["pass"], false);
    assert!(v["worst_deviation"].as_f64().unwrap() > 0.1);
    let leaks = v["scenarios"].as_array().unwrap();
    assert_eq!(leaks.len(), v["failed"].as_u64().unwrap() as usize);
    assert!(leaks
        .iter()
        .any(|s| s["measured"] == serde_json::json!([2]) && s["probe"] == serde_json::json!(["s1"])));

    // receivers alone, after one sender, stay blind
    let o = walkport(&[
        "security",
        "--n",
        "2",
        "--m",
        "2",
        "--variant",
        "homogeneous",
        "--measured",
        "1",
        "--probe",
        "r1,r2",
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn probe_without_measured_covers_every_compatible_sender_set() {
    let o = walkport(&[
        "security",
        "--n",
        "2",
        "--m",
        "2",
        "--variant",
        "position-dependent",
        "--probe",
        "r1",
    ]);
    assert_eq!(code(&o), 0);
    let v = report(&o, "security");
    assert_eq!(v["scenario_count"], 3);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_walkport"))
        .args(["run", "--n", "1", "--m", "2", "--variant", "homogeneous"])
        .env("WALKPORT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
