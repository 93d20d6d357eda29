//! End-to-end tests of the `lightcone` binary: exit codes, report shapes,
//! worked-example values and byte-level determinism.

use std::process::{Command, Output};

fn lightcone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightcone"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn frame_reports_the_product_dual() {
    let out = lightcone(&[
        "frame",
        "--chart",
        "builtin:hs_product",
        "--n",
        "1",
        "--at",
        "0,0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let frame = &v["frame"];
    let q: Vec<f64> = serde_json::from_value(frame["q"].clone()).unwrap();
    for (got, want) in q.iter().zip([-0.5, 0.0, 0.5, 0.0]) {
        assert!((got - want).abs() < 1e-9, "q = {q:?}");
    }
    assert!(frame["scalar_curvature"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
}

#[test]
fn volume_of_the_unit_square_is_one() {
    let out = lightcone(&[
        "volume",
        "--chart",
        "builtin:euclidean",
        "--n",
        "2",
        "--order",
        "16",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["volume"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn vary_on_the_sphere_flags_the_flatness_gate() {
    let out = lightcone(&[
        "vary",
        "--chart",
        "builtin:round_sphere",
        "--n",
        "2",
        "--phi",
        "const",
        "--order",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let rep = &v["report"];
    assert!(
        rep["fd_d1"].as_f64().unwrap().abs() > 0.1,
        "the sphere is not stationary"
    );
    assert!(rep["characteristic_d2"].is_null());
    let notes = rep["notes"].as_array().unwrap();
    assert!(
        notes.iter().any(|n| n.as_str().unwrap().contains("unavailable")),
        "notes = {notes:?}"
    );
}

#[test]
fn vary_sweep_writes_csv() {
    let csv = std::env::temp_dir().join("lightcone_sweep_test.csv");
    let _ = std::fs::remove_file(&csv);
    let out = lightcone(&[
        "vary",
        "--chart",
        "builtin:hs_product",
        "--n",
        "1",
        "--phi",
        "const",
        "--order",
        "6",
        "--sweep",
        "-0.2:0.2:5",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,volume"));
    assert_eq!(lines.count(), 5);
    let _ = std::fs::remove_file(&csv);
}

#[test]
fn nullspace_slice_check_passes() {
    let out = lightcone(&[
        "nullspace",
        "--chart",
        "builtin:euclidean",
        "--n",
        "2",
        "--check",
        "slices",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = [
        "frame",
        "--chart",
        "builtin:round_sphere",
        "--n",
        "2",
        "--at",
        "1.3,1.8",
    ];
    let a = lightcone(&args);
    let b = lightcone(&args);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);

    // A capped worker pool must not change a single byte either (fixed-order
    // pairwise reductions), apart from the echoed thread setting.
    let c = Command::new(env!("CARGO_BIN_EXE_lightcone"))
        .args(args)
        .env("LIGHTCONE_THREADS", "2")
        .output()
        .expect("binary runs");
    assert!(c.status.success());
    let frame_a = stdout_json(&a)["frame"].clone();
    let frame_c = stdout_json(&c)["frame"].clone();
    assert_eq!(frame_a, frame_c);
}

#[test]
fn unknown_flags_exit_one() {
    let out = lightcone(&["frame", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));

    let out = lightcone(&["novelty"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_one() {
    // Quadrature box outside the chart domain.
    let out = lightcone(&[
        "volume",
        "--chart",
        "builtin:euclidean",
        "--n",
        "2",
        "--box",
        "0,2;0,1",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let out = lightcone(&["frame", "--chart", "builtin:unknown_chart", "--n", "2", "--at", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spacelike_violation_exits_two() {
    // A sphere chart parametrized across the polar degeneracy: the induced
    // metric is singular at theta_1 = 0, a geometric check failure rather
    // than a usage error.
    let cfg = std::env::temp_dir().join("lightcone_degenerate_chart.json");
    std::fs::write(
        &cfg,
        r#"{"name": "round_sphere", "n": 2, "box": [[-0.6, 0.6], [-0.6, 0.6]]}"#,
    )
    .unwrap();
    let out = lightcone(&["frame", "--chart", cfg.to_str().unwrap(), "--at", "0,0"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not positive definite"), "stderr: {err}");
    let _ = std::fs::remove_file(&cfg);
}

#[test]
fn verify_filtered_is_green_and_machine_readable() {
    let out = lightcone(&["verify", "--chart", "builtin:euclidean", "--n", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
    let criteria = v["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 9);
    for c in criteria {
        assert_eq!(c["passed"], serde_json::Value::Bool(true), "{c}");
    }
    // One human-readable line per criterion on stderr.
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().filter(|l| l.contains("criterion")).count(), 9);
}

#[test]
fn chart_config_file_is_accepted() {
    let cfg = std::env::temp_dir().join("lightcone_chart_test.json");
    std::fs::write(
        &cfg,
        r#"{"name": "builtin:euclidean", "n": 2, "box": [[0.0, 1.0], [0.0, 1.0]]}"#,
    )
    .unwrap();
    let out = lightcone(&["frame", "--chart", cfg.to_str().unwrap(), "--at", "0.5,0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["config"]["n"], serde_json::json!(2));
    let _ = std::fs::remove_file(&cfg);
}
