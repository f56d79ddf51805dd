//! Command-line behavior: exit codes, config defaults, flag overrides and
//! snapshot resolution.

use std::path::Path;
use std::process::{Command, Output};

fn zenoq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zenoq"))
        .args(args)
        .output()
        .expect("binary must run")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn missing_snapshot_path_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rabi.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-rabi-v1","thetas":[1.0],"n_min":1,"n_max":1,
           "backend":"sampling","snapshot":"/no/such/snapshot.json","seed":1}"#,
    );
    let out = zenoq(&[
        "rabi",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/no/such/snapshot.json"), "{stderr}");
}

#[test]
fn default_shots_is_20000() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rabi.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-rabi-v1","thetas":[1.5707963267948966],"n_min":1,"n_max":1,
           "backend":"ideal","snapshot":"nairobi-like"}"#,
    );
    let out = zenoq(&[
        "rabi",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("rabi_sweep.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(3), Some("20000"), "{row}");
}

#[test]
fn sampling_without_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rabi.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-rabi-v1","thetas":[1.0],"n_min":1,"n_max":1,
           "backend":"sampling","snapshot":"nairobi-like"}"#,
    );
    let out = zenoq(&["rabi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn shots_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rabi.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-rabi-v1","thetas":[1.0],"n_min":0,"n_max":1,"shots":500,
           "backend":"sampling","snapshot":"lima-like","seed":3}"#,
    );
    let out = zenoq(&[
        "rabi",
        "--config",
        cfg.to_str().unwrap(),
        "--shots",
        "1234",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("rabi_sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",1234,"));
}

#[test]
fn snapshot_dir_env_var_resolves_file_names() {
    let dir = tempfile::tempdir().unwrap();
    let snap_dir = dir.path().join("snaps");
    std::fs::create_dir_all(&snap_dir).unwrap();
    let snap = zenoq::DeviceSnapshot::linear(3);
    write(&snap_dir.join("tiny.json"), &snap.to_json());
    let cfg = dir.path().join("rabi.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-rabi-v1","thetas":[1.0],"n_min":1,"n_max":2,"shots":100,
           "backend":"sampling","snapshot":"tiny.json","seed":5}"#,
    );
    let out = Command::new(env!("CARGO_BIN_EXE_zenoq"))
        .args([
            "rabi",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .env("ZENOQ_SNAPSHOT_DIR", snap_dir.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_schema_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rabi.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-rabi-v9","thetas":[1.0],"n_min":1,"n_max":1,
           "backend":"ideal","snapshot":"nairobi-like"}"#,
    );
    let out = zenoq(&["rabi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transpile_writes_lowered_circuit_and_schedule_report() {
    let dir = tempfile::tempdir().unwrap();
    let circ = dir.path().join("circ.json");
    write(
        &circ,
        r#"{"schema":"zenoq-circuit-v1","n_qubits":3,"n_clbits":0,"instructions":[
            {"kind":"u3","qubits":[0],"params":[0.5,-1.5707963267948966,1.5707963267948966]},
            {"kind":"cx","qubits":[0,2]},
            {"kind":"delay","qubits":[1],"dt":41000}]}"#,
    );
    let out = zenoq(&[
        "transpile",
        "--circuit",
        circ.to_str().unwrap(),
        "--snapshot",
        "lima-like",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lowered =
        std::fs::read_to_string(dir.path().join("lowered_circuit.json")).unwrap();
    let parsed = zenoq::Circuit::from_json(&lowered).unwrap();
    let device = zenoq::DeviceSnapshot::builtin("lima-like").unwrap();
    for instr in parsed.instructions() {
        if instr.is_gate() {
            assert!(device.is_basis_gate(instr.name()));
        }
    }
    let report =
        std::fs::read_to_string(dir.path().join("schedule_report.json")).unwrap();
    assert!(report.contains("\"quantized_dt\": 41008"), "{report}");
}

#[test]
fn fit_command_round_trips_a_decay_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("decay.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-decay-v1","t_grid_us":[0.0,2.05,4.1,6.15,8.2,10.25],
           "n_measurements":6,
           "model":{"kind":"pseudomode","g_rad_per_us":0.06329113924050633},
           "backend":"sampling","snapshot":"linear-8","seed":11}"#,
    );
    let out = zenoq(&[
        "decay",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let refit = dir.path().join("refit.json");
    let out = zenoq(&[
        "fit",
        "--input",
        dir.path().join("decay_sweep.csv").to_str().unwrap(),
        "--n",
        "6",
        "--out",
        refit.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let original = std::fs::read_to_string(dir.path().join("zeno_fit.json")).unwrap();
    let refitted = std::fs::read_to_string(&refit).unwrap();
    let t_of = |text: &str| -> f64 {
        let v: serde_json::Value = serde_json::from_str(text).unwrap();
        v["t_us"].as_f64().unwrap()
    };
    assert!((t_of(&original) - t_of(&refitted)).abs() < 1e-9);
}

#[test]
fn empty_time_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("decay.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-decay-v1","t_grid_us":[],"n_measurements":3,
           "model":{"kind":"snapshot"},"backend":"noisy","snapshot":"nairobi-like","seed":1}"#,
    );
    let out = zenoq(&["decay", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn calibrate_rejects_oversized_registers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cal.json");
    write(
        &cfg,
        r#"{"schema":"zenoq-calibrate-v1","m_qubits":8,"snapshot":"nairobi-like","seed":1}"#,
    );
    let out = zenoq(&["calibrate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
