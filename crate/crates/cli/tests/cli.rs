use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpt_core::evolution::phase_averaged_with;
use cpt_core::presets::fig2_context;
use cpt_core::DensityMatrix4;

fn cptsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cptsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run cptsim")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("cptsim-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn zero_drive_stays_in_ground_state() {
    let out = scratch("zero");
    let o = cptsim(&[
        "simulate",
        "--set",
        "drive.omega_p_mhz=0",
        "--set",
        "drive.omega_c_mhz=0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&out.join("trajectory.csv"));
    assert!(r.len() > 100);
    assert!(r.iter().all(|row| row[1] == 1.0 && row[3] == 0.0));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert!(meta["tool_version"].as_str().unwrap().starts_with("cpt-core"));
    assert!(meta["config"]["decoherence"]["tphi_02_ns"].is_number());
}

#[test]
fn final_p2_matches_library_bit_for_bit() {
    let out = scratch("bitexact");
    let o = cptsim(&["simulate", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let last = rows(&out.join("trajectory.csv")).pop().unwrap();
    let ctx = fig2_context();
    let lib = phase_averaged_with(
        &DensityMatrix4::ground(),
        &ctx.device,
        &ctx.drive,
        &ctx.decoherence,
        &ctx.integrator,
        &ctx.hamiltonian,
        ctx.n_phases,
    )
    .unwrap()
    .final_populations();
    assert_eq!(last[0], 30.0);
    assert_eq!(last[3].to_bits(), lib[2].to_bits());
}

#[test]
fn rerun_from_echoed_config_is_identical() {
    let a = scratch("echo-a");
    let b = scratch("echo-b");
    let o = cptsim(&[
        "simulate",
        "--set",
        "preset=\"fig3\"",
        "--set",
        "drive.t0_ns=6",
        "--set",
        "drive.rel_phase_rad=0.7",
        "--phases",
        "4",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = a.join("run_config.toml");
    let o = cptsim(&["simulate", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trajectory.csv", "trajectory.json", "run_config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let o = cptsim(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.toml"));
}

#[test]
fn unknown_key_exits_2_with_line() {
    let d = scratch("badkey");
    let cfg = d.join("bad.toml");
    std::fs::write(&cfg, "[drive]\nfp_ghz = 6.0\nfc_mhz = 5850\n").unwrap();
    let o = cptsim(&["simulate", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("fc_mhz"), "{e}");
}

#[test]
fn invalid_value_exits_2() {
    let o = cptsim(&["simulate", "--set", "decoherence.tphi_02_ns=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn positivity_failure_exits_3() {
    let d = scratch("pos");
    let o = cptsim(&[
        "simulate",
        "--set",
        "drive.fp_ghz=6.08",
        "--set",
        "drive.fc_ghz=5.78",
        "--set",
        "drive.t0_ns=5",
        "--set",
        "integrator.positivity_tolerance=1e-6",
        "--out",
        d.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("positivity"));
}

#[test]
fn empty_csv_exits_2() {
    let d = scratch("empty");
    let f = d.join("empty.csv");
    std::fs::write(&f, "").unwrap();
    let o = cptsim(&["fit", f.to_str().unwrap(), "--free", "tphi_01", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn wrong_columns_exit_2() {
    let d = scratch("schema");
    let f = d.join("obs.csv");
    std::fs::write(&f, "time,value\n0,0\n1,0.1\n").unwrap();
    let o = cptsim(&["fit", f.to_str().unwrap(), "--free", "tphi_01"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_ns"));
}

#[test]
fn fit_without_free_parameters_exits_2() {
    let d = scratch("nofree");
    let f = d.join("obs.csv");
    std::fs::write(&f, "t_ns,p0,p1,p2,p3\n0,1,0,0,0\n").unwrap();
    let o = cptsim(&["fit", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reproduce_rejects_physics_overrides() {
    let o = cptsim(&["reproduce", "fig2", "--set", "drive.fp_ghz=6.0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_recovers_self_generated_trace() {
    let d = scratch("selffit");
    let common = [
        "--set",
        "preset=\"fig3\"",
        "--set",
        "drive.t0_ns=40",
        "--set",
        "integrator.record_stride=100",
        "--dt",
        "0.02",
        "--phases",
        "8",
        "--out",
        d.to_str().unwrap(),
    ];
    let mut args = vec!["simulate"];
    args.extend(common);
    let o = cptsim(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = d.join("trajectory.csv");
    let mut args = vec!["fit", traj.to_str().unwrap(), "--free", "tphi_01"];
    args.extend(common);
    let o = cptsim(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fit_report.json")).unwrap()).unwrap();
    let v = rep["params"][0]["value"].as_f64().unwrap();
    assert!((v - 12.0).abs() < 0.02 * 12.0, "{v}");
    assert_eq!(rep["converged"], true);
    assert_eq!(rep["schema_version"], 1);
}
