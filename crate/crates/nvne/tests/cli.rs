//! End-to-end runs of the `nvne` binary and the scenario layer.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nvne::scenario::{preset, preset_names, run_scenario, ScenarioConfig, Summary, SUMMARY_FILE, TRAJECTORY_FILE};
use tempfile::TempDir;

fn nvne(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nvne"));
    cmd.args(args).env_remove("NVNE_OUT");
    if let Some(dir) = env_out {
        cmd.env("NVNE_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SPIN: &str = r#"{
  "id": "spin",
  "kind": "evolve",
  "system": { "dimension": 2, "hamiltonian": { "type": "spin-z", "mu": 1.0 } },
  "state": { "type": "bloch", "lam": 0.75, "phi": 1.2, "psi": 0.3 },
  "q": 2.0,
  "integrator": { "dt": 0.001, "t_final": 2.0, "record_every": 10 }
}"#;

#[test]
fn every_preset_round_trips_and_validates() {
    let names: Vec<_> = preset_names().collect();
    assert_eq!(names.len(), 11);
    for name in names {
        let cfg = preset(name).unwrap();
        assert_eq!(cfg.id, name);
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{name}");
        nvne::scenario::check_config(&cfg).unwrap();
    }
}

#[test]
fn summary_round_trips_to_the_same_config() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = write_config(tmp.path(), "spin.json", SPIN);
    let out = tmp.path().join("out");
    let o = nvne(&["run", &cfg_path, "--out", out.to_str().unwrap(), "--quiet"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary.config, ScenarioConfig::from_json(SPIN).unwrap());
    assert!(summary.report.passed);
    assert!(summary.report.wall_clock_seconds >= 0.0);
    assert!(summary.report.invariants.is_some());
}

#[test]
fn csv_output_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = write_config(tmp.path(), "spin.json", SPIN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = nvne(&["run", &cfg_path, "--out", dir.to_str().unwrap(), "--quiet"], None);
        assert_eq!(o.status.code(), Some(0));
    }
    let ta = fs::read(a.join(TRAJECTORY_FILE)).unwrap();
    assert_eq!(ta, fs::read(b.join(TRAJECTORY_FILE)).unwrap());
}

#[test]
fn trajectory_csv_layout_and_conserved_columns() {
    let run = run_scenario(&ScenarioConfig::from_json(SPIN).unwrap()).unwrap();
    let csv = nvne::scenario::trajectory_csv(run.trajectory.as_ref().unwrap());
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,re_rho_00,im_rho_00,re_rho_10,im_rho_10,re_rho_01,im_rho_01,re_rho_11,im_rho_11,C1,C2,C3,C4,C5,Hq"
    );
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 201);
    let hq0 = rows[0][14];
    assert!(rows.iter().all(|r| (r[14] - hq0).abs() < 1e-8));
    for c in 9..14 {
        assert!(rows.iter().all(|r| (r[c] - rows[0][c]).abs() < 1e-12));
    }
}

#[test]
fn maximally_mixed_casimirs_are_constant() {
    let text = SPIN.replace(
        r#"{ "type": "bloch", "lam": 0.75, "phi": 1.2, "psi": 0.3 }"#,
        r#"{ "type": "maximally-mixed", "dim": 2 }"#,
    );
    let run = run_scenario(&ScenarioConfig::from_json(&text).unwrap()).unwrap();
    let traj = run.trajectory.unwrap();
    for s in &traj.invariants {
        assert_eq!(s.casimirs, traj.invariants[0].casimirs);
    }
}

#[test]
fn nonpositive_dt_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    for dt in ["0.0", "-0.001"] {
        let cfg_path = write_config(tmp.path(), "bad.json", &SPIN.replace("\"dt\": 0.001", &format!("\"dt\": {dt}")));
        for cmd in ["check", "run"] {
            let o = nvne(&[cmd, &cfg_path], None);
            assert_eq!(o.status.code(), Some(2), "{cmd} dt={dt}");
            assert!(stderr(&o).contains("integrator.dt"), "{}", stderr(&o));
        }
    }
}

#[test]
fn unknown_and_missing_keys_are_named() {
    let tmp = TempDir::new().unwrap();
    let typo = write_config(tmp.path(), "typo.json", &SPIN.replace("\"record_every\"", "\"record_evry\""));
    let o = nvne(&["check", &typo], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("record_evry"));

    let missing = write_config(tmp.path(), "missing.json", &SPIN.replace("\"q\": 2.0,", ""));
    let o = nvne(&["check", &missing], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`q`"), "{}", stderr(&o));

    let o = nvne(&["check", "/nonexistent/config.json"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_hermitian_hamiltonian_is_rejected_on_load() {
    let tmp = TempDir::new().unwrap();
    let text = SPIN.replace(
        r#"{ "type": "spin-z", "mu": 1.0 }"#,
        r#"{ "type": "matrix", "entries": [[[1, 0], [0, 1]], [[0, 0], [-1, 0]]] }"#,
    );
    let o = nvne(&["check", &write_config(tmp.path(), "h.json", &text)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("system.hamiltonian"));
}

#[test]
fn domain_error_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let text = r#"{ "id": "outside", "kind": "equilibrium", "q": 3.0, "thermo": { "beta": 1.0 } }"#;
    let o = nvne(&["run", &write_config(tmp.path(), "eq.json", text), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn failed_check_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let text = SPIN.replace("\"q\": 2.0,", "\"q\": 2.0, \"thresholds\": { \"eigenvalue_drift\": 0.0 },");
    let o = nvne(&["run", &write_config(tmp.path(), "strict.json", &text), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn output_directory_precedence() {
    let tmp = TempDir::new().unwrap();
    let from_cfg = tmp.path().join("cfg");
    let text = SPIN.replace(
        "\"q\": 2.0,",
        &format!("\"q\": 2.0, \"output\": {{ \"directory\": {:?} }},", from_cfg.to_str().unwrap()),
    );
    let cfg_path = write_config(tmp.path(), "spin.json", &text);
    let env_dir = tmp.path().join("env");
    let flag_dir = tmp.path().join("flag");

    nvne(&["run", &cfg_path, "--quiet"], None);
    assert!(from_cfg.join(SUMMARY_FILE).exists());

    nvne(&["run", &cfg_path, "--quiet"], Some(&env_dir));
    assert!(env_dir.join(SUMMARY_FILE).exists());

    nvne(&["run", &cfg_path, "--quiet", "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert!(flag_dir.join(SUMMARY_FILE).exists());
}

#[test]
fn formats_select_the_files_written() {
    let tmp = TempDir::new().unwrap();
    let text = SPIN.replace("\"q\": 2.0,", "\"q\": 2.0, \"output\": { \"formats\": [\"json\"] },");
    let out = tmp.path().join("o");
    nvne(&["run", &write_config(tmp.path(), "j.json", &text), "--quiet", "--out", out.to_str().unwrap()], None);
    assert!(out.join(SUMMARY_FILE).exists());
    assert!(!out.join(TRAJECTORY_FILE).exists());
}

#[test]
fn precession_example_reports_twice_the_linear_rate() {
    let r = run_scenario(&preset("spin-precession").unwrap()).unwrap().report;
    assert!(r.passed);
    assert!((r.headline["omega_measured"] - 2.0).abs() < 1e-5);
    assert_eq!(r.headline["omega_predicted"], 2.0);
}

#[test]
fn equilibrium_example() {
    let r = run_scenario(&preset("equilibrium").unwrap()).unwrap().report;
    assert!((r.headline["lam_eq"] - 0.75).abs() < 1e-10);
    assert!(r.headline["second_derivative"] > 0.0);
}

#[test]
fn biased_dephasing_plot_decays() {
    let tmp = TempDir::new().unwrap();
    let o = nvne(&["run", "preset:dephasing-biased", "--quiet", "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("dephasing.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,offdiag_abs,purity");
    let col: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let early = col[..col.len() / 10].iter().cloned().fold(0.0, f64::max);
    assert!(*col.last().unwrap() < 0.1 * early);
}

#[test]
fn presets_command_lists_and_prints() {
    let o = nvne(&["presets"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l == "dephasing"));
    let o = nvne(&["presets", "larmor"], None);
    let cfg = ScenarioConfig::from_json(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert_eq!(cfg, preset("larmor").unwrap());
    assert_eq!(nvne(&["presets", "nope"], None).status.code(), Some(2));
}
