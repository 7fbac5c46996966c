use std::path::Path;
use std::process::Command;

use rotorwave::carpet::carpet_import;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rotorwave"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_slice(&read(p)).unwrap()
}

#[test]
fn revivals_report_two_clones_at_quarter_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    run_ok(&["revivals", "--N", "20", "--eta", "1", "--n", "4", "--out", out.to_str().unwrap()]);
    let report = json(&out.join("revival_report.json"));
    assert_eq!(report["q_predicted"], 2);
    assert_eq!(report["l"], 2);
    let features = report["features"].as_array().unwrap();
    assert_eq!(features.len(), 2);
    assert!(features.iter().all(|f| f["kind"] == "clone" && f["fidelity"].as_f64().unwrap() > 0.99));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["time_scales"]["t_rev"].as_f64().unwrap() > 0.0);
    assert!(manifest["packet"]["norm_defect"].as_f64().unwrap() < 1e-10);
}

#[test]
fn carpet_repeats_after_revival_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let t_rev = std::f64::consts::TAU.to_string();
    run_ok(&[
        "carpet", "--surrogate", "10,3,30", "--t1", &t_rev, "--tsteps", "5", "--thetas", "91", "--out",
        out.to_str().unwrap(),
    ]);
    let g = carpet_import(out.join("carpet.csv")).unwrap();
    let last = g.t_count() - 1;
    for j in 0..g.theta_count() {
        assert!((g.density(j, 0) - g.density(j, last)).abs() < 1e-9);
    }
    assert!(g.max_normalization_error() < 1e-6);
    let meta = json(&out.join("carpet_meta.json"));
    assert_eq!(meta["spectrum"]["kind"], "ideal_rotor");
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let levels = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/u238_ground_band.txt");
    let amps = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/u238_ce_surrogate.txt");
    let go = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        run_ok(&[
            "carpet",
            "--amplitudes",
            amps.to_str().unwrap(),
            "--levels",
            levels.to_str().unwrap(),
            "--tsteps",
            "41",
            "--thetas",
            "61",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        out
    };
    let a = go("a", "1");
    let b = go("b", "4");
    assert!(read(&a.join("carpet.csv")) == read(&b.join("carpet.csv")));
    assert!(read(&a.join("carpet_meta.json")) == read(&b.join("carpet_meta.json")));
    let c = go("c", "1");
    assert!(read(&a.join("carpet.csv")) == read(&c.join("carpet.csv")));
    let strip = |p: &Path| {
        let mut v = json(p);
        v["config"]["out"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a.join("manifest.json")), strip(&c.join("manifest.json")));
    let before = read(&a.join("manifest.json"));
    go("a", "1");
    assert!(before == read(&a.join("manifest.json")));
    let manifest = json(&a.join("manifest.json"));
    let t_rev = manifest["t_rev_seconds"].as_f64().unwrap();
    assert!((1e-20..=1e-18).contains(&t_rev));
}

#[test]
fn manifest_config_reruns_the_same_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_ok(&["observables", "--N", "5", "--eta", "0.3", "--tsteps", "7", "--out", first.to_str().unwrap()]);
    let manifest = json(&first.join("manifest.json"));
    let mut config = manifest["config"].clone();
    let second = dir.path().join("second");
    config["out"] = serde_json::Value::String(second.to_str().unwrap().into());
    let cfg_path = dir.path().join("rerun.json");
    std::fs::write(&cfg_path, serde_json::to_vec(&config).unwrap()).unwrap();
    run_ok(&["observables", "--config", cfg_path.to_str().unwrap()]);
    assert!(read(&first.join("observables.csv")) == read(&second.join("observables.csv")));
    let csv = String::from_utf8(read(&first.join("observables.csv"))).unwrap();
    assert!(csv.starts_with(
        "t,mean_lz,var_lx,var_ly,var_lz,uncertainty_product,min_uncertainty_rhs,autocorrelation_modulus\n"
    ));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn expand_writes_a_loadable_packet() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    run_ok(&["expand", "--N", "3", "--eta", "0", "--tol", "1e-9", "--out", out.to_str().unwrap()]);
    let wp = rotorwave::coherent_state::WavePacket::load_json(out.join("wavepacket.json")).unwrap();
    assert!(wp.is_cylindrical() && wp.norm_defect() < 1e-9);
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let out = bin().arg("evolve").output().unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("possible values") && err.contains("Usage: rotorwave"));

    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let cases: &[&[&str]] = &[
        &["expand", "--out", o],
        &["expand", "--N", "20", "--eta", "1", "--lmax", "10", "--tol", "1e-8", "--out", o],
        &["revivals", "--surrogate", "10,3,30", "--n", "4", "--levels", "/nonexistent", "--out", o],
        &["carpet", "--N", "2", "--eta", "0", "--thetas", "10000", "--tsteps", "10000", "--out", o],
        &["expand", "--N", "2", "--eta", "1.5", "--out", o],
    ];
    for args in cases {
        let out = bin().args(*args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn revivals_refuse_tabulated_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let levels = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/u238_ground_band.txt");
    let out = bin()
        .args(["revivals", "--surrogate", "10,3,30", "--n", "4", "--levels"])
        .arg(&levels)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ideal rotor"));
}
