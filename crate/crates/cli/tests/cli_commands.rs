use std::path::Path;
use std::process::{Command, Output};

use deltagas_cli::config::{PropagatorConfig, TonksConfig, VerifyConfig};
use deltagas_cli::output::sha256_hex;
use deltagas_cli::{commands, verify, CliError};
use deltagas_core::evolution::{GaussianPacket, InitialState};
use deltagas_core::propagator::free_kernel;
use num_complex::Complex64;
use serde_json::Value;

fn run(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_deltagas"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn no_output(dir: &Path) -> bool {
    let out = dir.join("out");
    !out.exists() || std::fs::read_dir(out).unwrap().next().is_none()
}

#[test]
fn single_particle_matches_free_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "propagator",
        r#"{"c":1.0,"t":0.3,"eta":0.05,"y":[0.2],"points":[[-1.0],[0.0],[0.7],[2.5]],"grid":{"eps":1e-10}}"#,
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tau = Complex64::new(0.3, -0.05);
    for r in csv_rows(&dir.path().join("out/propagator.csv")) {
        let exact = free_kernel(r[0] - 0.2, tau).unwrap();
        assert!((Complex64::new(r[1], r[2]) - exact).norm() <= 1e-8 * exact.norm());
        assert!((r[3] - exact.norm_sqr()).abs() <= 1e-7 * exact.norm_sqr());
    }
    let m = manifest(dir.path());
    assert_eq!(m["term_magnitudes"].as_array().unwrap().len(), 4);
    assert_eq!(m["grid"]["requested"]["eps"], 1e-10);
}

#[test]
fn manifest_lists_every_file_with_its_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "propagator",
        r#"{"c":1.0,"t":0.2,"eta":0.05,"y":[0.0,1.0],"xgrid":{"min":-1,"max":2,"points":13}}"#,
        &[],
    );
    assert!(o.status.success());
    let m = manifest(dir.path());
    assert_eq!(m["command"], "propagator");
    assert_eq!(m["config"]["c"], 1.0);
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(dir.path().join("out").join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
    }
    // 13 * 14 / 2 ordered points
    assert_eq!(csv_rows(&dir.path().join("out/propagator.csv")).len(), 91);
}

#[test]
fn reruns_reproduce_checksums() {
    let cfg = r#"{"c":1.0,"t":0.2,"eta":0.05,"y":[0.0,1.0],"xgrid":{"min":-1,"max":2,"points":21}}"#;
    let sums: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            assert!(run(dir.path(), "propagator", cfg, &["--threads", "1"]).status.success());
            manifest(dir.path())["files"][0]["sha256"].as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(sums[0], sums[1]);
}

#[test]
fn malformed_and_unknown_keys_exit_2_without_output() {
    for cfg in [
        r#"{"c":1.0,"t":0.2,"#,
        r#"{"c":1.0,"t":0.2,"eta":0.05,"y":[0.0,1.0],"points":[[0,1]],"colour":"red"}"#,
        r#"{"c":1.0,"t":0.2,"eta":0.05,"y":[0.0,1.0]}"#,
        r#"{"c":-1.0,"t":0.2,"eta":0.05,"y":[0.0,1.0],"points":[[0,1]]}"#,
    ] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), "propagator", cfg, &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        assert!(no_output(dir.path()));
    }
}

#[test]
fn infeasible_grid_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "propagator",
        r#"{"c":1.0,"t":0.3,"eta":1e-6,"y":[-0.3,0.8],"points":[[0,1]]}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(no_output(dir.path()));
}

#[test]
fn numerical_errors_map_to_exit_4() {
    let e: CliError = deltagas_core::Error::NonFinite { node: vec![0] }.into();
    assert_eq!(e.exit_code(), 4);
    let e: CliError = deltagas_core::Error::SolverDivergence("x".into()).into();
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn evolve_manifest_and_initial_slice() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "evolve",
        r#"{"n":2,"c":1.0,"t":[0,0.25],"eta":0.0,
            "packets":[{"a":0.25,"y0":0.0,"p":1.0},{"a":0.25,"y0":4.0,"p":-1.0}],
            "grid":{"eps":1e-10},"xgrid":{"min":-2,"max":6,"points":41}}"#,
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(dir.path());
    let slices = m["slices"].as_array().unwrap();
    assert_eq!(slices.len(), 2);
    for s in slices {
        assert!(s["truncation_bound"].as_f64().unwrap() < 1e-10);
        assert!(s["norm_squared"].as_f64().is_some());
        assert!(dir.path().join("out").join(s["file"].as_str().unwrap()).exists());
    }
    let state = InitialState::new(vec![
        GaussianPacket::new(0.25, 0.0, 1.0).unwrap(),
        GaussianPacket::new(0.25, 4.0, -1.0).unwrap(),
    ])
    .unwrap();
    let rows = csv_rows(&dir.path().join("out/psi_t0.csv"));
    let peak = rows.iter().map(|r| r[4].sqrt()).fold(0.0, f64::max);
    for r in rows {
        let f = state.psi_free(&r[..2]);
        assert!((Complex64::new(r[2], r[3]) - f).norm() <= 1e-3 * peak);
    }
}

#[test]
fn evolve_rejects_empty_time_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "evolve",
        r#"{"n":2,"c":1.0,"t":[],"packets":[{"a":0.25,"y0":0.0,"p":1.0},{"a":0.25,"y0":4.0,"p":-1.0}],
            "xgrid":{"min":-2,"max":6,"points":41}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(no_output(dir.path()));
}

#[test]
fn tonks_field_vanishes_on_the_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "tonks",
        r#"{"t":0.3,"eta":0.05,"y":[-0.4,0.9],"xgrid":{"min":-2,"max":2,"points":17}}"#,
        &[],
    );
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("out/tonks.csv"));
    let mut diagonal = 0;
    for r in rows {
        if r[0] == r[1] {
            diagonal += 1;
            assert!(r[4] <= 1e-30, "{r:?}");
        }
    }
    assert_eq!(diagonal, 17);
}

#[test]
fn tonks_one_particle_equals_propagator() {
    let tonks = TonksConfig {
        n: None,
        t: 0.4,
        eta: 0.1,
        y: vec![0.3],
        xgrid: None,
        points: Some(vec![vec![-0.5], vec![0.3], vec![1.4]]),
        format: Default::default(),
    };
    let prop: PropagatorConfig = serde_json::from_str(
        r#"{"c":1.0,"t":0.4,"eta":0.1,"y":[0.3],"points":[[-0.5],[0.3],[1.4]],"grid":{"eps":1e-12}}"#,
    )
    .unwrap();
    let a = commands::tonks_values(&tonks).unwrap();
    let (b, _, _) = commands::propagator_values(&prop).unwrap();
    for ((_, u), (_, v)) in a.iter().zip(&b) {
        assert!((u - v).norm() <= 1e-10 * u.norm());
    }
}

#[test]
fn coupling_sweep_approaches_tonks() {
    let tonks = commands::tonks_values(&TonksConfig {
        n: None,
        t: 0.3,
        eta: 0.1,
        y: vec![-0.4, 0.9],
        xgrid: None,
        points: Some(vec![vec![0.2, 0.6], vec![-0.5, 1.0]]),
        format: Default::default(),
    })
    .unwrap();
    let mut prev = f64::INFINITY;
    for c in [10.0, 100.0, 1000.0] {
        let cfg: PropagatorConfig = serde_json::from_str(&format!(
            r#"{{"c":{c},"t":0.3,"eta":0.1,"y":[-0.4,0.9],"points":[[0.2,0.6],[-0.5,1.0]]}}"#
        ))
        .unwrap();
        let (rows, _, _) = commands::propagator_values(&cfg).unwrap();
        let err = rows.iter().zip(&tonks).map(|((_, u), (_, v))| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < prev, "c={c}: {err} >= {prev}");
        prev = err;
    }
}

#[test]
fn oracle_report_for_small_lattice() {
    for c in ["0.0", "1.0"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(
            dir.path(),
            "oracle-n2",
            &format!(
                r#"{{"n":2,"c":{c},"t":[0.1,0.2],"packets":[{{"a":0.5,"y0":-1.5,"p":1.0}},{{"a":0.5,"y0":1.5,"p":-1.0}}],
                    "lattice":{{"L":6,"n_x":97,"dt":0.015625,"w":0.25}}}}"#
            ),
            &[],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/oracle_report.json")).unwrap()).unwrap();
        let slices = report["slices"].as_array().unwrap();
        assert_eq!(slices.len(), 2);
        for s in slices {
            let d = s["relative_l2"].as_f64().unwrap();
            assert!(d.is_finite() && d < 0.5, "{s}");
            assert!(s["max_symmetry_residual"].as_f64().unwrap() <= 1e-10);
        }
    }
}

#[test]
fn oracle_rejects_three_particles() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "oracle-n2",
        r#"{"n":3,"c":1.0,"t":[0.1],"packets":[{"a":0.5,"y0":-3,"p":0},{"a":0.5,"y0":0,"p":0},{"a":0.5,"y0":3,"p":0}],
            "lattice":{"L":6,"n_x":97,"dt":0.015625,"w":0.25}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(no_output(dir.path()));
}

#[test]
fn forced_failure_exits_1_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        "verify",
        r#"{"checks":[1,"s_matrix_algebra"],"tolerances":{"recursion":0.0}}"#,
        &["--seed", "5"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("amplitude_recursion"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[FAIL]  1 amplitude_recursion"));
    assert!(stdout.contains("[PASS]  2 s_matrix_algebra"));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["passed"], false);
    assert_eq!(report["checks"][1]["passed"], true);
}

#[test]
fn unknown_tolerance_or_check_is_a_config_error() {
    for cfg in [r#"{"tolerances":{"nonsense":1.0}}"#, r#"{"checks":[12]}"#, r#"{"checks":["nope"]}"#] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(dir.path(), "verify", cfg, &[]).status.code(), Some(2), "{cfg}");
    }
}

#[test]
fn seed_changes_draws_but_not_status() {
    let cfg: VerifyConfig = serde_json::from_str(r#"{"checks":[3,5,7]}"#).unwrap();
    let a = verify::run_suite(&cfg, Some(1)).unwrap();
    let b = verify::run_suite(&cfg, Some(2)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(x.passed && y.passed, "{x:?} {y:?}");
        assert_ne!(x.measured, y.measured);
    }
}
