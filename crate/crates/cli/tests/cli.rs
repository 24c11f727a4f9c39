use deformed_sine_cli::{run_command, RunManifest};
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, Option<RunManifest>) {
    let argv = std::iter::once("dsine").chain(args.iter().copied());
    run_command(argv)
}

fn out(dir: &Path, sub: &str) -> String {
    dir.join(sub).display().to_string()
}

fn det_json(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("det.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn zero_weight_has_unit_determinant() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "a");
    let (code, m) = run(&["det", "--weight", "none", "--s", "1", "--out-dir", &d]);
    assert_eq!(code, 0);
    let v = det_json(Path::new(&d));
    assert_eq!(v["det"][0].as_f64().unwrap(), 1.0);
    assert_eq!(v["det"][1].as_f64().unwrap(), 0.0);
    assert_eq!(m.unwrap().command, "det");
}

#[test]
fn fermi_determinant_lies_in_unit_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "b");
    let (code, _) = run(&[
        "det",
        "--weight",
        "fermi",
        "--alpha",
        "1",
        "--s",
        "1",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0);
    let v = det_json(Path::new(&d));
    let det = v["det"][0].as_f64().unwrap();
    assert!(det > 0.0 && det < 1.0, "{det}");
    for key in ["log_det", "trace", "est_error"] {
        assert!(!v[key].is_null(), "{key}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "c");
    assert_eq!(run(&["det", "--no-such-flag"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["det", "--weight", "nope", "--out-dir", &d]).0, 2);
    assert_eq!(run(&["det", "--s", "-1", "--out-dir", &d]).0, 2);
    assert_eq!(run(&["surface", "--y-range", "1,-1", "--out-dir", &d]).0, 2);
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "bogus_key = 3\n").unwrap();
    assert_eq!(
        run(&["det", "--config", cfg.to_str().unwrap(), "--out-dir", &d]).0,
        2
    );
    assert_eq!(
        run(&["det", "--config", "/nonexistent/x.toml", "--out-dir", &d]).0,
        2
    );
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_dsine");
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "bin");
    let ok = Command::new(exe)
        .args(["det", "--weight", "none", "--s", "1", "--out-dir", &d])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let printed: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(printed["det"][0].as_f64().unwrap(), 1.0);
    let bad = Command::new(exe).args(["det", "--bogus"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

const SMALL_SURFACE: [&str; 10] = [
    "--y-range",
    "-0.2,0.2",
    "--hy",
    "0.1",
    "--s-range",
    "0.8,1.2",
    "--hs",
    "0.1",
    "--profile",
    "fermi_factor",
];

#[test]
fn surface_csv_shape_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let d1 = out(tmp.path(), "s1");
    let mut args = vec!["surface", "--out-dir", &d1];
    args.extend(SMALL_SURFACE);
    let (code, m) = run(&args);
    assert_eq!(code, 0);
    let m = m.unwrap();
    let csv = std::fs::read_to_string(Path::new(&d1).join("surface.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "y,s,sigma,p,q,res_sigma_form,res_q_form,res_coupled"
    );
    assert_eq!(lines.count(), 5 * 5);
    assert!(m
        .outputs
        .iter()
        .any(|o| o.ends_with("surface_residuals.gp")));

    // Re-run from the recorded parameters, sending output elsewhere.
    let d2 = out(tmp.path(), "s2");
    let params = Path::new(&d1).join("parameters.toml");
    let (code, m2) = run(&[
        "surface",
        "--config",
        params.to_str().unwrap(),
        "--out-dir",
        &d2,
    ]);
    assert_eq!(code, 0);
    let csv2 = std::fs::read_to_string(Path::new(&d2).join("surface.csv")).unwrap();
    assert_eq!(csv, csv2);
    let mut p1 = m.parameters.clone();
    let mut p2 = m2.unwrap().parameters;
    p1.remove("out_dir");
    p2.remove("out_dir");
    assert_eq!(p1, p2);
}

#[test]
fn manifest_file_recovers_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "m");
    let (_, m) = run(&[
        "det",
        "--weight",
        "erf_window",
        "--alpha",
        "2",
        "--s",
        "0.7",
        "--out-dir",
        &d,
    ]);
    let m = m.unwrap();
    let text = std::fs::read_to_string(Path::new(&d).join("manifest.json")).unwrap();
    let parsed: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.parameters, m.parameters);
    assert_eq!(parsed.parameters["alpha"], serde_json::json!(2.0));
    assert_eq!(parsed.parameters["s"], serde_json::json!(0.7));
    assert_eq!(parsed.parameters["order"], serde_json::json!(16));
    assert!(parsed.wall_time >= 0.0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "cfg");
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "weight = \"fermi\"\nalpha = 3.0\ns = 2.0\n").unwrap();
    let (code, m) = run(&[
        "det",
        "--config",
        cfg.to_str().unwrap(),
        "--s",
        "0.5",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0);
    let p = m.unwrap().parameters;
    assert_eq!(p["alpha"], serde_json::json!(3.0));
    assert_eq!(p["s"], serde_json::json!(0.5));
}

#[test]
fn fields_csv_has_lambda_phi_psi() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "f");
    let (code, _) = run(&[
        "fields",
        "--weight",
        "fermi",
        "--s",
        "1",
        "--out",
        "csv",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(Path::new(&d).join("fields.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "lambda,phi_re,phi_im,psi_re,psi_im"
    );
    assert!(csv.lines().count() > 10);
}

#[test]
fn verify_trace_and_zs_pass_at_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "t");
    let (code, m) = run(&["verify", "trace", "--out-dir", &d]);
    assert_eq!(code, 0);
    assert!(m.unwrap().residual_summary["trace_max"] <= 1e-6);
    let d = out(tmp.path(), "z");
    let (code, m) = run(&[
        "verify",
        "zs",
        "--weight",
        "fermi",
        "--s",
        "1",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0);
    let m = m.unwrap();
    assert!((m.residual_summary["order_phi"] - 2.0).abs() <= 0.3);
    assert_eq!(m.parameters["order_tol"], serde_json::json!(0.3));
}

#[test]
fn verification_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "tf");
    let (code, m) = run(&[
        "verify",
        "trace",
        "--s-list",
        "1",
        "--threshold",
        "1e-30",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 1);
    let m = m.unwrap();
    assert_eq!(m.parameters["threshold"], serde_json::json!(1e-30));
    assert!(Path::new(&d).join("manifest.json").exists());
}

#[test]
fn verify_classical_on_a_short_range() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "cl");
    let (code, m) = run(&[
        "verify",
        "classical",
        "--ell",
        "0.5",
        "--s-min",
        "0.5",
        "--s-max",
        "1.5",
        "--ds",
        "0.5",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0);
    assert_eq!(m.unwrap().parameters["threshold"], serde_json::json!(1e-6));
    let csv = std::fs::read_to_string(Path::new(&d).join("classical.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "s,nu,nu_prime,sdslogF,residual1,residual2"
    );
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn verify_scattering_on_a_few_points() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "sc");
    let (code, m) = run(&[
        "verify",
        "scattering",
        "--f",
        "gaussian",
        "--amp",
        "1",
        "--center",
        "0",
        "--y-range",
        "-1,1",
        "--hy",
        "1",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0);
    let m = m.unwrap();
    assert!(m.residual_summary["w_at_zero_error"] <= 1e-10);
    let csv = std::fs::read_to_string(Path::new(&d).join("scattering.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "y,f,reconstructed,abs_error");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn verify_pde_small_patch_and_calibration() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "pde");
    let (code, m) = run(&[
        "verify",
        "pde",
        "--y-range",
        "-0.3,0.3",
        "--hy",
        "0.1",
        "--s-range",
        "0.8,1.4",
        "--hs",
        "0.1",
        "--out-dir",
        &d,
    ]);
    let m = m.unwrap();
    assert!(
        (m.residual_summary["order_sigma_form"] - 2.0).abs() <= 0.3,
        "{:?}",
        m.residual_summary
    );
    assert!(
        (m.residual_summary["order_coupled"] - 2.0).abs() <= 0.3,
        "{:?}",
        m.residual_summary
    );
    assert!(code == 0 || code == 1);
    assert!(m.parameters.contains_key("q_threshold"));

    let d = out(tmp.path(), "cal");
    let (code, m) = run(&[
        "calibrate-constants",
        "--y-range",
        "-0.1,0.1",
        "--hy",
        "0.05",
        "--s-range",
        "0.9,1.1",
        "--hs",
        "0.02",
        "--samples",
        "0,1",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0, "{:?}", m.map(|m| m.residual_summary));
}

#[test]
fn verify_pde_passes_at_default_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let d = out(tmp.path(), "pde_default");
    let (code, m) = run(&[
        "verify",
        "pde",
        "--profile",
        "fermi_factor",
        "--out-dir",
        &d,
    ]);
    assert_eq!(code, 0, "{:?}", m.map(|m| m.residual_summary));
}
