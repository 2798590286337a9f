use lsfield::expcli::*;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;
use std::process::Command;

fn options(root: &Path) -> RunOptions {
    RunOptions {
        output_root: Some(root.to_path_buf()),
        base_dir: None,
    }
}

fn read(dir: &str, file: &str) -> String {
    fs::read_to_string(Path::new(dir).join(file)).unwrap()
}

#[test]
fn gaussian_figure_preset_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("fig2-gaussian").unwrap();
    let m1 = run_config_text(text, &options(tmp.path())).unwrap();
    m1.verify().unwrap();
    let csv = read(&m1.output_dir, "curve.csv");
    let table = Table::parse(&csv).unwrap();
    assert_eq!(table.header, ["d", "mi", "lower", "upper"]);
    assert_eq!(table.rows.len(), 1000);
    assert!(!csv.contains('\r'));
    assert_eq!(m1.config_sha256, hex::encode(Sha256::digest(text.as_bytes())));
    assert_eq!(m1.library_version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m1.slopes.len(), 1);
    assert!(m1.slopes[0].fit.as_ref().unwrap().slope < 0.0);

    let other = tempfile::tempdir().unwrap();
    let m2 = run_config_text(text, &options(other.path())).unwrap();
    for a in &m1.artifacts {
        let b = m2.artifacts.iter().find(|b| b.path == a.path).unwrap();
        assert_eq!(a.sha256, b.sha256, "{}", a.path);
    }
    assert_eq!(csv, read(&m2.output_dir, "curve.csv"));
}

#[test]
fn renyi_preset_has_three_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_config_text(preset("fig3-renyi-gaussian").unwrap(), &options(tmp.path())).unwrap();
    let table = Table::parse(&read(&m.output_dir, "curve.csv")).unwrap();
    assert_eq!(table.header, ["d", "mi_q1.5", "mi_q2.1", "mi_q2.25"]);
    assert_eq!(m.slopes.len(), 3);
    let at = |c: &str| table.column(c).unwrap()[0];
    assert!(at("mi_q1.5") < at("mi_q2.1") && at("mi_q2.1") < at("mi_q2.25"));
}

#[test]
fn every_preset_runs_within_budget() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, text) in PRESETS {
        let m = run_config_text(text, &options(tmp.path())).unwrap_or_else(|e| panic!("{name}: {e}"));
        m.verify().unwrap();
        assert_eq!(m.within_budget, Some(true), "{name}");
        if let Some(&pass) = m.summaries.get("slope_pass") {
            assert_eq!(pass, 1.0, "{name}");
        }
        let manifest: RunManifest =
            serde_json::from_str(&read(&m.output_dir, "manifest.json")).unwrap();
        assert_eq!(manifest.artifacts, m.artifacts);
    }
}

#[test]
fn empty_distances_fail_validation_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"name": "empty", "scenario": "mi_curve", "output_dir": "empty",
        "model": {"marginal": {"family": "standard_gaussian"},
                  "correlation": {"family": "power_law_bg", "beta": 0.2, "gamma_exp": 0.2},
                  "truncation": 5},
        "distances": {"kind": "explicit", "values": []}}"#;
    let err = run_config_text(cfg, &options(tmp.path())).unwrap_err();
    match &err {
        ExpError::Config { violations } => assert!(violations.iter().any(|v| v.starts_with("distances"))),
        e => panic!("{e}"),
    }
    assert!(!tmp.path().join("empty").exists());
    assert_eq!(err.record()["error"]["kind"], "config_validation");
}

#[test]
fn multinomial_renyi_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"name": "multi", "scenario": "renyi_curve", "output_dir": "multi",
        "model": {"marginal": {"family": "standard_gaussian"},
                  "correlation": {"family": "pure_power", "rho": 0.5}, "dim": 1, "truncation": 5},
        "distances": {"kind": "range", "start": 2, "stop": 40, "step": 2},
        "q": [2, 3], "renyi_method": "multinomial"}"#;
    let m = run_config_text(cfg, &options(tmp.path())).unwrap();
    let table = Table::parse(&read(&m.output_dir, "curve.csv")).unwrap();
    let d = table.column("d").unwrap();
    let q2 = table.column("mi_q2").unwrap();
    for (r, v) in d.iter().zip(q2) {
        let g2 = 1.0 / r;
        let exact = (1..=5).map(|k| g2.powi(k)).sum::<f64>().ln_1p();
        assert!((v - exact).abs() < 1e-11 * exact.max(1.0), "{r}");
    }
}

#[test]
fn small_field_and_surface_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let field = r#"{"name": "f", "scenario": "field_sim", "output_dir": "f", "seed": 3,
        "model": {"marginal": {"family": "standard_gaussian"},
                  "correlation": {"family": "power_law_bg", "beta": 0.2, "gamma_exp": 0.2}, "truncation": 1},
        "field": {"grid": {"sizes": [8, 8], "spacing": 1.0}, "replicates": 20, "max_lag": 3}}"#;
    let m = run_config_text(field, &options(tmp.path())).unwrap();
    let paths: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    assert_eq!(paths, ["correlation.csv", "m0.csv", "field.f64le", "field.hdr", "chi2.f64le", "chi2.hdr"]);
    let (header, values) = lsfield::fieldsim::read_field(&Path::new(&m.output_dir).join("chi2")).unwrap();
    assert_eq!((header.sizes, values.len()), (vec![8, 8], 64));

    let surface = r#"{"name": "s", "scenario": "st_surface", "output_dir": "s",
        "distances": {"kind": "explicit", "values": [1, 2]},
        "st": {"covariance": {"sigma2": 1, "c": 1, "delta": 0.35, "gamma_phi": 0.2, "a": 1,
                              "alpha": 0.3, "beta_psi": 0.7, "dim": 2},
               "t_max": 10, "basis_count": 3, "time_nodes": 64,
               "mesh": {"kind": "range", "start": 0, "stop": 10, "step": 5}}}"#;
    let m = run_config_text(surface, &options(tmp.path())).unwrap();
    let t = Table::parse(&read(&m.output_dir, "surface.csv")).unwrap();
    assert_eq!(t.rows.len(), 2 * 9);
    assert!(m.summaries["mean_level_r1"] > m.summaries["mean_level_r2"]);
    let sidecar: serde_json::Value = serde_json::from_str(&read(&m.output_dir, "surface.json")).unwrap();
    assert_eq!(sidecar["basis"]["count"], 3);
}

#[test]
fn slope_report_scenario_reads_a_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let curve = run_config_text(preset("slope-purepower").unwrap(), &options(tmp.path())).unwrap();
    let cfg_path = tmp.path().join("report.json");
    fs::write(
        &cfg_path,
        r#"{"name": "report", "scenario": "slope_report", "output_dir": "report",
            "slope": {"input_csv": "slope-purepower/curve.csv", "window": [100, 3000],
                      "expected": [{"label": "base", "order": -3.0}], "tolerance": 0.05}}"#,
    )
    .unwrap();
    let m = run_config_file(&cfg_path, &options(tmp.path())).unwrap();
    assert_eq!(m.summaries["slope_pass"], 1.0);
    let slope = m.slopes[0].fit.as_ref().unwrap().slope;
    // the CSV carries 12 significant digits
    assert!((slope - curve.slopes[0].fit.as_ref().unwrap().slope).abs() < 1e-9);
    assert!(read(&m.output_dir, "slope.csv").contains("base,-3,"));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lsfield"))
}

#[test]
fn cli_run_slope_and_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["run", "--preset", "slope-purepower"])
        .env(OUTPUT_ROOT_ENV, tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: RunManifest = serde_json::from_slice(&out.stdout).unwrap();
    assert!(manifest.output_dir.starts_with(tmp.path().to_str().unwrap()));
    let csv = tmp.path().join("slope-purepower/curve.csv");

    let out = cli()
        .args(["slope", csv.to_str().unwrap(), "--window", "100:3000", "--expect", "-3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS") && text.contains("label,expected,measured"));

    let out = cli()
        .args(["slope", csv.to_str().unwrap(), "--window", "1e5:1e6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "config_validation");

    let out = cli().args(["presets", "list"]).output().unwrap();
    let listing = String::from_utf8(out.stdout).unwrap();
    for (name, _) in PRESETS {
        assert!(listing.contains(name));
    }
    let out = cli().args(["presets", "show", "fig2-gaussian"]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), preset("fig2-gaussian").unwrap());
}

#[test]
fn cli_reports_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"name": "", "scenario": "renyi_curve", "output_dir": "bad", "q": [1.0, -2]}"#,
    )
    .unwrap();
    let out = cli().args(["run", cfg.to_str().unwrap()]).env(OUTPUT_ROOT_ENV, tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    let violations = record["error"]["violations"].as_array().unwrap();
    assert!(violations.len() >= 5, "{violations:?}");
    assert!(!tmp.path().join("bad").exists());

    fs::write(&cfg, r#"{"name": "x", "scenario": "mi_curve", "output_dir": "x", "extra": 1}"#).unwrap();
    let out = cli().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"]["kind"], "config_parse");

    let out = cli().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
