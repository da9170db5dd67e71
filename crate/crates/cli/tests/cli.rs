//! End-to-end runs of the `shgcint` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use shgcint_cli::ExperimentConfig;
use shgcint_core::medium::Scatterer;
use shgcint_core::Point2;

fn shgcint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shgcint")).args(args).output().unwrap()
}

/// A `4λ` experiment that runs in about a second.
fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.domain.side = 4.0;
    c.array.sensors = 17;
    c.array.angles = 4;
    c.scatterers = vec![Scatterer { position: Point2::new(0.5, 2.0), radius: 0.1, eta1: 1.0, eta2: 0.01 }];
    c.imaging.cint_x = [2.0, 1.0];
    c.imaging.search.lo = Point2::new(-1.0, 1.0);
    c.imaging.search.hi = Point2::new(2.0, 3.0);
    c.ensemble.search = c.imaging.search;
    c.ensemble.realizations = 2;
    c
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run_ok(args: &[&str]) {
    let out = shgcint(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

/// SHA-256 of every file in `dir`, sorted by name.
fn dir_hashes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), Sha256::digest(fs::read(&p).unwrap()).to_vec())
        })
        .collect();
    v.sort();
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn default_config_round_trips_and_matches_shipped_file() {
    let c = ExperimentConfig::default();
    let text = serde_json::to_string_pretty(&c).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    let empty: ExperimentConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(empty, c);
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let shipped: ExperimentConfig = serde_json::from_str(&fs::read_to_string(shipped).unwrap()).unwrap();
    assert_eq!(shipped, c);
}

#[test]
fn resolved_config_re_parses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");
    run_ok(&["theory", "--config", s(&cfg), "--out", s(&out), "--seed", "9"]);
    let resolved = ExperimentConfig::load(&out.join("config.json")).unwrap();
    let mut expected = small_config();
    expected.medium.seed = 9;
    expected.ensemble.first_seed = 9;
    expected.output = out.clone();
    assert_eq!(resolved, expected);
}

#[test]
fn commands_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    for cmd in ["gen-medium", "forward", "image", "theory", "psf"] {
        let (a, b) = (dir.path().join(format!("{cmd}-a")), dir.path().join(format!("{cmd}-b")));
        for out in [&a, &b] {
            run_ok(&[cmd, "--config", s(&cfg), "--out", s(out), "--seed", "4"]);
        }
        let (ha, hb) = (dir_hashes(&a), dir_hashes(&b));
        // Only the resolved config mentions the output directory.
        let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != "config.json").collect::<Vec<_>>();
        let (ha, hb) = (strip(ha), strip(hb));
        assert!(!ha.is_empty());
        assert_eq!(ha, hb, "{cmd} is not reproducible");
    }
    let go_a = dir.path().join("go-a");
    let go_b = dir.path().join("go-b");
    for out in [&go_a, &go_b] {
        run_ok(&["ensemble", "--config", s(&cfg), "--out", s(out), "--data-source", "go"]);
    }
    assert_eq!(
        fs::read(go_a.join("ensemble.json")).unwrap(),
        fs::read(go_b.join("ensemble.json")).unwrap()
    );
}

#[test]
fn flat_medium_gives_black_preview() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.medium.amplitude = 0.0;
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    run_ok(&["gen-medium", "--config", s(&cfg), "--out", s(&out)]);
    let pgm = fs::read(out.join("medium.pgm")).unwrap();
    let header_end = pgm.iter().enumerate().filter(|(_, &b)| b == b'\n').nth(2).unwrap().0 + 1;
    assert!(pgm[header_end..].iter().all(|&b| b == 0));
}

#[test]
fn forward_writes_one_diagnostic_per_angle() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.medium.amplitude = 0.0;
    c.scatterers.clear();
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    run_ok(&["forward", "--config", s(&cfg), "--out", s(&out)]);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag.as_array().unwrap().len(), c.array.angles);
    let data = shgcint_core::io::read_array_data(&out.join("data")).unwrap();
    assert_eq!(data.d1.dim(), (17, 4));
    assert!(data.d1.iter().chain(data.d2.iter()).all(|z| z.norm() == 0.0));
}

#[test]
fn unwindowed_cint_image_is_squared_migration() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.imaging.window = shgcint_core::imaging::Window::Hard;
    c.imaging.cint_x = [1e6, 1e6];
    c.imaging.cint_theta = 1e6;
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    run_ok(&["forward", "--config", s(&cfg), "--out", s(&out)]);
    let data = out.join("data.json");
    for m in ["migration", "cint"] {
        run_ok(&["image", "--config", s(&cfg), "--out", s(&out), "--data", s(&data), "--method", m, "--harmonic", "2"]);
    }
    let (_, mig) = shgcint_core::io::read_grid_csv(&out.join("image_migration_j2.csv")).unwrap();
    let (_, cint) = shgcint_core::io::read_grid_csv(&out.join("image_cint_j2.csv")).unwrap();
    for (m, c) in mig.iter().zip(cint.iter()) {
        assert!((c - m * m).abs() <= 1e-10 * m * m);
    }
}

#[test]
fn theory_reports_forced_ratios_and_flags_the_reduced_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&["theory", "--out", s(&out)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("theory.json")).unwrap()).unwrap();
    assert!((v["scattering_length_ratio"].as_f64().unwrap() - 0.25).abs() < 1e-14);
    assert!((v["decoherence_length_ratio"].as_f64().unwrap() - 0.5).abs() < 1e-14);
    assert!(!v["flagged"].as_array().unwrap().is_empty());
}

#[test]
fn homogeneous_ensemble_is_perfectly_correlated() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.medium.amplitude = 0.0;
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("nested").join("out");
    run_ok(&["ensemble", "--config", s(&cfg), "--out", s(&out), "--data-source", "go"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ensemble.json")).unwrap()).unwrap();
    for m in v["methods"].as_array().unwrap() {
        assert_eq!(m["mean_correlation"].as_f64().unwrap(), 1.0);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(shgcint(&["theory", "--config", s(&bad), "--out", s(&out)]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"medium": {"correlation_length": 0.3, "amplitude": 0.1, "mode_count": 8, "seed": 0, "colour": 1}}"#)
        .unwrap();
    assert_eq!(shgcint(&["theory", "--config", s(&unknown), "--out", s(&out)]).status.code(), Some(2));

    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, r#"{"domain": {"side": -4.0}}"#).unwrap();
    assert_eq!(shgcint(&["theory", "--config", s(&invalid), "--out", s(&out)]).status.code(), Some(2));

    assert_eq!(shgcint(&["image", "--method", "kirchhoff", "--out", s(&out)]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(shgcint(&["theory", "--config", s(&missing), "--out", s(&out)]).status.code(), Some(4));

    let file = dir.path().join("a_file");
    fs::write(&file, "").unwrap();
    assert_eq!(shgcint(&["theory", "--out", s(&file.join("sub"))]).status.code(), Some(4));

    let mut c = small_config();
    c.solver.fixed_point.max_iter = 1;
    let cfg = write_config(dir.path(), &c);
    assert_eq!(shgcint(&["forward", "--config", s(&cfg), "--out", s(&out)]).status.code(), Some(3));
}
