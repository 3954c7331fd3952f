use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use podrom::data::io::{read_dataset, write_dataset};
use podrom::data::{Layout, SnapshotTensor};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const SMALL: &str = "[generate]\nn_t = 200\n[train]\nmax_epochs = 2\npatience = 2\n[model]\nunits = 6\n";

fn podrom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podrom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = podrom(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    podrom(dir, args).status.code().expect("exit code")
}

/// Temp dir with `cfg.toml` and a generated dataset in `gen/`.
fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    ok(dir.path(), &["--config", "cfg.toml", "--out", "gen", "generate"]);
    dir
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    fs::read(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn generate_is_seeded_and_reports_dims() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), SMALL).unwrap();
    let text = ok(d, &["--config", "cfg.toml", "--seed", "7", "--out", "a", "generate"]);
    assert!(text.contains("24 x 16, 200 snapshots, dt = 0.00025"), "{text}");
    assert!(text.contains("deviation from 1"), "{text}");
    ok(d, &["--config", "cfg.toml", "--seed", "7", "--out", "b", "generate"]);
    assert_eq!(read(d, "a/dataset.romf"), read(d, "b/dataset.romf"));
    let t = read_dataset(&d.join("a/dataset.romf")).unwrap();
    assert_eq!(t.n_t(), 200);
}

#[test]
fn default_generate_matches_reference_setup() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["generate"]);
    let t = read_dataset(&dir.path().join("podrom_out/dataset.romf")).unwrap();
    assert_eq!(t.n_t(), 999);
    assert_eq!(t.dt(), 2.5e-4);
}

#[test]
fn pod_truncation_flags() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "cfg.toml", "--out", "p3", "pod", "--data", "gen/dataset.romf", "--modes", "3"]);
    let energy = String::from_utf8(read(d, "p3/energy.csv")).unwrap();
    assert_eq!(energy.lines().filter(|l| l.ends_with(",true")).count(), 3);
    let rr = String::from_utf8(read(d, "p3/pod_rrmse.csv")).unwrap();
    assert_eq!(rr.lines().count(), 1 + 5);

    // the generator has rank 6, so full energy keeps exactly 6 modes
    let text = ok(d, &["--config", "cfg.toml", "--out", "pf", "pod", "--data", "gen/dataset.romf", "--energy", "1.0"]);
    assert!(text.starts_with("kept 6 of 6 modes"), "{text}");

    assert_eq!(code(d, &["--out", "px", "pod", "--data", "gen/dataset.romf", "--energy", "1.5"]), 2);
    assert_eq!(code(d, &["--out", "px", "pod", "--data", "gen/dataset.romf", "--modes", "2", "--energy", "0.5"]), 2);
}

#[test]
fn strict_config_and_exit_codes() {
    let dir = setup();
    let d = dir.path();
    for (name, text) in [
        ("typo.toml", "[train]\nepochz = 1\n"),
        ("section.toml", "[trian]\nmax_epochs = 1\n"),
        ("top.toml", "verbose = true\n"),
        ("badcase.toml", "[train]\nloss = \"l1\"\n"),
    ] {
        fs::write(d.join(name), text).unwrap();
        assert_eq!(code(d, &["--config", name, "generate"]), 2, "{text}");
    }
    assert_eq!(code(d, &["--config", "missing.toml", "generate"]), 4);
    assert_eq!(code(d, &["pod", "--data", "nope.romf"]), 4);
    assert_eq!(code(d, &["predict", "--pipeline", "nope"]), 4);
    assert_eq!(code(d, &["bogus"]), 2);
    assert_eq!(code(d, &["--config", "cfg.toml", "train", "--data", "gen/dataset.romf", "--case", "Z"]), 2);

    fs::write(d.join("junk.romf"), b"ROMFjunk").unwrap();
    assert_eq!(code(d, &["pod", "--data", "junk.romf"]), 4);

    // a constant temperature field is degenerate: numeric failure
    let layout = Layout::new(2, 3, 2);
    let nt = 200;
    let mut values = Vec::new();
    for k in 0..nt {
        values.extend([300.0; 6]);
        values.extend((0..6).map(|g| 0.5 + 0.1 * ((k + g) as f64).sin()));
    }
    let t = SnapshotTensor::new(layout, nt, 1e-3, vec!["T".into(), "Y".into()], vec![false, true], values).unwrap();
    write_dataset(&d.join("flat.romf"), &t).unwrap();
    let out = podrom(d, &["pod", "--data", "flat.romf"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn train_smoke_writes_artifacts_and_manifest() {
    let dir = setup();
    let d = dir.path();
    let text = ok(
        d,
        &["--config", "cfg.toml", "--out", "run", "train", "--data", "gen/dataset.romf", "--case", "0", "--model", "cnn", "--epochs", "1"],
    );
    assert!(text.contains("case 0 Cnn"), "{text}");
    for f in ["state.roms", "basis.romb", "model.romw", "train_report.csv", "manifest.toml"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    let report = String::from_utf8(read(d, "run/train_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);

    let manifest: toml::Value = toml::from_str(&String::from_utf8(read(d, "run/manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["command"].as_str(), Some("train"));
    assert_eq!(manifest["seed"].as_integer(), Some(0));
    let cfg_hash = hex::encode(Sha256::digest(read(d, "cfg.toml")));
    assert_eq!(manifest["config_sha256"].as_str(), Some(cfg_hash.as_str()));
    for section in ["inputs", "outputs"] {
        for entry in manifest[section].as_array().unwrap() {
            let path = PathBuf::from(entry["path"].as_str().unwrap());
            let hash = hex::encode(Sha256::digest(read(d, path.to_str().unwrap())));
            assert_eq!(entry["sha256"].as_str(), Some(hash.as_str()), "{}", path.display());
        }
    }
    let stages: Vec<&str> = manifest["timings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["stage"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["read", "fit", "write"]);
}

#[test]
fn train_is_reproducible() {
    let dir = setup();
    let d = dir.path();
    for out in ["r1", "r2"] {
        ok(d, &["--config", "cfg.toml", "--seed", "3", "--out", out, "train", "--data", "gen/dataset.romf", "--case", "E"]);
    }
    for f in ["model.romw", "train_report.csv", "state.roms", "basis.romb"] {
        assert_eq!(read(d, &format!("r1/{f}")), read(d, &format!("r2/{f}")), "{f}");
    }
}

#[test]
fn train_on_precomputed_basis() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "cfg.toml", "--out", "p", "pod", "--data", "gen/dataset.romf", "--modes", "4"]);
    let text = ok(d, &["--config", "cfg.toml", "--out", "run", "train", "--data", "gen/dataset.romf", "--basis", "p"]);
    assert!(text.contains(": 4 modes"), "{text}");
    assert_eq!(code(d, &["--config", "cfg.toml", "--out", "x", "train", "--data", "gen/dataset.romf", "--basis", "gen"]), 4);
}

#[test]
fn predict_with_and_without_truth() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "cfg.toml", "--out", "run", "train", "--data", "gen/dataset.romf", "--case", "E"]);

    let text = ok(d, &["--out", "bare", "predict", "--pipeline", "run", "--steps", "15"]);
    assert!(text.contains("metrics skipped"), "{text}");
    assert!(!d.join("bare/nmse.csv").exists());
    assert_eq!(read_dataset(&d.join("bare/prediction.romf")).unwrap().n_t(), 15);

    // 200 snapshots: 136 train, 24 val, 40 test
    let text = ok(
        d,
        &["--out", "full", "predict", "--pipeline", "run", "--truth", "gen/dataset.romf", "--export-points", "(1,2) (20,15)"],
    );
    assert!(text.contains("evaluated steps: 40 (snapshots 160..200)"), "{text}");
    let nmse = String::from_utf8(read(d, "full/nmse.csv")).unwrap();
    assert_eq!(nmse.lines().count(), 41);
    let points = String::from_utf8(read(d, "full/points.csv")).unwrap();
    let header = points.lines().next().unwrap();
    assert!(header.starts_with("snapshot,time,T(1;2),T(1;2)_truth"), "{header}");
    assert_eq!(header.split(',').count(), 2 + 2 * 5 * 2);
    assert_eq!(points.lines().count(), 41);
    let first = points.lines().nth(1).unwrap();
    assert!(first.starts_with("160,"), "{first}");

    // the probe truth column is the dataset value
    let truth = read_dataset(&d.join("gen/dataset.romf")).unwrap();
    let col: f64 = first.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(col, truth.get(0, 1, 2, 160));

    // predictions are the same with and without truth
    let part = ok(d, &["--out", "part", "predict", "--pipeline", "run", "--truth", "gen/dataset.romf", "--steps", "15"]);
    assert!(part.contains("evaluated steps: 15"), "{part}");
    assert_eq!(read(d, "part/prediction.romf"), read(d, "bare/prediction.romf"));

    assert_eq!(code(d, &["--out", "x", "predict", "--pipeline", "run", "--export-points", "(99,0)"]), 2);
    assert_eq!(code(d, &["--out", "x", "predict", "--pipeline", "run", "--export-points", "1,2"]), 2);
}

#[test]
fn transfer_reports_and_rejects_mode_mismatch() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--config", "cfg.toml", "--out", "run", "train", "--data", "gen/dataset.romf", "--case", "E"]);
    ok(d, &["--config", "cfg.toml", "--out", "three", "generate", "--profile", "three"]);
    let text = ok(d, &["--out", "tr", "transfer", "--pipeline", "run", "--data", "three/dataset.romf"]);
    assert!(text.contains("evaluated steps: 190 (snapshots 10..200)"), "{text}");
    for f in ["rrmse_per_variable.csv", "nmse.csv", "mass_balance.csv", "summary.txt", "prediction.romf", "manifest.toml"] {
        assert!(d.join("tr").join(f).exists(), "{f}");
    }
    ok(d, &["--out", "tf", "transfer", "--pipeline", "run", "--data", "three/dataset.romf", "--teacher-forced"]);

    fs::write(d.join("low.toml"), "[generate]\nn_t = 200\nrank = 3\n").unwrap();
    ok(d, &["--config", "low.toml", "--out", "low", "generate"]);
    let out = podrom(d, &["--out", "x", "transfer", "--pipeline", "run", "--data", "low/dataset.romf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mode-count mismatch"));
}
