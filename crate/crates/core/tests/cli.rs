use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsi-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn synth(dir: &Path) -> (String, String) {
    let (cube, labels) = (path(dir, "cube.npy"), path(dir, "labels.npy"));
    let out = bin(&["synth", "--seed", "7", "--height", "32", "--width", "32", "--bands", "8", "--cube", &cube, "--labels", &labels]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (cube, labels)
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path());
    synth(b.path());
    for name in ["cube.npy", "labels.npy"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn usage_errors() {
    assert_eq!(bin(&["nonsense"]).status.code(), Some(1));
    assert_eq!(bin(&["synth", "--bogus"]).status.code(), Some(1));
    // randomness without a seed
    let out = bin(&["split-random", "--labels", "l.npy", "--sampling", "balanced", "--count", "3", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["--version"]).status.code(), Some(0));
}

#[test]
fn validation_carving_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = synth(dir.path());
    let manifest = path(dir.path(), "m.json");
    let out = bin(&["split-random", "--labels", &labels, "--seed", "1", "--sampling", "imbalanced", "--count", "60", "--runs", "2", "--out", &manifest]);
    assert!(out.status.success());
    let eval = |extra: &[&str]| {
        let mut args = vec!["eval", "--cube", cube.as_str(), "--labels", labels.as_str(), "--manifest", manifest.as_str(), "--validation-fraction", "0.25"];
        args.extend_from_slice(extra);
        bin(&args)
    };
    assert_eq!(eval(&[]).status.code(), Some(1));
    let ok = eval(&["--seed", "4", "--table"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["mode"], "random");
    assert_eq!(report["setup"]["masking"], "none");
    assert_eq!(report["splits"].as_array().unwrap().len(), 2);
    assert!(report["splits"][0]["validation"]["overall_accuracy"].is_number());
    assert!(String::from_utf8_lossy(&ok.stderr).contains("OA"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = path(dir.path(), "bogus.npy");
    std::fs::write(&bogus, b"definitely not numpy").unwrap();
    let out = bin(&["split-patch", "--labels", &bogus, "--seed", "1", "--train-pixels", "10", "--patch-width", "3", "--patch-height", "3", "--folds", "2", "--out", &path(dir.path(), "m.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not an NPY file"));

    // budget larger than the scene
    let (_, labels) = synth(dir.path());
    let out = bin(&["split-patch", "--labels", &labels, "--seed", "1", "--train-pixels", "100000", "--patch-width", "3", "--patch-height", "3", "--folds", "2", "--out", &path(dir.path(), "m.json")]);
    assert_eq!(out.status.code(), Some(2));

    // tampered manifest
    let manifest = path(dir.path(), "m.json");
    let out = bin(&["split-patch", "--labels", &labels, "--seed", "1", "--train-pixels", "40", "--patch-width", "4", "--patch-height", "4", "--folds", "2", "--out", &manifest]);
    assert!(out.status.success());
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let counts = value["folds"][0]["train_counts"].as_array_mut().unwrap();
    let first = counts[0].as_u64().unwrap();
    counts[0] = (first + 1).into();
    counts[1] = counts[1].as_u64().unwrap().saturating_sub(1).into();
    std::fs::write(&manifest, value.to_string()).unwrap();
    let out = bin(&["audit", "--labels", &labels, "--manifest", &manifest]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let (cube, labels) = synth(dir.path());
    let patch = path(dir.path(), "patch.json");
    let random = path(dir.path(), "random.json");
    assert!(bin(&["split-patch", "--labels", &labels, "--seed", "2", "--train-pixels", "50", "--width-fraction", "0.15", "--height-fraction", "0.15", "--folds", "3", "--out", &patch]).status.success());
    assert!(bin(&["split-random", "--labels", &labels, "--seed", "2", "--sampling", "imbalanced", "--count", "50", "--out", &random]).status.success());

    let masked = bin(&["audit", "--labels", &labels, "--manifest", &patch, "--mode", "masked", "--window", "5", "--cube", &cube]);
    let entries: serde_json::Value = serde_json::from_slice(&masked.stdout).unwrap();
    assert_eq!(entries.as_array().unwrap().len(), 3);
    for e in entries.as_array().unwrap() {
        assert_eq!(e["report"]["leaked_fraction"], 0.0);
        assert_eq!(e["perturbation_independent"], true);
    }

    let geometric = bin(&["audit", "--labels", &labels, "--manifest", &random, "--window", "3x5"]);
    let entries: serde_json::Value = serde_json::from_slice(&geometric.stdout).unwrap();
    assert!(entries[0]["report"]["leaked_fraction"].as_f64().unwrap() > 0.0);
    assert!(entries[0].get("perturbation_independent").is_none());

    let ppm = path(dir.path(), "leaks.ppm");
    assert!(bin(&["render", "--labels", &labels, "--manifest", &random, "--leak-window", "3", "--style", "white", "--out", &ppm]).status.success());
    let bytes = std::fs::read(&ppm).unwrap();
    assert!(bytes.starts_with(b"P6\n32 32\n255\n"));
    assert_eq!(bytes.len(), 13 + 32 * 32 * 3);
    assert_eq!(bin(&["render", "--labels", &labels, "--manifest", &patch, "--split", "9", "--out", &ppm]).status.code(), Some(1));
}
