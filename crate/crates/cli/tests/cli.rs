use std::path::Path;
use std::process::Command;

fn lbboost(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_lbboost")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "lbboost {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pipeline_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    lbboost(&["synth", "--seed", "7", "--out", p(&data), "--train", "3", "--validation", "2", "--test", "2"]);
    let manifest = data.join("manifest.txt");
    let train = |model: &Path, log: &Path| {
        lbboost(&[
            "train",
            "--seed",
            "7",
            "--manifest",
            p(&manifest),
            "--model",
            p(model),
            "--log",
            p(log),
            "--iterations",
            "5",
            "--candidates",
            "10",
        ])
    };
    let (m1, m2) = (d.join("a.model"), d.join("b.model"));
    train(&m1, &d.join("a.log"));
    train(&m2, &d.join("b.log"));
    assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    let log = std::fs::read_to_string(d.join("a.log")).unwrap();
    assert!(!log.is_empty() && log.lines().all(|l| l.starts_with("iter=")));

    let (d1, d2) = (d.join("a.det"), d.join("b.det"));
    lbboost(&["detect", "--manifest", p(&manifest), "--model", p(&m1), "--out", p(&d1)]);
    lbboost(&["detect", "--manifest", p(&manifest), "--model", p(&m2), "--out", p(&d2)]);
    assert_eq!(std::fs::read(&d1).unwrap(), std::fs::read(&d2).unwrap());

    let summary = lbboost(&["eval", "--manifest", p(&manifest), "--detections", p(&d1)]);
    assert!(summary.contains("aroc ") && summary.contains("ap "));
    let roc = d.join("roc.txt");
    lbboost(&["roc", "--manifest", p(&manifest), "--detections", p(&d1), "--out", p(&roc)]);
    let curve = std::fs::read_to_string(&roc).unwrap();
    assert!(curve.starts_with("# delta 10\n# truncation 2\n"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("cfg.toml");
    std::fs::write(&cfg, "seed = 3\n[synth]\ntrain = 1\nvalidation = 0\ntest = 0\nwidth = 40\nheight = 40\n").unwrap();
    let data = d.join("data");
    lbboost(&["--config", p(&cfg), "synth", "--out", p(&data), "--train", "2"]);
    let manifest = std::fs::read_to_string(data.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    let image = lbboost::io::pgm::read(&data.join("images/train_000.pgm")).unwrap();
    assert_eq!((image.width(), image.height()), (40, 40));
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.model");
    std::fs::write(&model, "lbboost-model 1\nmembers 2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lbboost"))
        .args(["detect", "--manifest", "missing.txt", "--model", p(&model), "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("m.model:3"), "{err}");
}
