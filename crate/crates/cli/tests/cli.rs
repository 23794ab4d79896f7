//! End-to-end checks of the `pgnoise` binary: every subcommand exercised
//! through real processes, temp files and parsed stdout.

use std::path::Path;
use std::process::{Command, Output};

use pgnoise::io::{save_pgm, PgmDepth};
use pgnoise::synthetic::synthetic_image;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pgnoise"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary spawns");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Writes a deterministic clean test image and returns its path.
fn fixture_pgm(dir: &Path) -> std::path::PathBuf {
    let clean = synthetic_image(128, 96, 9).unwrap();
    let path = dir.join("clean.pgm");
    save_pgm(&clean, &path, PgmDepth::Eight).unwrap();
    path
}

#[test]
fn simulate_then_estimate_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture_pgm(dir.path());
    let pair_dir = dir.path().join("pair");

    let out = run_ok(bin().args([
        "simulate",
        "--input",
        input.to_str().unwrap(),
        "--a",
        "20",
        "--b",
        "0.05",
        "--seed",
        "3",
        "--out",
        pair_dir.to_str().unwrap(),
    ]));
    let sim = json_stdout(&out);
    assert_eq!(sim["width"], 128);
    assert_eq!(sim["seed"], 3);
    for name in ["clean.pgfl", "noisy.pgfl", "pair.json"] {
        assert!(pair_dir.join(name).exists(), "{name} missing");
    }

    let out = run_ok(bin().args([
        "estimate",
        "--pair",
        pair_dir.to_str().unwrap(),
        "--method",
        "both",
    ]));
    let est = json_stdout(&out);
    for method in ["cumulant", "var"] {
        let a_inv = est[method]["a_inv"].as_f64().unwrap();
        let b_sq = est[method]["b_sq"].as_f64().unwrap();
        assert!(
            (a_inv - 0.05).abs() < 0.02,
            "{method} a_inv {a_inv} far from 0.05"
        );
        assert!(
            (b_sq - 0.0025).abs() < 0.002,
            "{method} b_sq {b_sq} far from 0.0025"
        );
        assert!(est[method]["a"].as_f64().is_some());
        assert_eq!(
            est[method]["diagnostics"]["clamped_a_inv"],
            serde_json::Value::Bool(false)
        );
    }
}

#[test]
fn estimate_accepts_explicit_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture_pgm(dir.path());
    let pair_dir = dir.path().join("pair");
    run_ok(bin().args([
        "simulate",
        "--input",
        input.to_str().unwrap(),
        "--a",
        "10",
        "--b",
        "0.08",
        "--seed",
        "1",
        "--out",
        pair_dir.to_str().unwrap(),
    ]));
    let out = run_ok(bin().args([
        "estimate",
        "--clean",
        pair_dir.join("clean.pgfl").to_str().unwrap(),
        "--noisy",
        pair_dir.join("noisy.pgfl").to_str().unwrap(),
        "--method",
        "cumulant",
    ]));
    let est = json_stdout(&out);
    assert!(est["cumulant"]["a_inv"].is_f64());
    assert!(est.get("var").is_none());
}

#[test]
fn loglik_prefers_true_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture_pgm(dir.path());
    let pair_dir = dir.path().join("pair");
    run_ok(bin().args([
        "simulate",
        "--input",
        input.to_str().unwrap(),
        "--a",
        "12",
        "--b",
        "0.06",
        "--seed",
        "5",
        "--out",
        pair_dir.to_str().unwrap(),
    ]));
    let ll_at = |a: &str| -> f64 {
        let out = run_ok(bin().args([
            "loglik",
            "--pair",
            pair_dir.to_str().unwrap(),
            "--a",
            a,
            "--b",
            "0.06",
        ]));
        let v = json_stdout(&out);
        assert_eq!(v["pixels"], 128 * 96);
        assert!(v["k_max_max"].as_u64().unwrap() >= 8);
        v["ll"].as_f64().unwrap()
    };
    let at_truth = ll_at("12");
    let at_wrong = ll_at("48");
    assert!(
        at_truth > at_wrong,
        "LL should prefer truth: {at_truth} vs {at_wrong}"
    );
}

#[test]
fn evaluate_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out_dir: &Path, workers: &str| {
        run_ok(bin().args([
            "evaluate",
            "--synthetic",
            "2",
            "--profile",
            "custom",
            "--a-grid",
            "5:50:2",
            "--b-grid",
            "0.05:0.1:2",
            "--seeds",
            "2",
            "--workers",
            workers,
            "--out",
            out_dir.to_str().unwrap(),
        ]));
    };
    let dir1 = dir.path().join("run1");
    let dir2 = dir.path().join("run2");
    run(&dir1, "1");
    run(&dir2, "3");

    let records = std::fs::read_to_string(dir1.join("records.csv")).unwrap();
    // 2 images x 2 seeds x 2 a x 2 b cells plus the header line.
    assert_eq!(records.lines().count(), 17);
    assert!(records.starts_with("image_id,seed,a_true,b_true,cumulant_status"));
    assert!(records.contains("synthetic-0"));

    let bytes1 = std::fs::read(dir1.join("records.csv")).unwrap();
    let bytes2 = std::fs::read(dir2.join("records.csv")).unwrap();
    assert_eq!(bytes1, bytes2, "records.csv differs across worker counts");

    for name in ["summary.json", "bias.csv", "per_image.csv"] {
        assert!(dir1.join(name).exists(), "{name} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["methods"]["cumulant"]["cells"], 16);
    assert_eq!(summary["methods"]["cumulant"]["failures"], 0);
}

#[test]
fn evaluate_reads_images_from_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("imgs");
    std::fs::create_dir(&images).unwrap();
    for (i, seed) in [(0u32, 31u64), (1, 32)] {
        let img = synthetic_image(64, 48, seed).unwrap();
        save_pgm(&img, images.join(format!("scene{i}.pgm")), PgmDepth::Eight).unwrap();
    }
    // A file the sweep must ignore.
    std::fs::write(images.join("notes.txt"), "not an image").unwrap();

    let out_dir = dir.path().join("reports");
    run_ok(bin().args([
        "evaluate",
        "--images",
        images.to_str().unwrap(),
        "--profile",
        "custom",
        "--a-grid",
        "10:10:1",
        "--b-grid",
        "0.08:0.08:1",
        "--seeds",
        "1",
        "--methods",
        "cumulant",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let records = std::fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 3); // header + 2 images x 1 cell
    assert!(records.contains("scene0"));
    assert!(records.contains("scene1"));
    // Cumulant-only sweeps mark the variance column group as skipped.
    assert!(records.lines().nth(1).unwrap().contains(",skipped,"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    // Invalid parameters surface as nonzero exits with stderr messages.
    let out = bin()
        .args([
            "simulate",
            "--input",
            "/nonexistent.pgm",
            "--a",
            "5",
            "--b",
            "0.1",
            "--out",
            "/tmp/x",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());

    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "evaluate",
            "--synthetic",
            "1",
            "--profile",
            "custom",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("custom"));
}
