use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fctn_hsr::experiment::{read_rows, Manifest};
use fctn_hsr::{npy, DenseTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fctn-hsr")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&cli(&["fuse", "--synthetic", "--max-iter", "2", "--out", path(&out)])), 0);
    let bad = cli(&["fuse", "--synthetic", "--lambda", "-1", "--out", path(&out)]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("lambda"));
    assert_eq!(code(&cli(&["fuse", "--out", path(&out)])), 2);
    assert_eq!(code(&cli(&["fuse", "--hsi", "a.npy", "--out", path(&out)])), 2);
    assert_eq!(code(&cli(&["fuse", "--synthetic", "--ref", "x.npy"])), 2);
    assert_eq!(code(&cli(&["fuse", "--synthetic", "--max-iter", "0"])), 2);
    // missing file
    assert_eq!(code(&cli(&["fuse", "--ref", "/nonexistent.npy", "--plan", "4x4,8x8", "--ranks", "2,2,2"])), 2);
}

#[test]
fn non_finite_input_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(code(&cli(&["simulate", "--synthetic", "--out", path(&sim)])), 0);
    let mut y = npy::load(&sim.join("hsi.npy")).unwrap();
    y.data_mut()[3] = f64::NAN;
    npy::save(&sim.join("hsi.npy"), &y).unwrap();
    let out = cli(&[
        "fuse",
        "--hsi",
        path(&sim.join("hsi.npy")),
        "--msi",
        path(&sim.join("msi.npy")),
        "--srf",
        path(&sim.join("srf.csv")),
        "--plan",
        "4x4,8x8",
        "--ranks",
        "2,2,2",
        "--p",
        "4",
        "--out",
        path(&dir.path().join("f")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_reproducible_and_shapes_follow_p() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = DenseTensor::from_fn(vec![240, 240, 16], |_| rng.random::<f64>()).unwrap();
    let reference = dir.path().join("ref.npy");
    npy::save(&reference, &x).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = cli(&[
            "simulate",
            "--ref",
            path(&reference),
            "--p",
            "8",
            "--snr-hsi",
            "30",
            "--snr-msi",
            "35",
            "--noise-seed",
            "4",
            "--out",
            path(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["hsi.npy", "msi.npy", "srf.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(npy::load(&a.join("hsi.npy")).unwrap().shape(), &[30, 30, 16]);
    assert_eq!(npy::load(&a.join("msi.npy")).unwrap().shape(), &[240, 240, 4]);
}

#[test]
fn single_iteration_writes_every_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let res = cli(&["fuse", "--synthetic", "--max-iter", "1", "--out", path(&out)]);
    assert_eq!(code(&res), 0);
    for f in ["estimate.npy", "objective.csv", "metrics.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(npy::load(&out.join("estimate.npy")).unwrap().shape(), &[32, 32, 8]);
    let objective = fs::read_to_string(out.join("objective.csv")).unwrap();
    assert_eq!(objective.lines().count(), 3); // header, initial state, one sweep
    let rows = read_rows(&out.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].iterations, 1);
}

#[test]
fn manifest_reruns_reproduce_the_estimate() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let res = cli(&[
        "fuse",
        "--synthetic",
        "--max-iter",
        "4",
        "--seed",
        "3",
        "--snr-hsi",
        "25",
        "--snr-msi",
        "25",
        "--noise-seed",
        "9",
        "--beta",
        "0.2",
        "--out",
        path(&first),
    ]);
    assert_eq!(code(&res), 0);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "fuse");
    assert_eq!(manifest.config.beta, Some(0.2));

    let second = dir.path().join("second");
    let res = cli(&["fuse", "--config", path(&first.join("manifest.json")), "--out", path(&second)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read(first.join("estimate.npy")).unwrap(), fs::read(second.join("estimate.npy")).unwrap());
    assert_eq!(fs::read(first.join("objective.csv")).unwrap(), fs::read(second.join("objective.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(threads);
        let res = cli(&["--threads", threads, "fuse", "--synthetic", "--max-iter", "3", "--out", path(&out)]);
        assert_eq!(code(&res), 0);
        fs::read(out.join("estimate.npy")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn ablate_rows_share_seed_and_iterations() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let res = cli(&["ablate", "--synthetic", "--max-iter", "3", "--seed", "5", "--run-id", "abl", "--out", path(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let rows = read_rows(&out.join("ablation.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].run_id, "abl/beta=0.1");
    assert_eq!(rows[1].run_id, "abl/beta=0");
    assert_eq!(rows[0].iterations, rows[1].iterations);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.config.seed, Some(5));
    assert!(String::from_utf8_lossy(&res.stdout).contains("delta sam"));
}

#[test]
fn oracle_check_passes_and_catches_a_sign_fault() {
    let ok = cli(&["oracle-check"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("9 of 9 checks passed"), "{text}");

    let bad = cli(&["oracle-check", "--inject-fault", "composite-sign"]);
    assert_eq!(code(&bad), 1);
    let text = String::from_utf8_lossy(&bad.stdout);
    let failing: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].contains("factorization identity"));
}
