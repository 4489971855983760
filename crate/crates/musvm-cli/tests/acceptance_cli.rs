//! Acceptance gate for the command-line surface: byte-level determinism of
//! trained models across repeated runs and across worker-pool sizes.

use std::path::Path;
use std::process::Command;

fn musvm(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_musvm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch the binary")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let out = musvm(dir, args);
    assert!(
        out.status.success(),
        "`musvm {}` failed:\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn c11_training_is_byte_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().expect("tempdir");
    let dir = dir.path();
    run_ok(
        dir,
        &[
            "gen", "-o", "train.txt", "--universum", "u.txt", "--universum-size", "90",
            "--classes", "3", "--dim", "2", "--per-class", "30", "--test-per-class", "1",
            "--seed", "42",
        ],
    );

    let train = |model: &str, threads: &str| {
        run_ok(
            dir,
            &[
                "train", "--data", "train.txt", "--universum", "u.txt", "-C", "1",
                "--cstar-ratio", "auto", "--delta", "0.05", "--kernel", "rbf", "--gamma",
                "0.25", "-o", model, "--threads", threads,
            ],
        );
        std::fs::read(dir.join(model)).expect("model file")
    };

    let first = train("m_first.txt", "1");
    let second = train("m_second.txt", "1");
    let wide = train("m_wide.txt", "8");

    assert!(!first.is_empty(), "model file is empty");
    assert_eq!(first, second, "identical flags produced different model bytes");
    assert_eq!(first, wide, "--threads 1 and --threads 8 produced different model bytes");
    println!(
        "PASS determinism: repeated runs and 1-vs-8 worker threads produce byte-identical \
         {}-byte model files",
        first.len()
    );
}
