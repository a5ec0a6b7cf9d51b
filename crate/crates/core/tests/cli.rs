mod common;

use std::path::Path;
use std::process::{Command, Output};

fn qgen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgen"))
        .args(args)
        .current_dir(dir)
        .env_remove("QGEN_BACKEND_URL")
        .env_remove("QGEN_BACKEND_TOKEN")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(fx: &common::Fixture, extra: &str) -> std::path::PathBuf {
    let path = fx.dir.path().join("config.json");
    std::fs::write(
        &path,
        format!(
            r#"{{"dataset": "squad.json", "vectors": "vectors.txt",
                "backend": {{"kind": "mock"}}, "seed": 3, "sample_size": 3{extra}}}"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_then_report() {
    let fx = common::fixture(8);
    let config = write_config(&fx, "");
    let out = fx.dir.path().join("run");
    let res = qgen(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        fx.dir.path(),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("prompt A: n=15"), "{stdout}");
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("fig8_max_series.csv").is_file());

    let again = fx.dir.path().join("again");
    let res = qgen(
        &[
            "report",
            "--run",
            out.to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ],
        fx.dir.path(),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(
        std::fs::read(out.join("fig6_boxplot.csv")).unwrap(),
        std::fs::read(again.join("fig6_boxplot.csv")).unwrap()
    );
}

#[test]
fn flags_override_the_config() {
    let fx = common::fixture(8);
    let config = write_config(&fx, "");
    let out = fx.dir.path().join("run");
    let res = qgen(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "99",
            "--sample-size",
            "2",
            "--threshold",
            "0.5",
        ],
        fx.dir.path(),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 99);
    assert_eq!(manifest["config"]["sample_size"], 2);
    assert_eq!(manifest["config"]["threshold"], 0.5);
}

#[test]
fn stats_writes_dataset_figures() {
    let fx = common::fixture(8);
    let out = fx.dir.path().join("stats");
    let res = qgen(
        &[
            "stats",
            "--dataset",
            fx.dataset.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--top-k",
            "5",
        ],
        fx.dir.path(),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let keywords = std::fs::read_to_string(out.join("fig2_keywords.csv")).unwrap();
    assert_eq!(keywords.lines().count(), 6);
    assert!(out.join("fig1_lengths.csv").is_file());
}

#[test]
fn exit_codes_follow_error_class() {
    let fx = common::fixture(4);

    let unknown = write_config(&fx, r#", "bogus": 1"#);
    let res = qgen(
        &["run", "--config", unknown.to_str().unwrap()],
        fx.dir.path(),
    );
    assert_eq!(res.status.code(), Some(1));

    let too_many = write_config(&fx, "");
    let res = qgen(
        &[
            "run",
            "--config",
            too_many.to_str().unwrap(),
            "--sample-size",
            "50",
        ],
        fx.dir.path(),
    );
    assert_eq!(res.status.code(), Some(2));

    // Nothing listens on the discard port.
    let http = write_config(
        &fx,
        r#", "retry": {"max_attempts": 1, "initial_backoff_ms": 1}"#,
    );
    let res = Command::new(env!("CARGO_BIN_EXE_qgen"))
        .args([
            "run",
            "--config",
            http.to_str().unwrap(),
            "--backend",
            "http",
        ])
        .current_dir(fx.dir.path())
        .env("QGEN_BACKEND_URL", "http://127.0.0.1:9/")
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    let res = qgen(&["report", "--run", "nowhere"], fx.dir.path());
    assert_ne!(res.status.code(), Some(0));
}
