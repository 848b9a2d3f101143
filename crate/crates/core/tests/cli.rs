//! End-to-end CLI contract tests: exit codes, run-directory layout, override
//! propagation, and deterministic evaluation reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ftbiped::config::Config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ftbiped"))
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
[run]
name = "t"
seed = 11

[sim]
dt = 0.002
substeps = 5

[ppo]
envs = 2
steps_per_iter = 16
iterations = 4
horizon_s = 0.6
hidden = [8, 8]
minibatch = 16
checkpoint_every = 2

[estimator]
hidden = 8
max_windows_per_iter = 8

[eval]
episodes = 2
horizon_s = 0.6
success_time_s = 0.4
"#,
    )
    .unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn missing_config_exits_2_naming_path() {
    let out = run(bin().args(["train", "--config", "/definitely/missing.toml"]));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/definitely/missing.toml"), "{stderr}");
}

#[test]
fn usage_error_exits_2() {
    let out = run(bin().arg("definitely-not-a-subcommand"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_eval_scenario_exits_2_listing_names() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    // A checkpoint is required structurally; train first.
    let out_dir = dir.path().join("runs");
    let out = run(bin().args([
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = out_dir.join("t/checkpoints/ckpt_latest.bin");
    let out = run(bin().args([
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--scenario",
        "bogus",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus") && stderr.contains("lock_l_hip"), "{stderr}");
}

#[test]
fn unknown_ablate_variant_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out = run(bin().args([
        "ablate",
        "--config",
        config.to_str().unwrap(),
        "--variant",
        "nope",
    ]));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_phase_modulation"), "{stderr}");
}

#[test]
fn dry_run_writes_csv_checkpoint_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("runs");
    let out = run(bin().args([
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--dry-run",
        "--quiet",
        "--set",
        "curriculum.threshold_fault_s=5",
    ]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = out_dir.join("t");

    // Well-formed CSV: header plus ten dry-run iterations.
    let metrics = std::fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), 1 + 10, "{metrics}");
    let cols = lines[0].split(',').count();
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), cols);
    }

    assert!(run_dir.join("checkpoints/ckpt_latest.bin").exists());

    // Override propagation: snapshot records the value and the curriculum
    // built from the snapshot honors it.
    let snapshot = Config::load(&run_dir.join("config.toml")).unwrap();
    assert_eq!(snapshot.curriculum.threshold_fault_s, 5.0);
    let mut curriculum =
        ftbiped::trainer::Curriculum::new(&snapshot.curriculum, snapshot.ablation.curriculum);
    assert_eq!(
        curriculum.tick_with(5.5),
        ftbiped::env::CurriculumStage::FaultsEnabled
    );
    // Dry-run forces the single-environment smoke shape.
    assert_eq!(snapshot.ppo.envs, 1);
    assert_eq!(snapshot.ppo.iterations, 10);
}

#[test]
fn eval_report_is_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("runs");
    let out = run(bin().args([
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]));
    assert_eq!(out.status.code(), Some(0));
    let ckpt = out_dir.join("t/checkpoints/ckpt_latest.bin");

    let mut summaries = Vec::new();
    for pass in 0..2 {
        let eval_out = dir.path().join(format!("eval{pass}"));
        let out = run(bin().args([
            "eval",
            "--config",
            config.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--out",
            eval_out.to_str().unwrap(),
            "--scenario",
            "healthy",
            "--scenario",
            "power_l_knee",
            "--no-traces",
        ]));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        summaries.push(std::fs::read_to_string(eval_out.join("t_eval/summary.csv")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn emitted_csv_round_trips_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("runs");
    run(bin().args([
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]));
    let metrics = std::fs::read_to_string(out_dir.join("t/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    let _header = lines.next().unwrap();
    for line in lines {
        for field in line.split(',') {
            let v: f64 = field.parse().expect("numeric field");
            // Display for f64 is the shortest representation that parses
            // back to the same value, so re-formatting must be identical.
            assert_eq!(format!("{v}"), field);
        }
    }
}

#[test]
fn inspect_prints_header() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("runs");
    run(bin().args([
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]));
    let ckpt = out_dir.join("t/checkpoints/ckpt_latest.bin");
    let out = run(bin().args(["inspect", ckpt.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iteration"), "{stdout}");
    assert!(stdout.contains("sigma"), "{stdout}");
    assert!(stdout.contains("actor sizes"), "{stdout}");
}

#[test]
fn inspect_exports_gait_reference_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let csv = dir.path().join("gait.csv");
    let out = run(bin().args([
        "inspect",
        "--gait-csv",
        csv.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("phi,"));
    assert!(text.lines().count() > 100);
}
