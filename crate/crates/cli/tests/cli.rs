use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use swarmevo_cli::plot::heatmap_values;
use swarmevo_cli::Cli;

fn swarmevo(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmevo"))
        .args(args)
        .current_dir(root)
        .env_remove("SWARMEVO_OUT_DIR")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> Output {
    let o = swarmevo(root, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn evolve_small(root: &Path, task: &str) {
    ok(
        root,
        &[
            "evolve", "--task", task, "--seed", "3", "--generations", "2", "--population", "10", "--trials", "2",
        ],
    );
}

#[test]
fn evolve_writes_archive_and_fitness_plot() {
    let tmp = tempfile::tempdir().unwrap();
    evolve_small(tmp.path(), "dispersion");
    let run = tmp.path().join("results/dispersion/seed_3");
    for f in ["config.toml", "summary.csv", "gen_0000.genome", "gen_0001.genome"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(run.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(tmp.path().join("results/dispersion/fitness.svg").is_file());
}

#[test]
fn out_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_swarmevo"))
        .args(["evolve", "--task", "homing", "--generations", "1", "--population", "5", "--trials", "1"])
        .current_dir(tmp.path())
        .env("SWARMEVO_OUT_DIR", "elsewhere")
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("elsewhere/homing/seed_1/summary.csv").is_file());
    assert!(!tmp.path().join("results").exists());
}

#[test]
fn out_dir_flag_overrides_environment() {
    let cli = Cli::try_parse_from(["swarmevo", "--out-dir", "x", "select", "a"]).unwrap();
    assert_eq!(cli.out_dir, Path::new("x"));
}

#[test]
fn replay_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    evolve_small(root, "monitoring");
    ok(
        root,
        &[
            "replay", "--scenario", "monitoring-square", "--genome", "results/monitoring/seed_3/gen_0001.genome",
            "--robots", "3", "--repeats", "2",
        ],
    );
    let dir = root.join("results/replay/monitoring-square/gen_0001_n3");
    let seed = dir.join("seed_1");
    for f in ["metrics.csv", "trajectory.csv", "trajectory.svg", "coverage.grid", "coverage.svg"] {
        assert!(seed.join(f).is_file(), "missing {f}");
    }
    assert!(dir.join("seed_2/metrics.csv").is_file());

    ok(root, &["plot", "metric", "results/replay/monitoring-square/gen_0001_n3/seed_1/metrics.csv", "--column", "coverage_fraction", "--out", "m.svg"]);
    assert!(root.join("m.svg").is_file() && root.join("m.csv").is_file());

    let bad = swarmevo(
        root,
        &["plot", "metric", "results/replay/monitoring-square/gen_0001_n3/seed_1/metrics.csv", "--column", "nope"],
    );
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nope"));

    ok(root, &["plot", "heatmap", "results/replay/monitoring-square/gen_0001_n3/seed_1/coverage.grid", "--min", "0", "--max", "1", "--out", "h.svg"]);
    let values = heatmap_values(&fs::read_to_string(root.join("h.svg")).unwrap());
    assert!(!values.is_empty());
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));

    ok(root, &["plot", "trajectory", "results/replay/monitoring-square/gen_0001_n3/seed_1/trajectory.csv", "--scenario", "monitoring-square", "--out", "t.svg"]);
    assert!(fs::read_to_string(root.join("t.svg")).unwrap().contains("<svg"));
}

#[test]
fn select_and_posteval() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    evolve_small(root, "homing");
    ok(root, &["posteval", "results/homing/seed_3", "--trials", "3"]);
    let post = fs::read_to_string(root.join("results/homing/seed_3/posteval.csv")).unwrap();
    assert!(post.starts_with("generation,trial,score"));
    assert_eq!(post.lines().count(), 1 + 2 * 3);
    ok(root, &["select", "results/homing/seed_3"]);
    assert!(root.join("results/selected/selected.csv").is_file());
}

#[test]
fn clear_errors_for_bad_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    fs::write(root.join("g.genome"), "not a genome").unwrap();

    let o = swarmevo(root, &["replay", "--scenario", "no-such-scenario", "--genome", "g.genome"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no-such-scenario") && err.contains("dispersion"), "{err}");

    let o = swarmevo(root, &["replay", "--scenario", "homing", "--genome", "missing.genome"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.genome"));

    let o = swarmevo(root, &["replay", "--scenario", "homing", "--genome", "g.genome"]);
    assert!(!o.status.success());

    let o = swarmevo(root, &["evolve", "--task", "swimming"]);
    assert!(!o.status.success());

    let o = swarmevo(root, &["evolve", "--task", "homing", "--population", "0"]);
    assert!(!o.status.success());
}
