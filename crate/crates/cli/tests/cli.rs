//! End-to-end tests of the command-line interface: determinism, manifest
//! reruns, exit codes, and the plot pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_learncurve"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"))
}

fn small_sim_args(out: &str) -> Vec<&str> {
    vec![
        "simulate",
        "--out",
        out,
        "--set",
        "K=12",
        "--set",
        "N=6",
        "--set",
        "sigma=0.2",
        "--set",
        "dof=5",
    ]
}

#[test]
fn same_config_same_seed_gives_byte_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&small_sim_args(a.to_str().unwrap()));
    run_ok(&small_sim_args(b.to_str().unwrap()));
    for name in ["trajectories.csv", "summary.csv", "manifest-simulate.cfg"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name} differs");
    }
}

#[test]
fn rerunning_from_the_manifest_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&small_sim_args(a.to_str().unwrap()));
    let manifest = a.join("manifest-simulate.cfg");
    run_ok(&[
        "simulate",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    for name in ["trajectories.csv", "summary.csv"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name} differs");
    }
}

#[test]
fn collision_moves_the_run_into_a_subdirectory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("a");
    run_ok(&small_sim_args(dir.to_str().unwrap()));
    let first = read(&dir.join("trajectories.csv"));
    run_ok(&small_sim_args(dir.to_str().unwrap()));
    // Original artifacts untouched; new run lives in a run-* subdirectory.
    assert_eq!(read(&dir.join("trajectories.csv")), first);
    let subruns: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("run-"))
        .collect();
    assert_eq!(subruns.len(), 1);
    assert!(subruns[0].path().join("trajectories.csv").exists());
}

#[test]
fn invalid_family_exits_2_and_names_the_families() {
    let out = bin()
        .args(["simulate", "--set", "family=gauss", "--out", "/tmp/unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "expected a single-line error: {stderr}");
    for fam in [
        "student_t",
        "beta_recentered",
        "lognormal_recentered",
        "point_mass",
    ] {
        assert!(stderr.contains(fam), "missing {fam}: {stderr}");
    }
}

#[test]
fn verify_with_nonzero_mean_exits_2_with_precondition_message() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "verify",
            "--out",
            tmp.path().to_str().unwrap(),
            "--set",
            "mean=0.5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mean-zero"), "stderr: {stderr}");
}

#[test]
fn missing_ratings_file_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "ingest-summary",
            "--out",
            tmp.path().to_str().unwrap(),
            "--ratings",
            "/nonexistent/ratings.dat",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_config_key_exits_2() {
    let out = bin()
        .args(["simulate", "--set", "bogus=1", "--out", "/tmp/unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn simulate_then_plot_matches_the_closed_form() {
    // Point mass at 0.5: the simulated mean curve must equal the complement
    // of the equicorrelation explained-variance curve, and the plot must be
    // derived from the CSVs alone.
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("pm");
    let dir_s = dir.to_str().unwrap();
    run_ok(&[
        "simulate",
        "--out",
        dir_s,
        "--set",
        "K=30",
        "--set",
        "N=3",
        "--set",
        "family=point_mass",
        "--set",
        "mean=0.5",
    ]);
    run_ok(&["plot", "--out", dir_s]);
    assert!(dir.join("trajectories.svg").exists());

    let summary = read(&dir.join("summary.csv"));
    let rows = learncurve::report::parse_trajectory_summary(&summary).unwrap();
    let theory = learncurve::trajectory::theory_mean_curve(0.5, 29).unwrap();
    for ((k, mean, _), r2) in rows.iter().zip(theory.iter()) {
        assert!(
            (mean - (1.0 - r2)).abs() < 1e-10,
            "k={k}: {mean} vs {}",
            1.0 - r2
        );
    }

    // Plotting twice renders identical bytes and never alters the CSVs.
    let before = read(&dir.join("trajectories.csv"));
    let svg1 = read(&dir.join("trajectories.svg"));
    run_ok(&["plot", "--out", dir_s]);
    assert_eq!(read(&dir.join("trajectories.svg")), svg1);
    assert_eq!(read(&dir.join("trajectories.csv")), before);
}

#[test]
fn cf_train_and_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let ratings = tmp.path().join("ratings.dat");
    let mut lines = Vec::new();
    for u in 1..=30u32 {
        for i in 1..=8u32 {
            if (u + i) % 3 != 0 {
                let r = 1 + ((u * 7 + i * 13) % 5);
                lines.push(format!("{u}::{i}::{r}::{}", 1000 + u + i));
            }
        }
    }
    std::fs::write(&ratings, lines.join("\n") + "\n").unwrap();

    let dir = tmp.path().join("cf");
    let dir_s = dir.to_str().unwrap();
    run_ok(&[
        "cf-train",
        "--out",
        dir_s,
        "--ratings",
        ratings.to_str().unwrap(),
        "--set",
        "cf.factors=4",
        "--set",
        "cf.epochs=3",
    ]);
    assert!(dir.join("model.json").exists());

    run_ok(&[
        "cf-eval",
        "--out",
        dir_s,
        "--ratings",
        ratings.to_str().unwrap(),
    ]);
    let eval = read(&dir.join("cf_eval.csv"));
    let mut it = eval.lines();
    assert_eq!(it.next(), Some("rmse,share_full"));
    let fields: Vec<f64> = it
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(fields[0].is_finite() && fields[0] >= 0.0);
    assert_eq!(fields[1], 1.0); // evaluated on the training users/items
}

#[test]
fn ingest_summary_writes_stats_and_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let ratings = tmp.path().join("r.dat");
    std::fs::write(&ratings, "1::1::1::0\n1::2::5::1\n2::1::3::2\n2::3::3::3\n").unwrap();
    let dir = tmp.path().join("sum");
    run_ok(&[
        "ingest-summary",
        "--out",
        dir.to_str().unwrap(),
        "--ratings",
        ratings.to_str().unwrap(),
        "--set",
        "ingest.threshold=2",
    ]);
    let stats = read(&dir.join("stats.csv"));
    assert!(stats.starts_with("variable,mean,min,p25,p50,p75,max"));
    assert!(stats.contains("rating,3,1,"));
    let counts = read(&dir.join("counts.csv"));
    assert!(counts.contains("n_users,2"));
    assert!(counts.contains("n_items,3"));
    assert!(counts.contains("items_at_threshold,1"));
}

#[test]
fn accumulate_without_ratings_needs_the_synthetic_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["accumulate", "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("accum.synthetic"));
}
