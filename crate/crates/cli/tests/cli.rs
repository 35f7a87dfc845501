use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noisyboost::boost::ensemble_from_str;

const BIN: &str = env!("CARGO_BIN_EXE_noisyboost");

fn wdbc() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/wdbc.csv")
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(out)
        .arg("--data")
        .arg(wdbc())
        .args(args)
        .output()
        .expect("spawn noisyboost")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = run(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn trained(rounds: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["train", "--rounds", rounds]);
    dir
}

/// Data rows of an allocation file: (beta, r).
fn allocation_rows(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn train_writes_ensemble_and_log() {
    let dir = trained("10");
    let ens = ensemble_from_str(&fs::read_to_string(dir.path().join("ensemble.txt")).unwrap()).unwrap();
    assert_eq!(ens.len(), 10);
    assert!((ens.alphas().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let log = fs::read_to_string(dir.path().join("training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 11);
    assert!(log.starts_with("round,feature,threshold,polarity,weighted_error,raw_alpha,alpha"));
}

#[test]
fn train_twenty_rounds() {
    let dir = trained("20");
    let ens = ensemble_from_str(&fs::read_to_string(dir.path().join("ensemble.txt")).unwrap()).unwrap();
    assert_eq!(ens.len(), 20);
}

#[test]
fn bad_label_column_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--label-col", "nope", "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn unknown_subcommand_and_bad_config_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["bogus"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[train]\nrounds = \"ten\"\n").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(o.status.code(), Some(2));
    let missing = run(dir.path(), &["sweep", "--ensemble", "/nonexistent/ensemble.txt"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn allocate_policies() {
    let dir = trained("10");
    ok(dir.path(), &["allocate", "--proxy", "uniform", "--snr-db", "10"]);
    let rows = allocation_rows(&dir.path().join("allocation_uniform.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|(_, r)| (r - rows[0].1).abs() < 1e-15));

    ok(dir.path(), &["allocate", "--proxy", "gaussian", "--snr-db", "10"]);
    let rows = allocation_rows(&dir.path().join("allocation_gaussian.csv"));
    for a in &rows {
        for b in &rows {
            if a.0 > b.0 {
                assert!(a.1 >= b.1);
            }
        }
    }

    let stdout = ok(dir.path(), &["allocate", "--proxy", "chernoff", "--snr-db", "-3"]);
    assert!(stdout.contains("chernoff s ="));
    let text = fs::read_to_string(dir.path().join("allocation_chernoff.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# chernoff_s=")));
}

#[test]
fn single_point_sweep_has_one_row() {
    let dir = trained("10");
    ok(dir.path(), &["sweep", "--policies", "gaussian"]);
    let cfg = dir.path().join("grid.toml");
    fs::write(&cfg, "[sweep]\nsnr_db = [10.0]\npolicies = [\"markov\"]\n").unwrap();
    ok(dir.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "policy,snr_total_db,p_m,p_e_clean,p_e_noisy,markov_bound,chernoff_bound,chernoff_s,gaussian_estimate,ci_halfwidth,method"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("markov,10,"));
    assert!(lines[1].ends_with(",exact"));
}

#[test]
fn sweep_reports_gains() {
    let dir = trained("10");
    let stdout = ok(dir.path(), &["sweep"]);
    for p in ["markov", "chernoff", "gaussian"] {
        assert!(stdout.contains(&format!("{p}: SNR gain over uniform")), "{stdout}");
    }
}

#[test]
fn runs_are_byte_identical_and_thread_invariant() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("mc.toml");
    fs::write(
        &cfg,
        "[sweep]\nsnr_db = [0.0, 6.0]\nmode = \"montecarlo\"\ntrials = 500\n",
    )
    .unwrap();
    for (dir, threads) in [(a.path(), "1"), (b.path(), "3")] {
        ok(dir, &["train"]);
        ok(
            dir,
            &[
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                threads,
                "--seed",
                "42",
                "sweep",
            ],
        );
    }
    for f in ["ensemble.txt", "training_log.csv", "sweep.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let csv = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",montecarlo")));
}

#[test]
fn effective_config_is_echoed_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--test-frac", "0.25", "train", "--rounds", "3"]);
    let echoed = dir.path().join("effective_config.toml");
    let text = fs::read_to_string(&echoed).unwrap();
    assert!(text.contains("test_fraction = 0.25"));
    assert!(text.contains("rounds = 3"));
    let again = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args([
            "--config",
            echoed.to_str().unwrap(),
            "--out",
            again.path().to_str().unwrap(),
            "train",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(dir.path().join("ensemble.txt")).unwrap(),
        fs::read(again.path().join("ensemble.txt")).unwrap()
    );
}

#[test]
fn eval_prints_report() {
    let dir = trained("10");
    let stdout = ok(dir.path(), &["eval", "--proxy", "gaussian", "--snr-db", "12"]);
    assert!(stdout.contains("method            exact"));
    let csv = fs::read_to_string(dir.path().join("eval_gaussian.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
