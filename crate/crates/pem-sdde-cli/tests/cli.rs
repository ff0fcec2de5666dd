//! End-to-end checks of the binary: flag handling, output formats, exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pem-sdde"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn write_problem(dir: &Path, file: &str, body: &str) -> String {
    let path = dir.join(file);
    fs::write(&path, body).expect("problem file written");
    path.to_string_lossy().into_owned()
}

const CUBIC_GROWTH: &str = "\
name = cubic-growth
drift = x^3
diffusion = 0
history = 2
delay = 1
horizon = 2
q = 3
";

#[test]
fn simulate_is_byte_deterministic() {
    let args = ["simulate", "--problem", "example1", "--M", "64", "--seed", "7"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn simulate_reports_missing_files_as_usage_errors() {
    let out = run(&["simulate", "--problem", "nofile.prob"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot open"), "stderr: {}", stderr(&out));
}

#[test]
fn simulate_emits_one_row_per_node() {
    let out = run(&[
        "simulate", "--problem", "example1", "--M", "64", "--alpha", "0.125",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("n,"))
        .count();
    assert_eq!(data_rows, 64 + 128 + 1);
    assert!(text.lines().next().unwrap() == "n,t,x0");
    assert!(text.contains("# alpha=0.125"));
}

#[test]
fn simulate_writes_nothing_on_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(
        dir.path(),
        "bad.prob",
        "name = divide\ndrift = 1/0\ndiffusion = 0\nhistory = 0\ndelay = 1\nhorizon = 2\nq = 2\n",
    );
    let target = dir.path().join("out.csv");
    let out = run(&[
        "simulate", "--problem", &problem, "--output", target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!target.exists(), "failed run must not leave partial output");
}

#[test]
fn simulate_flags_classical_divergence_in_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "cubic.prob", CUBIC_GROWTH);
    let out = run(&[
        "simulate", "--problem", &problem, "--scheme", "classical", "--M", "2",
        "--horizon", "8",
    ]);
    assert!(out.status.success(), "divergence is flagged, not fatal");
    let text = stdout(&out);
    assert!(text.contains("# diverged_at="), "missing marker: {text}");
    assert!(text.contains("NaN"));
}

#[test]
fn converge_rejects_too_few_paths_and_bad_levels() {
    let too_few = run(&[
        "converge", "--problem", "example1", "--ref-steps", "64", "--levels", "8",
        "--paths", "1",
    ]);
    assert_eq!(too_few.status.code(), Some(2));

    let bad_level = run(&[
        "converge", "--problem", "example1", "--ref-steps", "64", "--levels", "3",
        "--paths", "4",
    ]);
    assert_eq!(bad_level.status.code(), Some(2));
    assert!(stderr(&bad_level).contains("divide"), "stderr: {}", stderr(&bad_level));
}

#[test]
fn converge_writes_csv_and_prints_the_slope() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("levels.csv");
    let out = run(&[
        "converge", "--problem", "example1", "--ref-steps", "256",
        "--levels", "8,16", "--paths", "16", "--output", target.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("fitted slope"));
    let csv = fs::read_to_string(&target).unwrap();
    assert!(csv.starts_with("level_factor,h,paths,mean_abs_err,rms_err,stderr_mean,diverged\n"));
    assert!(csv.contains("# fitted_slope="));
}

#[test]
fn converge_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let four = dir.path().join("four.csv");
    for (threads, target) in [("1", &one), ("4", &four)] {
        let out = bin()
            .args([
                "converge", "--problem", "example2", "--ref-steps", "256",
                "--levels", "4,8,16", "--paths", "32", "--seed", "9",
                "--output", target.to_str().unwrap(),
            ])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .expect("binary runs");
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
}

#[test]
fn probe_monotonicity_splits_exit_codes_by_violations() {
    let clean = run(&[
        "probe", "monotonicity", "--problem", "example1", "--eta", "1",
        "--samples", "2000",
    ]);
    assert_eq!(clean.status.code(), Some(0), "stderr: {}", stderr(&clean));
    let text = stdout(&clean);
    assert!(text.contains("violations=0"), "report: {text}");
    assert!(text.contains("fitted L(radius 5)="));

    let dir = tempfile::tempdir().unwrap();
    let cubic = write_problem(dir.path(), "cubic.prob", CUBIC_GROWTH);
    let growing = run(&[
        "probe", "monotonicity", "--problem", &cubic, "--samples", "2000",
        "--radius", "4",
    ]);
    assert_eq!(growing.status.code(), Some(1));
    assert!(stdout(&growing).contains("note="));
}

#[test]
fn probe_rejects_unknown_names() {
    let out = run(&["probe", "bogus", "--problem", "example1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn probe_history_holder_reports_the_fitted_constant() {
    let out = run(&[
        "probe", "history-holder", "--problem", "example1", "--pairs", "5000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("fitted K_history=0.84"), "report: {text}");
}

#[test]
fn probe_output_is_deterministic_for_a_fixed_seed() {
    let args = [
        "probe", "c-stability", "--problem", "example1", "--M", "16",
        "--arg-pairs", "8", "--noise-samples", "100", "--seed", "5",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0), "stderr: {}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);
}
