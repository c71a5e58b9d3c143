//! Black-box tests of the command-line binary: exit codes, error wording,
//! CSV output, and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_peak-aoi"));
    c.env_remove("PEAK_AOI_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    for sub in ["eval", "optimize", "sweep"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub} --help");
    }
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["--definitely-not-a-flag"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["eval", "--scheme", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("window-fb"),
        "unknown scheme error should list valid names: {}",
        stderr(&o)
    );

    let o = run(&["sweep", "volume"]);
    assert_eq!(o.status.code(), Some(1));

    // A knob without a scheme has nothing to attach to.
    let o = run(&["eval", "--W", "8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scheme"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[params]\nlamda = 2.0\n").unwrap();
    let o = run(&[
        "--config",
        path.to_str().unwrap(),
        "eval",
        "--scheme",
        "window-fb",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));

    std::fs::write(&path, "[dist]\ntheta = 10\nm1 = 1\nm2 = 20\np2 = 0.2\n").unwrap();
    let o = run(&[
        "--config",
        path.to_str().unwrap(),
        "eval",
        "--scheme",
        "window-fb",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("theta"), "{err}");
}

#[test]
fn eval_reports_analytic_sim_and_verdict() {
    let o = run(&[
        "--cycles",
        "20000",
        "--seed",
        "7",
        "eval",
        "--scheme",
        "window-fb",
        "--W",
        "8",
        "--B",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("analytic"), "{out}");
    assert!(out.contains("sim"), "{out}");
    assert!(out.contains("verdict"), "{out}");

    // Threshold schemes have no closed form and must say so.
    let o = run(&[
        "--cycles",
        "20000",
        "eval",
        "--scheme",
        "threshold-fb",
        "--W",
        "12",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("simulation-only"), "{}", stdout(&o));
}

#[test]
fn dead_policies_are_rejected() {
    // Service takes at least 1 time unit, so a gate at 0.5 never commits.
    let o = run(&["eval", "--scheme", "window-fb", "--W", "0.5", "--B", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("gate"), "{}", stderr(&o));
}

#[test]
fn trace_file_has_the_cycle_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let o = run(&[
        "--cycles",
        "500",
        "--seed",
        "3",
        "eval",
        "--scheme",
        "prob-nofb",
        "--W",
        "9",
        "--ptx",
        "0.6",
        "--trace",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "cycle_index,Y,S,n_generations,n_transmissions,t_ext"
    );
    assert_eq!(lines.count(), 500);
}

#[test]
fn optimize_prints_the_tuned_policy() {
    let o = run(&["--cycles", "20000", "optimize", "window-fb"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("window-fb W="), "{out}");
    assert!(out.contains("evaluations"), "{out}");

    // The simulated threshold search reports its fixed-point diagnostics.
    // At smoke-test cycle counts the flat objective localizes W poorly, so
    // the diagnostic may legitimately report FAIL (exit 2); this test pins
    // the output format, not the statistical outcome.
    let o = run(&["--cycles", "20000", "optimize", "threshold-fb"]);
    assert!(
        matches!(o.status.code(), Some(0) | Some(2)),
        "{:?}: {}",
        o.status.code(),
        stderr(&o)
    );
    let out = stdout(&o);
    assert!(out.contains("fixed-point line"), "{out}");
    assert!(out.contains("residual"), "{out}");
}

fn sweep_csv(dir: &Path, name: &str, workers: &str) -> Vec<u8> {
    let cfg = dir.join("sweep.toml");
    std::fs::write(
        &cfg,
        "[sim]\ncycles = 2000\nseed = 5\n[sweep]\nlambdas = [0.5, 1.0]\n",
    )
    .unwrap();
    let out = dir.join(name);
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
        "sweep",
        "lambda",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    std::fs::read(&out).unwrap()
}

#[test]
fn sweep_csv_is_reproducible_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = sweep_csv(dir.path(), "a.csv", "1");
    let b = sweep_csv(dir.path(), "b.csv", "1");
    let c = sweep_csv(dir.path(), "c.csv", "2");
    assert_eq!(a, b, "same invocation must be byte-identical");
    assert_eq!(a, c, "worker count must not change the bytes");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_var,sweep_value,scheme,W,B,pTx,analytic,sim,stderr,n_cycles,seed,verdict"
    );
    // 2 lambda values x 6 schemes.
    assert_eq!(lines.count(), 12);
}
