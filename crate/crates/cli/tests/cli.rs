use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_negaflow");

fn config(out: &Path, initial: &str, n: usize) -> String {
    format!(
        r#"[grid]
nx = {n}
np = {n}
x_min = -8.0
x_max = 8.0
p_min = -8.0
p_max = 8.0

[params]
hbar = 1.0
mass = 1.0
kappa = 1.0

[potential]
family = "harmonic"
mass = 1.0
omega = 1.0

[initial]
{initial}

[propagation]
engine = "unified"
dt = 0.05
n_steps = 20
record_every = 5
snapshot_every = 10

[output]
dir = "{}"
heatmaps = false
"#,
        out.display()
    )
}

const GAUSSIAN: &str =
    "kind = \"gaussian\"\nx0 = 1.0\np0 = 0.0\nsigma_x = 0.7071067811865476\nhermite_order = 1";

fn negaflow(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("NEGAFLOW_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_bundle_and_inspect_reads_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, config(&out, GAUSSIAN, 32)).unwrap();

    let o = negaflow(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict:"));
    for f in [
        "config.toml",
        "series.csv",
        "verdict.txt",
        "snap_000000.wps",
        "snap_000010.wps",
        "snap_000020.wps",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);

    let o = negaflow(&["inspect", out.join("snap_000020.wps").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("grid: 32 x 32"), "{text}");
    assert!(text.contains("t: 1"), "{text}");
    assert!(text.contains("n_minus:"), "{text}");
}

#[test]
fn invalid_config_exits_with_one_and_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = config(&tmp.path().join("out"), GAUSSIAN, 32).replace("kappa = 1.0", "kappa = 1.5");
    fs::write(&cfg, text).unwrap();
    let o = negaflow(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 12"), "{err}");
    assert!(err.contains("kappa"), "{err}");
}

#[test]
fn missing_files_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let absent = tmp.path().join("absent.toml");
    assert_eq!(
        negaflow(&["run", absent.to_str().unwrap()]).status.code(),
        Some(3)
    );

    let cut = tmp.path().join("cut.wps");
    fs::write(&cut, b"WPS1\x01\x00").unwrap();
    let o = negaflow(&["inspect", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("truncated header"), "{}", stderr(&o));
}

#[test]
fn oracle_check_reports_ratios_and_rejects_large_snapshot_starts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, config(&out, GAUSSIAN, 24)).unwrap();
    let o = negaflow(&["oracle-check", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("expected ratios"));

    // A 48 x 48 grid exceeds the dense limit and a snapshot cannot be reduced.
    let big_out = tmp.path().join("big");
    let big = tmp.path().join("big.toml");
    fs::write(&big, config(&big_out, GAUSSIAN, 48)).unwrap();
    assert_eq!(
        negaflow(&["run", big.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let from_snap = tmp.path().join("from_snap.toml");
    let initial = "kind = \"snapshot\"\npath = \"big/snap_000000.wps\"";
    fs::write(&from_snap, config(&tmp.path().join("again"), initial, 48)).unwrap();
    let o = negaflow(&["oracle-check", from_snap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn fig2_rejects_kappa_outside_unit_interval() {
    let o = negaflow(&["fig2", "--engine", "unified", "--kappa", "1.5"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = negaflow(&["fig2", "--engine", "classical"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(negaflow(&["--help"]).status.code(), Some(0));
}
