use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qtherm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtherm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dimer.cfg");
    fs::write(&cfg, "# dimer\nsites = 2\nU = 0:4:3\nv0 = 2\nmethod = both\n").unwrap();
    let out = dir.path().join("run");
    let o = qtherm(&["sweep", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&out), "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["resolved_config.txt", "densities.csv", "moments.csv", "scf.csv", "moments_ks.csv", "compare.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let moments = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert_eq!(moments.lines().count(), 4);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qtherm(&[
        "sweep", "--set", "U=3", "--set", "v0=1", "--dv0", "0.01", "--alpha", "0.5", "--tol", "1e-9", "--fd-step", "2e-4",
        "--out", &out_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved = fs::read_to_string(out.join("resolved_config.txt")).unwrap();
    assert!(resolved.starts_with("# qtherm "));
    for line in ["dv0 = 0.01", "alpha = 0.5", "tol = 0.000000001", "fd_step = 0.0002"] {
        assert!(resolved.contains(line), "{line} missing from\n{resolved}");
    }
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    for args in [
        vec!["sweep", "--set", "beta=-1", "--out", &out],
        vec!["sweep", "--set", "bogus=1", "--out", &out],
        vec!["sweep", "--set", "sites=10", "--out", &out],
        vec!["sweep", "--alpha", "2", "--out", &out],
        vec!["preset", "fig4", "--out", &out],
        vec!["sweep", "--set", "U", "--out", &out],
    ] {
        let o = qtherm(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = qtherm(&["sweep", "--set", "sites=10", "--out", &out]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("L <= 8"));
}

#[test]
fn unconverged_scf_exits_3_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = qtherm(&[
        "scf", "--set", "sites=4", "--set", "U=0,8", "--set", "v0=5", "--set", "max_iter=3", "--out", &out_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let scf = fs::read_to_string(out.join("scf.csv")).unwrap();
    assert!(scf.lines().any(|l| l.ends_with(",true")));
    assert!(scf.lines().any(|l| l.ends_with(",false")));
}

#[test]
fn pdw_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pdw");
    let o = qtherm(&["pdw", "--set", "U=3", "--set", "v0=2", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("pdw.csv")).unwrap().starts_with("w,p\n"));
    assert!(out.join("response.csv").exists());
}

#[test]
fn preset_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = qtherm(&["preset", "fig3b", "--out", &out_arg(out), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in fs::read_dir(&a).unwrap() {
        let name = f.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn compare_subcommand_forces_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = qtherm(&["compare", "--set", "U=1,2", "--set", "method=exact", "--out", &out_arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("metric.csv")).unwrap().lines().count(), 3);
}
