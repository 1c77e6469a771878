use std::fs;
use std::path::Path;
use std::process::Command;

fn veckin(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_veckin"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("VECKIN_THREADS")
        .output()
        .expect("spawn veckin")
}

#[test]
fn run_writes_solution_and_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = veckin(
        &[
            "run",
            "--case",
            "advection",
            "--scheme",
            "ec",
            "--nx",
            "256",
            "--cfl",
            "0.1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let solution = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    let mut lines = solution.lines();
    assert_eq!(lines.next(), Some("x,comp_0"));
    assert_eq!(lines.count(), 256);

    let entropy = fs::read_to_string(dir.path().join("entropy.csv")).unwrap();
    let mut lines = entropy.lines();
    assert_eq!(
        lines.next(),
        Some("t,eta_mean,H_1,H_2,signed_eta,abs_eta,signed_H_1,signed_H_2,abs_H_1,abs_H_2")
    );
    // One row per step; T/Δt = 11·256 exactly.
    assert_eq!(lines.count(), 11 * 256);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["run", "--case", "sw-periodic", "--nx", "24", "--tend", "0.02"];
    assert_eq!(veckin(&args, a.path()).status.code(), Some(0));
    assert_eq!(veckin(&args, b.path()).status.code(), Some(0));
    for name in ["solution.csv", "entropy.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let header = fs::read_to_string(a.path().join("solution.csv")).unwrap();
    assert!(header.starts_with("x,y,comp_0,comp_1,comp_2\n"));
}

#[test]
fn thread_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "run",
        "--case",
        "sw-cyl-dambreak",
        "--scheme",
        "es2-limited",
        "--nx",
        "20",
        "--tend",
        "0.02",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_veckin"))
        .args(args)
        .arg("--out")
        .arg(a.path())
        .env("VECKIN_THREADS", "1")
        .status()
        .unwrap();
    let three = Command::new(env!("CARGO_BIN_EXE_veckin"))
        .args(args)
        .arg("--out")
        .arg(b.path())
        .env("VECKIN_THREADS", "3")
        .status()
        .unwrap();
    assert!(one.success() && three.success());
    assert_eq!(
        fs::read(a.path().join("solution.csv")).unwrap(),
        fs::read(b.path().join("solution.csv")).unwrap()
    );
}

#[test]
fn eoc_table_leaves_first_order_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = veckin(&["eoc", "--case", "burgers", "--grids", "32,64"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("eoc.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "n,dx,l2,order");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("32,") && rows[1].ends_with(','));
    let order: f64 = rows[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(order > 1.5);
}

#[test]
fn audit_passes_and_records_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = veckin(&["audit", "--case", "sw-vortex", "--samples", "2000"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    let ec = csv.lines().find(|l| l.starts_with("ec_kinetic_residual,")).unwrap();
    let value: f64 = ec.split(',').nth(1).unwrap().parse().unwrap();
    assert!(value <= 1e-11);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run"],
        vec!["run", "--case", "advection", "--frobnicate"],
        vec!["run", "--case", "euler"],
        vec!["eoc", "--case", "advection", "--grids", "64"],
    ] {
        let out = veckin(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_veckin"))
        .args(["run", "--case", "advection", "--nx", "8", "--out"])
        .arg(dir.path())
        .env("VECKIN_THREADS", "0")
        .status()
        .unwrap();
    assert_eq!(bad_threads.code(), Some(2));
}

#[test]
fn blow_up_exits_with_one_and_keeps_partial_reports() {
    let dir = tempfile::tempdir().unwrap();
    // Without dissipation the expansion fan drives the depth negative.
    let out = veckin(&["run", "--case", "sw-expansion", "--scheme", "ec"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blew up"));
    let entropy = fs::read_to_string(dir.path().join("entropy.csv")).unwrap();
    assert!(entropy.lines().count() > 2);
    assert!(dir.path().join("solution.csv").exists());
}
