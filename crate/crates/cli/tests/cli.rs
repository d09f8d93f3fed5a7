//! End-to-end behaviour of the `homolock` binary.

use std::path::Path;
use std::process::{Command, Output};

fn homolock(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homolock"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("NO_COLOR", "1")
        .output()
        .unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    let idx = header.split(',').position(|c| c == name).unwrap();
    data_rows(csv).iter().map(|r| r[idx]).collect()
}

#[test]
fn unpumped_spectrum_is_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("vac.cfg");
    std::fs::write(
        &cfg,
        "[opo]\nkappa_s = 4 MHz\nkappa_l = 1 MHz\nchi = 0 Hz\n[detection]\nefficiency = 0.7\n",
    )
    .unwrap();
    let out = homolock(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    for name in ["variance_plus", "variance_minus"] {
        assert!(column(&csv, name).iter().all(|&v| v == 1.0), "{name}");
    }
}

#[test]
fn default_sweep_has_two_crossings() {
    let dir = tempfile::tempdir().unwrap();
    let out = homolock(&["sweep"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let e = column(&csv, "error_signal");
    let crossings = e
        .windows(2)
        .filter(|w| (w[0] < 0.0) != (w[1] < 0.0))
        .count();
    assert_eq!(crossings, 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 zero crossings"));
}

#[test]
fn csv_header_block() {
    let dir = tempfile::tempdir().unwrap();
    assert!(homolock(&["squeezer", "--seed", "5"], dir.path())
        .status
        .success());
    let csv = std::fs::read_to_string(dir.path().join("squeezer.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert!(lines[0].starts_with("# homolock "));
    assert_eq!(lines[1], "# command: squeezer");
    assert!(lines[2].starts_with("# config_sha256: "));
    assert_eq!(lines[2].len(), "# config_sha256: ".len() + 64);
    assert_eq!(lines[3], "# seed: 5");
}

#[test]
fn seed_changes_hash_and_stochastic_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(homolock(&["squeezer", "--seed", seed], &out)
            .status
            .success());
        std::fs::read_to_string(out.join("squeezer_trajectories.csv")).unwrap()
    };
    let (a, b) = (run("1", "a"), run("2", "b"));
    assert_ne!(data_rows(&a), data_rows(&b));
    assert_ne!(a.lines().nth(2), b.lines().nth(2));
}

#[test]
fn svg_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    assert!(homolock(&["sweep"], dir.path()).status.success());
    assert!(!dir.path().join("sweep.svg").exists());
    assert!(homolock(&["sweep", "--svg"], dir.path()).status.success());
    let svg = std::fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = homolock(&["sweep", "--set", "sweep.pionts=3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pionts"));
    let out = homolock(&["sweep", "--config", "/nonexistent/x.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = homolock(&["sweep", "--set", "nodot=1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn physics_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("above.cfg");
    std::fs::write(&cfg, "[opo]\nkappa_s = 1 MHz\nchi = 2 MHz\n").unwrap();
    let out = homolock(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = homolock(&["sweep", "--set", "opo.gain_model=unpumped"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = homolock(
        &["squeezer", "--set", "squeezer.transmittivity=1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes_without_color() {
    let out = homolock_no_out(&["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 7);
    assert!(!text.contains('\x1b'));
}

fn homolock_no_out(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homolock"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .unwrap()
}
