mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use common::*;
use opfree::cli::{run, Command, Overrides, DEFAULT_THRESHOLD};

fn opfree(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_opfree")).args(args).output().unwrap()
}

fn meta(path: &Path) -> HashMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn small(dir: &Path) -> Overrides {
    Overrides {
        grid_points: Some(2000),
        size: Some(40),
        trials: Some(2),
        bins: Some(20),
        output_dir: Some(dir.to_path_buf()),
        ..Overrides::default()
    }
}

#[test]
fn density_on_every_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    for name in SHIPPED {
        let out = run(Command::Density, &config_path(name), &small(dir.path()), DEFAULT_THRESHOLD, |_| {}).unwrap();
        assert_eq!(out.exit_code, 0);
        let csv = fs::read_to_string(dir.path().join(format!("{name}_density.csv"))).unwrap();
        assert!(csv.starts_with("t,density\n"));
        assert_eq!(csv.lines().count(), 2001);
        let m = meta(&dir.path().join(format!("{name}_density.meta")));
        for key in [
            "version",
            "config_hash",
            "epsilon",
            "tol",
            "max_iter",
            "iterations_min",
            "iterations_median",
            "iterations_max",
            "wall_time_s",
            "total_mass",
            "atom_at_zero",
        ] {
            assert!(m.contains_key(key), "{name}: missing {key}");
        }
        assert_eq!(m["clip_count"], "0", "{name}");
    }
}

#[test]
fn overrides_reach_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("s2_shift_s1");
    let out = opfree(&[
        "density",
        cfg.to_str().unwrap(),
        "--grid=-5:5:101",
        "--epsilon",
        "0.001",
        "--tol",
        "1e-11",
        "--max-iter",
        "5000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = meta(&dir.path().join("s2_shift_s1_density.meta"));
    assert_eq!(m["t_min"], "-5");
    assert_eq!(m["t_max"], "5");
    assert_eq!(m["points"], "101");
    assert_eq!(m["epsilon"].parse::<f64>().unwrap(), 1e-3);
    assert_eq!(m["tol"].parse::<f64>().unwrap(), 1e-11);
    assert_eq!(m["max_iter"], "5000");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        run(Command::Compare, &config_path("dcd_discrete"), &small(dir.path()), 10.0, |_| {}).unwrap();
    }
    for file in ["dcd_discrete_density.csv", "dcd_discrete_eigenvalues.csv", "dcd_discrete_histogram.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"bad\"\n[x]\nkind = \"discrete\"\natoms = [[[1.0]]]\nweights = [0.5]\n[y]\nkind = \"discrete\"\natoms = [[[1.0]]]\n").unwrap();
    let out = opfree(&["density", bad.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights"));

    let cfg = config_path("dcd_discrete");
    let out = opfree(&["density", cfg.to_str().unwrap(), "--grid-points", "50", "--max-iter", "2", "--out", out_dir]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));

    let out = opfree(&["density", cfg.to_str().unwrap(), "--grid-points", "2000", "--max-iter", "30", "--skip-bad-points", "--out", out_dir]);
    assert_eq!(out.status.code(), Some(0));
    let skipped = &meta(&dir.path().join("dcd_discrete_density.meta"))["skipped_points"];
    assert!(skipped.split(';').all(|t| t.parse::<f64>().is_ok()) && !skipped.is_empty());

    let sc = config_path("s2_shift_s1");
    let args = ["compare", sc.to_str().unwrap(), "--size", "40", "--trials", "2", "--bins", "20", "--grid-points", "200", "--out", out_dir];
    let pass = opfree(&[&args[..], &["--threshold", "10"]].concat());
    assert_eq!(pass.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&pass.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("l1=")));
    assert!(dir.path().join("s2_shift_s1_overlay.svg").exists());
    let fail = opfree(&[&args[..], &["--threshold", "0"]].concat());
    assert_eq!(fail.status.code(), Some(1));
}
