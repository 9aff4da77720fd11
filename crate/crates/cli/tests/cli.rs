use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const LEBESGUE: &str = r#"
[ifs]
interval = [0.0, 1.0]
probabilities = [0.5, 0.5]
[[ifs.maps]]
kind = "affine"
coefficients = [0.5, 0.0]
[[ifs.maps]]
kind = "affine"
coefficients = [0.5, 0.5]
"#;

const TWO_RATIO: &str = r#"
[ifs]
interval = [0.0, 1.0]
probabilities = [0.5, 0.5]
[[ifs.maps]]
kind = "affine"
coefficients = [0.5, 0.0]
[[ifs.maps]]
kind = "affine"
coefficients = [0.3333333333333333, 0.6666666666666666]
"#;

fn run(dir: &Path, sub: &str, config: &str) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ifs-decay"))
        .arg(sub)
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn validate_lebesgue_passes() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), "validate", &format!("seed = 1\n{LEBESGUE}"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("status: ok"));
    assert!(report.contains("rho = 0.5"), "{report}");
}

#[test]
fn clt_two_ratio_writes_distances() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(
        "seed = 3\n{TWO_RATIO}\n[clt]\nn = [100, 400]\n[clt.stats]\nsamples = 20000\nn = 50\n"
    );
    let out = run(tmp.path(), "clt", &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&tmp.path().join("out/clt.csv"));
    assert_eq!(rows.len(), 2);
    let d: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(d[0] <= 0.06 && d[1] <= 0.03, "{d:?}");
    assert_eq!(rows[0][2], "exact");
}

#[test]
fn coarse_fourier_depth_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("seed = 1\n{LEBESGUE}\n[fourier]\nq = [1000.0]\nsamples = 100\ndepth = 2\n");
    let out = run(tmp.path(), "fourier", &cfg);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("depth"), "{err}");
}

#[test]
fn bad_config_exits_1() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), "validate", "seed = 1\nbogus = true\n");
    assert_eq!(out.status.code(), Some(1));
    let out = run(tmp.path(), "clt", &format!("seed = 1\n{TWO_RATIO}\n[clt]\nmethod = \"guess\"\n"));
    assert_eq!(out.status.code(), Some(1));
    let out = run(tmp.path(), "clt", &format!("seed = 1\nworkers = 0\n{TWO_RATIO}"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_exits_1() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ifs-decay"))
        .args(["validate", "does-not-exist.toml", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn expanding_map_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = LEBESGUE.replacen("[0.5, 0.0]", "[2.0, 0.0]", 1);
    let out = run(tmp.path(), "validate", &format!("seed = 1\n{cfg}"));
    assert_eq!(out.status.code(), Some(2));
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("status: validation failed"));
    assert!(report.contains("[FAIL]"));

    let out = run(tmp.path(), "clt", &format!("seed = 1\n{cfg}"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_lists_every_csv_with_header() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!(
        "seed = 5\n{TWO_RATIO}\n[walk]\ntrajectories = 20\nn = [5, 10]\ncell_samples = 200\n\
         [walk.stats]\nsamples = 2000\nn = 50\n"
    );
    let out = run(tmp.path(), "walk", &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("run hash: "));
    for (name, header) in [
        ("walk.csv", "trajectory_id,n,S_n"),
        ("cells.csv", "label,count,k,h_prime"),
    ] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        assert_eq!(text.lines().next(), Some(header));
        assert!(report.contains(name));
    }
    assert_eq!(csv_rows(&dir.join("walk.csv")).len(), 40);
    let total: usize = csv_rows(&dir.join("cells.csv"))
        .iter()
        .map(|r| r[1].parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 200);
}
