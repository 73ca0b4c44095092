use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use koopman_core::io::{read_matrix, read_spectrum};

fn koopman(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koopman"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn edmd_on_identity_writes_identity_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(
        dir.path(),
        &["edmd", "--system", "identity", "--dict", "legendre:4", "--measure", "uniform:-1,1", "--M", "50", "--seed", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k = read_matrix(BufReader::new(fs::File::open(dir.path().join("edmd_matrix.csv")).unwrap())).unwrap();
    assert_eq!(k.size(), 5);
    for i in 0..5 {
        for j in 0..5 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((k.a[(i, j)].re - want).abs() < 1e-10 && k.a[(i, j)].im.abs() < 1e-10);
        }
    }
    assert!(dir.path().join("edmd_snapshots.csv").exists());
}

#[test]
fn analytic_prediction_tracks_the_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(
        dir.path(),
        &["predict", "--system", "logistic", "--dict", "legendre:8", "--x0", "0.3", "--horizon", "10", "--analytic"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("prediction.csv"));
    assert_eq!(rows.len(), 10);
    let truth: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!((truth[0] + 0.82).abs() < 1e-12);
    assert!((truth[1] - 0.3448).abs() < 1e-12);
    let err: f64 = rows[0][5].parse().unwrap();
    assert!(err < 1e-12, "step 1 is exact for this dictionary, got {err}");
}

#[test]
fn spectra_study_writes_tables_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(
        dir.path(),
        &[
            "study", "spectra", "--system", "logistic", "--dict", "legendre:8", "--measure", "uniform:-1,1", "--M",
            "100,1000", "--seeds", "2",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("spectra.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let h: f64 = r[2].parse().unwrap();
        assert!(h.is_finite() && h >= 0.0);
    }
    let analytic = read_spectrum(BufReader::new(fs::File::open(dir.path().join("spectrum_analytic.csv")).unwrap())).unwrap();
    assert_eq!(analytic.len(), 9);
    assert!(dir.path().join("spectrum_M1000_seed1.csv").exists());
    for m in [100, 1000] {
        let svg = fs::read_to_string(dir.path().join(format!("spectra_M{m}.svg"))).unwrap();
        assert!(svg.contains("<svg") && svg.contains("unit-circle"));
        assert!(svg.contains("analytic") && svg.contains("sampled"));
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("M=100 median hausdorff="));
}

#[test]
fn spectrum_of_a_saved_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let fit = koopman(dir.path(), &["analytic", "--system", "logistic", "--dict", "legendre:8"]);
    assert!(fit.status.success());
    let matrix = dir.path().join("analytic_matrix.csv");
    let out = koopman(dir.path(), &["spectrum", "--matrix", matrix.to_str().unwrap(), "--measure", "uniform:-1,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 9);
    let lead: f64 = rows[0][0].parse().unwrap();
    assert!((lead - 1.0).abs() < 1e-12);
    assert!(dir.path().join("spectrum_oscillation.csv").exists());
}

#[test]
fn eigenmeasure_reports_identity_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(dir.path(), &["eigenmeasure", "--system", "logistic", "--dict", "legendre:29", "--x0", "0.3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let atoms = data_rows(&dir.path().join("eigenmeasure.csv"));
    assert_eq!(atoms.len(), 30);
    for r in data_rows(&dir.path().join("eigenmeasure_check.csv")) {
        let r1: f64 = r[1].parse().unwrap();
        assert!(r1 < 1e-10, "{r:?}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(dir.path(), &["analytic", "--system", "lorenz", "--dict", "legendre:3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("koopman: "));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let singular = koopman(dir.path(), &["analytic", "--system", "logistic", "--dict", "monomial:60", "--measure", "uniform:-1,1"]);
    assert_eq!(singular.status.code(), Some(2));
    let escape = koopman(dir.path(), &["analytic", "--system", "logistic", "--dict", "legendre:3", "--measure", "uniform:-2,2"]);
    assert_eq!(escape.status.code(), Some(2));
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# logistic setup\nsystem = logistic\ndict = legendre:4\nmeasure = uniform:-1,1\nM = 200\nseed = 3\n").unwrap();
    let out = koopman(dir.path(), &["edmd", "--config", cfg.to_str().unwrap(), "--M", "300", "--reproducible"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("edmd_matrix.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("system=logistic") && header.contains("M=300") && header.contains("seed=3"), "{header}");
    assert!(!header.contains("generated="));

    fs::write(&cfg, "system = logistic\ncolour = blue\n").unwrap();
    let bad = koopman(dir.path(), &["edmd", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown key `colour`"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_koopman"))
        .args(["analytic", "--system", "logistic", "--dict", "legendre:3"])
        .env("KOOPMAN_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("analytic_matrix.csv").exists());
}

#[test]
fn headers_carry_a_timestamp_unless_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    koopman(dir.path(), &["analytic", "--system", "logistic", "--dict", "legendre:3"]);
    let text = fs::read_to_string(dir.path().join("analytic_matrix.csv")).unwrap();
    assert!(text.lines().next().unwrap().contains("generated="));
}

#[test]
fn validate_reports_without_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(
        dir.path(),
        &["validate", "--system", "logistic", "--dict", "legendre:8", "--measure", "uniform:-1,1", "--M", "5,100"],
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("warning: M=5"), "{stdout}");
    assert_eq!(stdout.lines().count(), 1);
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}
