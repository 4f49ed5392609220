use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ifs_lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifs-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> String {
    fs::read_to_string(out.join("report.txt")).unwrap()
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

#[test]
fn cantor_target_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifs_lab(&["target", "--preset", "cantor", "--tol", "4.6e-4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    // 3^-7 already fits under 4.6e-4, so refinement stops at level 7
    assert_eq!(value(&r, "atoms_parts"), "128");
    assert_eq!(value(&r, "complete"), "true");
    let atoms = fs::read_to_string(dir.path().join("atoms.csv")).unwrap();
    assert_eq!(atoms.lines().filter(|l| !l.starts_with('#') && !l.starts_with("lo")).count(), 128);
}

#[test]
fn flip_target_is_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifs_lab(&["target", "--preset", "flip", "--max-depth", "8"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(value(&report(dir.path()), "atoms_parts"), "0");
}

#[test]
fn flip_split_reports_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifs_lab(&["split", "--preset", "flip", "--max-depth", "12"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(value(&r, "split"), "none-up-to-depth 12");
    assert_eq!(value(&r, "separability"), "none-up-to-depth 12");
    let cell = value(&r, "common_fixed_points");
    let nums: Vec<f64> = cell
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert!(nums[0] <= 0.5 && 0.5 <= nums[1], "{cell}");
}

#[test]
fn cantor_stationary_mean() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifs_lab(
        &["stationary", "--preset", "cantor", "--weights", "0.5,0.5", "--bins", "2187", "--samples", "20000"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    let mean: f64 = value(&r, "mean").parse().unwrap();
    assert!((mean - 0.5).abs() <= 5e-3);
    let ppm = fs::read(dir.path().join("density.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n1024 64\n255\n"));
    assert_eq!(ppm.len(), b"P6\n1024 64\n255\n".len() + 1024 * 64 * 3);
    for f in ["measure.csv", "support.csv"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["chaos", "--preset", "cantor", "--mode", "bernoulli", "--seed", "11", "--n", "5000", "--tol", "4.6e-4"];
    assert_eq!(ifs_lab(&args, a.path()).status.code(), Some(0));
    assert_eq!(ifs_lab(&args, b.path()).status.code(), Some(0));
    for f in ["orbit.csv", "tail.csv", "density.ppm", "report.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(value(&report(a.path()), "verdict"), "pass");
}

#[test]
fn config_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# example-3-4 preset written out\ndomain = 0 2\n[map]\nvertices = 0 0, 2 2/3\n[map]\nvertices = 0 2/3, 1 1, 2 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ifs_lab(&["attractor", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(value(&r, "star_iterations"), "1");
    assert_eq!(value(&r, "conley"), "escapes");
    assert_eq!(value(&r, "stable"), "true");

    fs::write(&cfg, "domain = 0 1\n[map]\nvertices = 0 0, 1 2\n").unwrap();
    assert_eq!(ifs_lab(&["target", "--config", cfg.to_str().unwrap()], &out).status.code(), Some(2));
    assert_eq!(ifs_lab(&["target", "--preset", "nosuch"], &out).status.code(), Some(2));
    assert_eq!(ifs_lab(&["target", "--preset", "cantor", "--tol=-1"], &out).status.code(), Some(2));
    assert_eq!(ifs_lab(&["recurrent", "--preset", "cantor"], &out).status.code(), Some(2));
}

#[test]
fn budget_cuts_search_short() {
    let dir = tempfile::tempdir().unwrap();
    let o = ifs_lab(
        &["target", "--preset", "bony-6-3", "--tol", "1e-7", "--max-depth", "400", "--budget", "0.2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(value(&report(dir.path()), "budget_exhausted"), "true");
}

#[test]
fn recurrent_with_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("p.csv");
    fs::write(&m, "1/2,1/2\n1/4,3/4\n").unwrap();
    let o = ifs_lab(
        &["recurrent", "--preset", "cantor", "--matrix", m.to_str().unwrap(), "--bins", "243", "--samples", "20000"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    let masses: Vec<f64> = value(&r, "section_masses").split(',').map(|s| s.parse().unwrap()).collect();
    assert!((masses[0] - 1.0 / 3.0).abs() <= 1e-8 && (masses[1] - 2.0 / 3.0).abs() <= 1e-8);
    assert!(dir.path().join("hat_measure.csv").exists());
}
