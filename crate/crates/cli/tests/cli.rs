//! Exit codes, output schemas and error messages of the `bsa` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bsa(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bsa"));
    cmd.args(args).env_remove("BSA_OUT_DIR").env_remove("RUST_LOG");
    if let Some(d) = out_dir {
        cmd.env("BSA_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fidelity_from_measured_splits() {
    let o = bsa(&["fidelity", "--splits", "49.7,48.9,50.7,48.3"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let e: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("error = "))
        .and_then(|v| v.parse().ok())
        .expect("error line");
    assert!(e > 1.5e-4 && e < 3.5e-4, "{e}");
    assert!(s.contains("row,col,re,im\n"));
    // 16 density-matrix entries
    assert_eq!(s.lines().skip_while(|l| *l != "row,col,re,im").count(), 17);
}

#[test]
fn balanced_splitter_is_perfect() {
    let o = bsa(&["fidelity", "--coefficients", "0.7071067811865476,0.7071067811865476,0.7071067811865476,0.7071067811865476"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("coincidence_probability = 0.25"));
}

#[test]
fn fidelity_argument_errors_exit_2() {
    assert_eq!(bsa(&["fidelity"], None).status.code(), Some(2));
    let o = bsa(&["fidelity", "--splits", "1,2"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--splits takes 4"));
}

#[test]
fn impossible_coincidence_exits_3() {
    let o = bsa(&["fidelity", "--coefficients", "0,1,1,0"], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("no coincidence"));
}

#[test]
fn unknown_figure_exits_2() {
    let o = bsa(&["reproduce", "fig9"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown figure `fig9`"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[grid]\ndx_nm = 10\ndy_nm = \"ten\"\n").unwrap();
    let o = bsa(&["--config", path.to_str().unwrap(), "transfer"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn bad_overrides_exit_2() {
    assert_eq!(bsa(&["--set", "nonsense.x=1", "transfer"], None).status.code(), Some(2));
    assert_eq!(bsa(&["--set", "grid.dx_nm=-5", "modes"], None).status.code(), Some(2));
    assert_eq!(bsa(&["--set", "grid.dx_nm", "modes"], None).status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    assert_eq!(bsa(&["--config", "/nonexistent/run.toml", "modes"], None).status.code(), Some(2));
}

#[test]
fn cladding_only_window_has_no_modes() {
    let o = bsa(&["--set", "modes.geometry=cladding", "--set", "grid.dx_nm=50", "--set", "grid.dy_nm=50", "modes"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("no guided modes"));
}

#[test]
fn rib_modes_written_to_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = bsa(
        &["--set", "grid.dx_nm=40", "--set", "grid.dy_nm=40", "--set", "output_dir=ignored", "modes"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,n_eff,polarization,symmetry,polarization_fraction,residual"));
    assert_eq!(lines.count(), 2);
    assert!(!csv.contains('\r'));
    let field = std::fs::read_to_string(dir.path().join("mode_0_field.csv")).unwrap();
    assert!(field.starts_with("x_um,y_um,Ex,Ey\n"));
    assert!(!Path::new("ignored").exists());
}

#[test]
fn fiber_sweep_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = bsa(
        &["--set", "fiber.grid.dx_nm=40", "--set", "fiber.grid.dy_nm=40", "fiber", "--na", "0.3", "--na", "0.6"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("fiber.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "NA,eta_TE,eta_TM");
    assert_eq!(rows.len(), 3);
    let eta = |r: &str| -> Vec<f64> { r.split(',').map(|v| v.parse().unwrap()).collect() };
    let (lo, hi) = (eta(rows[1]), eta(rows[2]));
    assert!(hi[1] > lo[1] && hi[2] > lo[2]);
}

#[test]
fn sweep_axis_syntax_errors_exit_2() {
    for axis in ["width_nm", "width_nm=1:2", "colour=1:2:3", "na=0.1:0.5:x"] {
        let o = bsa(&["sweep", "--axis", axis], None);
        assert_eq!(o.status.code(), Some(2), "{axis}: {}", stderr(&o));
    }
}

#[test]
fn na_sweep_through_generic_harness() {
    let dir = tempfile::tempdir().unwrap();
    let o = bsa(
        &["--set", "fiber.grid.dx_nm=40", "--set", "fiber.grid.dy_nm=40", "sweep", "--axis", "na=0.2:0.6:3"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(stdout(&o), csv);
}
