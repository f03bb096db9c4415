use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn esbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esbp")).args(args).env("ESBP_THREADS", "2").output().unwrap()
}

const SHORT_RUN: &str = r#"
name = "short"
[gas]
mu = 0.01
[mesh]
kind = "box"
order = 2
elements = [2, 1, 1]
periodic = [false, true, true]
[flow]
mode = "stable"
[initial]
kind = "uniform"
density = 1.0
temperature = 2.0
[walls.xmin]
[walls.xmax]
motion = { kind = "translating", velocity = [0.0, 0.5, 0.0] }
[run]
t_end = 0.01
[output]
timeseries = "timeseries.csv"
forces = "forces.csv"
fields = "fields.bin"
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn malformed_config_exits_with_config_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write(dir.path(), "bad.toml", &SHORT_RUN.replace("order = 2", "order = \"two\""));
    let out = esbp(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.exists());

    let cfg = write(dir.path(), "tag.toml", &SHORT_RUN.replace("[walls.xmax]", "[walls.nowhere]"));
    let out = esbp(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.exists());
}

#[test]
fn verify_passes_and_catches_corrupted_mirror() {
    let out = esbp(&["verify", "--trials", "500"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: pass"));

    let out = esbp(&["verify", "--trials", "500", "--corrupt-mirror"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn run_writes_timeseries_forces_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write(dir.path(), "short.toml", SHORT_RUN);
    let out = esbp(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let series = fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some("t,dSdt,DT,Xi,residual"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 1);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows.last().unwrap()[0] - 0.01).abs() < 1e-14);

    let forces = fs::read_to_string(out_dir.join("forces.csv")).unwrap();
    assert_eq!(forces.lines().next(), Some("t,xmax_x,xmax_y,xmax_z,xmin_x,xmin_y,xmin_z"));

    let fields = esbp::diagnostics::read_fields(out_dir.join("fields.bin")).unwrap();
    assert_eq!(fields.order, 2);
    assert_eq!(fields.q.len(), 2);
}

#[test]
fn study_writes_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let text = format!(
        r#"
name = "wave"
[mesh]
kind = "box"
order = 2
elements = [2, 2, 2]
periodic = [true, true, true]
[initial]
kind = "density_wave"
velocity = [1.0, 0.0, 0.0]
[integrator]
rtol = 1e-8
atol = 1e-10
[run]
t_end = 0.05
[output]
dir = "{}"
[study]
orders = [2]
refinements = [2, 4]
output = "study.csv"
"#,
        out_dir.display()
    );
    let cfg = write(dir.path(), "wave.toml", &text);
    let out = esbp(&["study", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p,n,L1,L2,Linf,rate_L1,rate_L2,rate_Linf,flagged");
    assert_eq!(lines.len(), 3);
    let rate: f64 = lines[2].split(',').nth(6).unwrap().parse().unwrap();
    assert!(rate > 1.0, "{rate}");
}
