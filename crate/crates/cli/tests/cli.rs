use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn surfcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfcr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn convergence_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[mesh]\nlevel = 1\n[refinement]\nrounds = 2\n");
    let out = dir.path().join("out");
    let o = surfcr(&["--quiet", "--threads", "1", "convergence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("effective_config.toml").exists());
}

#[test]
fn adaptive_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", "[solution]\nname = \"singular\"\n[mesh]\nlevel = 1\n[refinement]\nmode = \"adaptive\"\nrounds = 3\n");
    let o = surfcr(&["adaptive", "--config", &cfg, "--out", dir.path().join("a").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("a/adaptive_trace.csv")).unwrap();
    assert!(csv.starts_with("round,dof,eta,e,De,Die,Dre,kappa\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("round 2"));
}

#[test]
fn invalid_config_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[refinement]\nmode = \"adaptive\"\ntheta = 1.5\n");
    let o = surfcr(&["adaptive", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));
}

#[test]
fn project_mesh_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "tet.off",
        "OFF\n4 4 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n",
    );
    let output = dir.path().join("tet.obj");
    let o = surfcr(&["project-mesh", "--input", &input, "--output", output.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&output).unwrap();
    for line in text.lines().filter(|l| l.starts_with("v ")) {
        let r: f64 = line[2..].split_whitespace().map(|s| s.parse::<f64>().unwrap().powi(2)).sum();
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn project_mesh_rejects_open_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "open.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    let output = dir.path().join("x.off");
    let o = surfcr(&["project-mesh", "--input", &input, "--output", output.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-manifold"));
}

#[test]
fn info_reports_mesh_statistics() {
    let o = surfcr(&["info"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("# euler characteristic: 2"));
    assert!(text.contains("# edges (dof): 480"));
}
