use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hip_core::io::load_field;

fn hip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hip")).args(args).output().expect("binary runs")
}

fn run(cmd: &str, dir: &Path, config: &str, out: &str) -> Output {
    let path = dir.join(format!("{out}.cfg"));
    fs::write(&path, config).unwrap();
    let out = dir.join(out);
    hip(&[cmd, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn plan_prints_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("plan", dir.path(), "p = 1\nplan.theta = 0.5\nplan.alpha1 = 0.5\n", "plan");
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("beta=0.75\n") && text.contains("s1=6\n") && text.contains("mu=0.25\n"));
    let s: f64 = text.lines().find_map(|l| l.strip_prefix("s=")).unwrap().parse().unwrap();
    assert!((s - 54.0).abs() < 1e-9);
    assert_eq!(fs::read_to_string(dir.path().join("plan/plan.txt")).unwrap(), text);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (k, cfg) in ["p = 1.5\n", "colour = red\n", "grid.n = 4\n", "sigma = file(missing.hip)\n"].iter().enumerate() {
        let o = run("forward", dir.path(), cfg, &format!("c{k}"));
        assert_eq!(o.status.code(), Some(2), "{cfg}");
    }
    assert_eq!(hip(&["forward", "--config", "/nonexistent/cfg"]).status.code(), Some(2));
    assert_eq!(hip(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn forward_constant_conductivity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("forward", dir.path(), "grid.n = 16\nsigma = constant(2)\nboundary = linear-x\np = 0.5\n", "fwd");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("min_grad=1.000000e0 max_grad=1.000000e0"), "{}", stdout(&o));
    let f = load_field(dir.path().join("fwd/F.hipfield")).unwrap();
    assert!(f.values().iter().all(|v| (v - 2.0).abs() < 1e-8));
    assert!(dir.path().join("fwd/u.hipfield").is_file());
}

#[test]
fn gradient_floor_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("forward", dir.path(), "grid.n = 16\ngrad_floor = 10\n", "gf");
    assert_eq!(o.status.code(), Some(3));
    let o = run("verify", dir.path(), "grid.n = 16\ngrad_floor = 10\n", "gv");
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("gradient_floor   FAIL"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gradient_floor"));
}

#[test]
fn solver_and_divergence_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("forward", dir.path(), "solver.iter_factor = 1\nsolver.rel_tol = 1e-15\n", "s");
    assert_eq!(o.status.code(), Some(4));
    let o = run("reconstruct", dir.path(), "grid.n = 16\ninversion.c2_radius = 1e-6\n", "d");
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run("verify", dir.path(), "grid.n = 32\np = 0.5\n", "v1");
    let b = run("verify", dir.path(), "grid.n = 32\np = 0.5\nworkers = 2\n", "v2");
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().filter(|l| l.contains(" PASS ")).count(), 9);
}

#[test]
fn reconstruct_from_exact_start_does_not_move() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("reconstruct", dir.path(), "grid.n = 16\nsigma = expx\ninit = expx\n", "r");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("iterations=0 "), "{}", stdout(&o));
    assert!(stdout(&o).trim_end().ends_with("change=0.000000e0"));
    let csv = fs::read_to_string(dir.path().join("r/reconstruct.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn nonlinear_sweep_slope_and_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "grid.n = 32\nnoise.levels = 1e-4, 1e-3, 1e-2\nseed = 7\n";
    let a = run("sweep-nonlinear", dir.path(), cfg, "n1");
    let b = run("sweep-nonlinear", dir.path(), &format!("{cfg}workers = 3\n"), "n2");
    assert_eq!(a.status.code(), Some(0));
    let slope: f64 = stdout(&a).split_whitespace().next().unwrap().strip_prefix("slope=").unwrap().parse().unwrap();
    assert!(slope >= 0.5, "{slope}");
    let csv1 = fs::read(dir.path().join("n1/sweep_nonlinear.csv")).unwrap();
    let csv2 = fs::read(dir.path().join("n2/sweep_nonlinear.csv")).unwrap();
    assert_eq!(csv1, csv2);
    assert_eq!(b.stdout, a.stdout);
    assert!(String::from_utf8(csv1).unwrap().starts_with("label,eps,l2_h,h1_dF,hs1_h,rec_err,extra\nnoise0,1e-4,"));
}

#[test]
fn linear_sweep_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("sweep-linear", dir.path(), "grid.n = 16\nsweep.samples = 12\nsweep.modes = 4\n", "l");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("c_star="));
    let csv = fs::read_to_string(dir.path().join("l/sweep_linear.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}
