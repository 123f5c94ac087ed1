use std::fs;
use std::path::Path;
use std::process::Command;

use vlasov_pgd_cli::{parse_text, resolve};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vlasov-pgd"));
    c.env("RUST_LOG", "warn");
    c
}

const SMALL: &[&str] = &["--nx", "12", "--nv", "16", "--nt", "20", "--tf", "0.2", "--eps", "1e-12"];

fn run_small(out: &Path, extra: &[&str]) -> std::process::Output {
    bin()
        .arg("run")
        .args(SMALL)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run_small(&out, &["--dry-run"]);
    assert!(res.status.success());
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("scenario.nx=12"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_small(&a, &["--seed", "3"]).status.success());
    assert!(run_small(&b, &["--seed", "3"]).status.success());
    for name in ["ranks.csv", "error_summary.txt", "decay_fit.txt", "snapshots/snapshot_000020.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let strip = |p: &Path| {
        fs::read_to_string(p.join("diagnostics.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# output.dir="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn header_round_trips_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(run_small(&out, &["--set", "scenario.beta=0.05"]).status.success());
    let text = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let echoed: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = resolve(&parse_text(&echoed).unwrap()).unwrap();
    assert_eq!(cfg.scenario.beta, 0.05);
    assert_eq!(cfg.scenario.nx, 12);
    assert_eq!(cfg.out_dir, out);
    assert_eq!(cfg.echo(), echoed);
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 22);
}

#[test]
fn config_file_errors_name_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "# comment\nscenario.nx=16\nsolver.epsilon=tiny\n").unwrap();
    let res = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!res.status.success());
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("line 3") && stderr.contains("solver.epsilon"), "{stderr}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, "scenario.name = two_stream\nscenario.nx = 16\n").unwrap();
    let res = bin().args(["run", "--dry-run", "--nx", "20", "--config"]).arg(&path).output().unwrap();
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("scenario.name=two_stream"));
    assert!(stdout.contains("scenario.nx=20"));
}

#[test]
fn step_failure_exits_nonzero_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail");
    let res = bin()
        .arg("run")
        .args(["--nx", "12", "--nv", "16", "--nt", "2", "--tf", "100", "--set", "solver.max_rank=30"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!res.status.success());
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("step 1"), "{stderr}");
    let summary = fs::read_to_string(out.join("error_summary.txt")).unwrap();
    assert!(summary.contains("steps_completed=0"));
    assert!(summary.contains("status=failed"));
    assert!(out.join("diagnostics.csv").exists());
}

#[test]
fn sweep_writes_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("sweep");
    let res = bin()
        .args(["sweep", "--nt", "10", "--tf", "0.1", "--jobs", "2"])
        .args(["--param", "resolution=12,16", "--param", "solver.epsilon=1e-10,1e-12"])
        .arg("--out")
        .arg(&root)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(root.join("sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "resolution,n_steps,epsilon,eps_m,eps_p,eps_h,eps_f,status,dir");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("12x12,10,1e-10,"));
    assert!(lines[4].starts_with("16x16,10,1e-12,"));
    assert!(lines[1..].iter().all(|l| l.contains(",ok,")));
    for i in 0..4 {
        assert!(root.join(format!("run_00{i}/diagnostics.csv")).exists());
    }
}

#[test]
fn failed_sweep_runs_are_marked_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("sweep");
    let res = bin()
        .args(["sweep", "--nx", "12", "--nv", "16", "--nt", "2", "--set", "solver.max_rank=30"])
        .args(["--param", "scenario.t_f=0.02,100"])
        .arg("--out")
        .arg(&root)
        .output()
        .unwrap();
    assert!(res.status.success());
    let text = fs::read_to_string(root.join("sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].contains(",ok,"), "{}", lines[1]);
    assert!(lines[2].contains("n.c.,n.c.,n.c.,n.c.,n.c."), "{}", lines[2]);
}

#[test]
fn reference_runs_give_a_field_error() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref");
    let res = bin()
        .arg("run")
        .args(["--nx", "24", "--nv", "31", "--nt", "20", "--tf", "0.2", "--eps", "1e-12", "--save-reference", "--snapshot-stride", "2"])
        .arg("--out")
        .arg(&reference)
        .output()
        .unwrap();
    assert!(res.status.success());
    let out = dir.path().join("coarse");
    let res = bin()
        .arg("run")
        .args(["--nx", "12", "--nv", "16", "--nt", "10", "--tf", "0.2", "--eps", "1e-12"])
        .arg("--reference")
        .arg(&reference)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(res.status.success());
    let summary = fs::read_to_string(out.join("error_summary.txt")).unwrap();
    let line = summary.lines().find(|l| l.starts_with("eps_f=")).unwrap();
    let v: f64 = line["eps_f=".len()..].parse().unwrap();
    assert!(v > 0.0 && v < 1e-2, "{v}");
    assert!(summary.contains("reference_samples=11"), "{summary}");
}
