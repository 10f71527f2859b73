//! End-to-end tests of the command-line driver: exit codes, artifact
//! determinism, and the registry dump.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_supersim")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn base_config(out_dir: &Path, epsilon: f64, seed: u64, workers: Option<usize>) -> String {
    let workers_line = workers.map_or(String::new(), |w| format!("workers = {w}\n"));
    format!(
        r#"
[model]
preset = "inward-ou"

[sim]
epsilon = {epsilon}
seed = {seed}
max_particles = 2000000
observation_times = [0.5, 1.0, 2.0]

[experiment]
n_paths = 120
{workers_line}observables = ["const:1", "indicator:-1:1"]
assumption1_grid = [0.5, 1.0, 2.0]

[output]
dir = "{}"
"#,
        out_dir.display()
    )
}

#[test]
fn validate_passes_on_default_preset() {
    let tmp = std::env::temp_dir().join("supersim-cli-validate");
    let out = tmp.join("out");
    let cfg = write_config(&tmp, "ok.toml", &base_config(&out, 0.05, 42, None));
    let status = Command::new(bin())
        .args(["validate", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("validation.csv")).unwrap();
    assert!(csv.contains("supercritical,pass"));
    assert!(csv.contains("assumption1,pass"));
}

#[test]
fn incommensurable_epsilon_is_config_error_exit_2() {
    // epsilon = 0.3 cannot tile the unit initial mass
    let tmp = std::env::temp_dir().join("supersim-cli-eps");
    let out = tmp.join("out");
    let cfg = write_config(&tmp, "eps.toml", &base_config(&out, 0.3, 42, None));
    let output = Command::new(bin())
        .args(["validate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("admissible"),
        "stderr should report admissible masses: {stderr}"
    );
}

#[test]
fn missing_config_is_exit_2() {
    let output = Command::new(bin()).args(["moments"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn capacity_is_exit_3() {
    let tmp = std::env::temp_dir().join("supersim-cli-cap");
    let out = tmp.join("out");
    let body =
        base_config(&out, 0.01, 42, None).replace("max_particles = 2000000", "max_particles = 150");
    let cfg = write_config(&tmp, "cap.toml", &body);
    let output = Command::new(bin())
        .args(["moments", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = std::env::temp_dir().join("supersim-cli-repro");
    let mut outputs = Vec::new();
    for (label, workers) in [("w1", Some(1)), ("w2", Some(2)), ("w1b", Some(1))] {
        let out = tmp.join(label);
        let body = base_config(&out, 0.05, 42, workers);
        let cfg = write_config(&tmp, &format!("{label}.toml"), &body);
        let status = Command::new(bin())
            .args(["moments", "--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out.join("moments.csv")).unwrap());
    }
    assert_eq!(
        outputs[0], outputs[1],
        "different worker pools changed bytes"
    );
    assert_eq!(outputs[0], outputs[2], "rerun changed bytes");
}

#[test]
fn seed_override_changes_artifacts() {
    let tmp = std::env::temp_dir().join("supersim-cli-seed");
    let out_a = tmp.join("a");
    let out_b = tmp.join("b");
    let cfg = write_config(&tmp, "seed.toml", &base_config(&out_a, 0.05, 42, None));
    for (out, seed) in [(&out_a, "42"), (&out_b, "43")] {
        let status = Command::new(bin())
            .args(["moments", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(out_a.join("moments.csv")).unwrap();
    let b = fs::read(out_b.join("moments.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn registry_dump_contains_outward_eigenvalue() {
    let output = Command::new(bin())
        .args(["registry-dump"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    // λ0 = β - c·d = 3 - 1 = 2 for the outward preset
    assert!(stdout.contains("outward-ou,2,1,Derived"), "{stdout}");
    assert!(stdout.contains("inward-ou,1,1,Derived"));
}

#[test]
fn martingale_and_slln_run_small() {
    let tmp = std::env::temp_dir().join("supersim-cli-mart");
    let out = tmp.join("out");
    let body = format!(
        r#"
[model]
preset = "inward-ou"

[sim]
epsilon = 0.05
seed = 7
max_particles = 2000000
observation_times = [1.0, 2.0, 3.0]

[experiment]
n_paths = 400
observables = ["indicator:-1:1"]

[output]
dir = "{}"
svg = true
trajectories = true
"#,
        out.display()
    );
    let cfg = write_config(&tmp, "mart.toml", &body);
    let status = Command::new(bin())
        .args(["martingale", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("martingale.csv").exists());
    let status = Command::new(bin())
        .args(["slln", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("slln.csv")).unwrap();
    assert!(csv.contains("ind[-1,1]"));
    assert!(out.join("summary.txt").exists());
    let traj = fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.contains("path_id,t,observable,value"));
    assert!(traj.contains(",W,"));
    // svg plot emitted for the observable
    let svgs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "svg")
        })
        .collect();
    assert!(!svgs.is_empty());
}

#[test]
fn oracle_export_writes_fixture() {
    let tmp = std::env::temp_dir().join("supersim-cli-oracle");
    let out = tmp.join("out");
    let body = format!(
        r#"
[model]
preset = "inward-ou"

[sim]
epsilon = 0.05
seed = 1
max_particles = 100000
observation_times = [0.5, 1.0]

[experiment]
n_paths = 1
observables = ["const:1", "gaussian:1:1:0"]
resolvent_q = 3.0

[output]
dir = "{}"
"#,
        out.display()
    );
    let cfg = write_config(&tmp, "oracle.toml", &body);
    let status = Command::new(bin())
        .args(["oracle-export", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert!(csv.contains("model,f,t,x,quantity,value"));
    assert!(csv.contains("mean"));
    assert!(csv.contains("variance"));
    assert!(csv.contains("resolvent[q=3]"));
    // T_1 1 = e for the inward preset: check the exported value
    for line in csv.lines() {
        if line.starts_with("inward-ou,const[1],1,\"[0.0]\",mean,") {
            let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert!((v - std::f64::consts::E).abs() < 1e-10);
        }
    }
}
