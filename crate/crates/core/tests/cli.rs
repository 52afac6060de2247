use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};

fn bandedge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandedge")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const MEANFIELD: &str = r#"
command = "meanfield"
deltas = [0.0, -1.0]

[model]
kind = "isotropic_eff_mass"
beta1 = 1.0

[grid]
tau_max = 10.0
dtau = 0.02
"#;

#[test]
fn successful_run_writes_checksummed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "mf.toml", MEANFIELD);
    let out = dir.path().join("run");
    let o = bandedge(&["meanfield", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "meanfield");
    assert_eq!(manifest["seeds"]["master_seed"], 1);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 3);
    for rec in outputs {
        let body = std::fs::read(out.join(rec["file"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(rec["sha256"].as_str().unwrap(), digest);
        assert_eq!(rec["bytes"].as_u64().unwrap() as usize, body.len());
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "meanfield");
    let csv = std::fs::read_to_string(out.join("meanfield_delta0.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# column j3:")));
    assert!(csv.lines().any(|l| l.starts_with("tau,j3,")));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let cfg = write(dir.path(), "bad.toml", "command = \"meanfield\"\n\n[grid]\ntau_max = 1.0\ndtua = 0.1\n");
    let o = bandedge(&["meanfield", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5") && err.contains("dtua"), "{err}");

    let missing = dir.path().join("nope.toml");
    assert_eq!(bandedge(&["osc", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    let other = write(dir.path(), "other.toml", "command = \"osc\"\n");
    assert_eq!(bandedge(&["meanfield", "--config", &other, "--out", out]).status.code(), Some(2));
    let r0 = write(dir.path(), "r0.toml", "[meanfield]\nr = 0.0\n[grid]\ntau_max = 1.0\ndtau = 0.1\n");
    assert_eq!(bandedge(&["meanfield", "--config", &r0, "--out", out]).status.code(), Some(2));
    assert_eq!(bandedge(&["meanfield", "--workers", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(bandedge(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(bandedge(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // both ends of the interval rotate the same way, so nothing is bracketed
    let cfg = write(
        dir.path(),
        "t.toml",
        "[transparent]\nlo = 0.5\nhi = 1.0\nwindow = 5.0\n[grid]\ntau_max = 20.0\ndtau = 0.05\n",
    );
    let o = bandedge(&["transparent", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

const ENSEMBLE: &str = r#"
command = "ensemble"
seed = 11

[model]
kind = "isotropic_eff_mass"
beta1 = 1.0

[grid]
tau_max = 10.0
dtau = 0.02

[ensemble]
n_atoms = 100
n_realizations = 150
t0_policies = ["at_zero", "at_crossover"]
snapshot_times = [5.0]
"#;

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.toml", ENSEMBLE);
    let mut runs = Vec::new();
    for (k, w) in ["1", "3", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = bandedge(&["ensemble", "--config", &cfg, "--workers", w, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(outputs(&out));
    }
    assert!(runs[0].iter().any(|(n, _)| n.ends_with(".csv")));
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[1], runs[2]);

    // a different seed changes the samples
    let out = dir.path().join("seed");
    let o = bandedge(&["ensemble", "--config", &cfg, "--seed", "12", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(outputs(&out), runs[0]);
}
