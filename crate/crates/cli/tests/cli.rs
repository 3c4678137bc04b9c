use std::path::Path;
use std::process::Command;

fn linucb(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_linucb"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "linucb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const WORLD: &str = r#"
mode = "hybrid"
d = 6
arms = 5
article_dim = 6
seed = 4
theta = { low = 0.0, high = 0.02 }
beta = { low = 0.0, high = 0.04 }
"#;

const SWEEP: &str = r#"
stream = "events.jsonl"
trials = 400
data_fractions = [1.0, 0.1]
seeds = [0, 1]
warm_offsets = "offsets.jsonl"

[[algorithms]]
name = "egreedy"
params = [0.05, 0.2]

[[algorithms]]
name = "ucb-warm"
params = [1.0]

[[algorithms]]
name = "linucb-hybrid"
params = [0.5]
"#;

#[test]
fn generate_evaluate_sweep_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("world.toml"), WORLD).unwrap();
    std::fs::write(d.join("sweep.toml"), SWEEP).unwrap();

    let gen = |out: &str, seed: &str| {
        linucb(
            d,
            &[
                "generate",
                "--world",
                "world.toml",
                "--events",
                "5000",
                "--out",
                out,
                "--offsets-out",
                "offsets.jsonl",
                "--world-out",
                "world.json",
                "--seed",
                seed,
            ],
        )
    };
    gen("events.jsonl", "7");
    gen("again.jsonl", "7");
    let a = std::fs::read(d.join("events.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(d.join("again.jsonl")).unwrap());
    assert_eq!(a.iter().filter(|b| **b == b'\n').count(), 5000);

    let eval = linucb(
        d,
        &[
            "evaluate",
            "--stream",
            "events.jsonl",
            "--policy",
            "linucb-hybrid:1.0",
            "--trials",
            "500",
            "--seed",
            "3",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(v["learning"]["retained"], 500);
    assert_eq!(v["deployment"]["retained"], 0);
    assert_eq!(v["learning"]["exhausted"], false);

    linucb(d, &["sweep", "--spec", "sweep.toml", "--out", "rows.csv"]);
    let rows = std::fs::read_to_string(d.join("rows.csv")).unwrap();
    // header + 4 points x 2 fractions x 2 seeds x 2 buckets
    assert_eq!(rows.lines().count(), 1 + 32);
    assert!(rows
        .lines()
        .next()
        .unwrap()
        .starts_with("algorithm,parameter,data_fraction,bucket,ctr"));
    linucb(d, &["sweep", "--spec", "sweep.toml", "--out", "rows2.csv"]);
    assert_eq!(rows, std::fs::read_to_string(d.join("rows2.csv")).unwrap());

    linucb(
        d,
        &[
            "report",
            "rows.csv",
            "--out",
            "summary.csv",
            "--tuned",
            "tuned.csv",
        ],
    );
    let summary = std::fs::read_to_string(d.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 16);
    let tuned = std::fs::read_to_string(d.join("tuned.csv")).unwrap();
    assert_eq!(tuned.lines().count(), 1 + 6);
}

#[test]
fn features_on_synthetic_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = linucb(dir.path(), &["features", "--seed", "2"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let users = v["users"].as_object().unwrap();
    assert_eq!(users.len(), 500);
    for u in users.values() {
        let m: Vec<f64> = u
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert_eq!(m.len(), 6);
        assert_eq!(m[5], 1.0);
        assert!((m[..5].iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(out, linucb(dir.path(), &["features", "--seed", "2"]));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "{\"arms\":[]}\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_linucb"))
        .current_dir(dir.path())
        .args([
            "evaluate",
            "--stream",
            "bad.jsonl",
            "--policy",
            "random",
            "--trials",
            "1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
