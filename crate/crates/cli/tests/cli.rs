use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qmetric(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmetric"))
        .current_dir(dir)
        .args(args)
        .env_remove("QMETRIC_SEED")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn gen_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (seed, out) in [("3", "a.json"), ("3", "b.json"), ("4", "c.json")] {
        assert!(qmetric(d, &["gen", "haar", "--n", "4", "--d", "3", "--seed", seed, "--out", out]).status.success());
    }
    let (a, b, c) = (json(&d.join("a.json")), json(&d.join("b.json")), json(&d.join("c.json")));
    assert_eq!(a["ensemble"], b["ensemble"]);
    assert_ne!(a["ensemble"], c["ensemble"]);
}

#[test]
fn seed_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let run = |out: &str, env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qmetric"));
        cmd.current_dir(d).args(["gen", "circular", "--n", "5", "--out", out]).env_remove("QMETRIC_SEED");
        if let Some(s) = env {
            cmd.env("QMETRIC_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        json(&d.join(out))["ensemble"].clone()
    };
    assert_eq!(run("env.json", Some("9")), {
        assert!(qmetric(d, &["gen", "circular", "--n", "5", "--seed", "9", "--out", "flag.json"]).status.success());
        json(&d.join("flag.json"))["ensemble"].clone()
    });
    assert_ne!(run("env.json", Some("9")), run("zero.json", None));
}

#[test]
fn dist_on_hard_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(qmetric(d, &["gen", "hardpair", "--n", "2", "--out", "h0.json"]).status.success());
    let theta = std::f64::consts::FRAC_PI_2.to_string();
    assert!(qmetric(d, &["gen", "hardpair", "--n", "2", "--theta", &theta, "--out", "h1.json"]).status.success());
    for (metric, expected) in [("mmd-1", 0.0), ("mmd-2", 0.5)] {
        let out = format!("{metric}.json");
        let o = qmetric(d, &["dist", "--e1", "h0.json", "--e2", "h1.json", "--metric", metric, "--cross-check", "--out", &out]);
        assert!(o.status.success());
        let v = json(&d.join(&out));
        assert!((v["report"]["value"].as_f64().unwrap() - expected).abs() < 1e-12);
        assert!(v["cross_check"]["discrepancy"].as_f64().unwrap() < 1e-9);
    }
    let o = qmetric(d, &["dist", "--e1", "h0.json", "--e2", "h1.json", "--metric", "wasserstein", "--plan-out", "plan.csv"]);
    assert!(o.status.success());
    assert!(fs::read_to_string(d.join("plan.csv")).unwrap().contains("i,j,mass"));
}

#[test]
fn estimate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(qmetric(d, &["gen", "cluster", "--n", "10", "--out", "a.json"]).status.success());
    assert!(qmetric(d, &["gen", "circular", "--n", "10", "--out", "b.json"]).status.success());
    let base = ["estimate", "--e1", "a.json", "--e2", "b.json"];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = base.to_vec();
        v.extend_from_slice(extra);
        qmetric(d, &v)
    };
    assert_eq!(with(&["--budget", "0"]).status.code(), Some(2));
    let o = with(&["--metric", "wasserstein", "--budget", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing labels"));
    assert_eq!(with(&["--metric", "nonsense", "--budget", "20"]).status.code(), Some(1));
    assert_eq!(qmetric(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(qmetric(d, &["--help"]).status.code(), Some(0));

    let o = with(&["--metric", "mmd-1", "--budget", "6000", "--out", "e.json"]);
    assert!(o.status.success());
    let o = qmetric(d, &["estimate", "--replay", "batch.csv", "--metric", "mmd-1", "--out", "r.json"]);
    assert!(o.status.success());
    assert_eq!(json(&d.join("e.json"))["report"], json(&d.join("r.json"))["report"]);
}

#[test]
fn bounds_table() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = qmetric(d, &["bounds", "--n", "10,20", "--k", "1,N", "--out", "b.json"]);
    assert!(o.status.success());
    let rows = json(&d.join("b.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["k"], 10);
    let w10 = rows[0]["wasserstein"].as_f64().unwrap();
    let w20 = rows[2]["wasserstein"].as_f64().unwrap();
    assert!(w20 > 4.0 * w10);
}

#[test]
fn toy_sweep_writes_curve_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("s.toml"),
        "metric = \"mmd-1\"\nns = [5, 10, 20]\nreps = 6\ntrials = 2\n[e1]\ngenerator = \"cluster\"\ns = 0.08\n[e2]\ngenerator = \"circular\"\n",
    )
    .unwrap();
    let o = qmetric(d, &["sweep", "--config", "s.toml", "--out-dir", "out", "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&d.join("out/summary.json"));
    assert_eq!(summary["seed"], 2);
    assert!(summary["slope"].is_f64());
    let curve = fs::read_to_string(d.join("out/curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert_eq!(lines[1], "metric,k,N,trial,M");
    assert_eq!(lines.len(), 2 + 3 * 2);
    let o = qmetric(d, &["sweep", "--config", "s.toml", "--ns", "5,10"]);
    assert_eq!(o.status.code(), Some(1));
}
