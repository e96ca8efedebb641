use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn smmc(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smmc"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("SMMC_WORKERS", w),
        None => cmd.env_remove("SMMC_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str, episodes: &str| {
        let out = dir.path().join(name);
        ok_json(&smmc(
            &[
                "simulate",
                "--r-uc", "81.1Mbps",
                "--r-mc", "122.6Mbps",
                "--t-set", "3128",
                "--episodes", episodes,
                "--seed", "42",
                "--out", out.to_str().unwrap(),
            ],
            Some(workers),
        ));
        out
    };
    let a = run("a", "1", "1");
    let b = run("b", "1", "1");
    assert_eq!(read(&a.join("episodes.csv")), read(&b.join("episodes.csv")));

    let c = run("c", "1", "40");
    let d = run("d", "4", "40");
    for f in ["episodes.csv", "group_sizes.csv"] {
        assert_eq!(read(&c.join(f)), read(&d.join(f)), "{f}");
    }
    let text = String::from_utf8(read(&c.join("episodes.csv"))).unwrap();
    assert!(text.starts_with("episode,k,s_min,s_last,setup_slots,mc_slots,r_mc,mean_delivery\n"));
    assert_eq!(text.lines().count(), 41);

    let run_json: Value = serde_json::from_slice(&read(&c.join("run.json"))).unwrap();
    assert_eq!(run_json["spec"]["seed"], 42);
    assert_eq!(run_json["config"]["file_size"], 8e9);
}

#[test]
fn optimize_plan_feeds_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = smmc(&["optimize"], None);
    let doc = ok_json(&out);
    let t_set = doc["plan"]["t_set"].as_u64().unwrap();
    assert!((2972..=3284).contains(&t_set), "{t_set}");
    let plan_path = dir.path().join("plan.json");
    std::fs::write(&plan_path, &out.stdout).unwrap();

    let sim = ok_json(&smmc(
        &["simulate", "--plan", plan_path.to_str().unwrap(), "--episodes", "3", "--mode", "ft"],
        None,
    ));
    assert_eq!(sim["plan"], doc["plan"]);
    assert_eq!(sim["summary"]["episodes"], 3);
    assert_eq!(sim["summary"]["mode"], "ft");
}

#[test]
fn optimize_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt");
    ok_json(&smmc(&["optimize", "--lambda", "0.004", "--out", out.to_str().unwrap()], None));
    let trace = String::from_utf8(read(&out.join("trace.csv"))).unwrap();
    assert!(trace.starts_with("t_set,r_mc,t_avg_ub\n0,"));
    assert!(out.join("run.json").exists());
}

#[test]
fn bounds_report() {
    let doc = ok_json(&smmc(
        &["bounds", "--t-set", "3128", "--r-uc", "81.1Mbps", "--r-mc", "122.6Mbps", "--k", "7"],
        None,
    ));
    let r = &doc["reports"][0];
    assert_eq!(r["k"], 7);
    let (ub, lb) = (r["mc_outage_upper"].as_f64().unwrap(), r["mc_outage_lower"].as_f64().unwrap());
    assert!((ub - 0.0106).abs() < 2e-4 && (lb - 0.00356).abs() < 1e-4, "{ub} {lb}");
    let all = ok_json(&smmc(
        &["bounds", "--t-set", "3128", "--r-uc", "81.1Mbps", "--r-mc", "122.6Mbps"],
        None,
    ));
    assert_eq!(all["reports"].as_array().unwrap().len(), 26);
}

#[test]
fn reproduce_fig5_and_fig6_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let f5 = dir.path().join("f5");
    ok_json(&smmc(
        &[
            "reproduce", "--figure", "fig5", "--lambda", "0.002",
            "--sweep-step", "1000", "--out", f5.to_str().unwrap(),
        ],
        None,
    ));
    let csv = String::from_utf8(read(&f5.join("fig5.csv"))).unwrap();
    assert!(csv.starts_with("lambda_f,t_set,r_mc,t_avg_ub\n"));
    assert_eq!(csv.lines().count(), 1 + 10);

    let f6 = dir.path().join("f6");
    let doc = ok_json(&smmc(
        &["reproduce", "--figure", "fig6", "--episodes", "300", "--out", f6.to_str().unwrap()],
        None,
    ));
    let csv = String::from_utf8(read(&f6.join("fig6.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,prob_k,t_unicast,t_smmc,t_ft_smmc"));
    assert_eq!(lines.count(), 12);
    assert_eq!(doc["spec"]["episodes"], 300);
    assert!(f6.join("run.json").exists());
}

#[test]
fn failures_exit_nonzero_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let out = smmc(&["reproduce", "--figure", "fig7", "--out", dir.path().to_str().unwrap()], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig7"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        format!("{}\nantenna_gain = 3\n", smmc::cli::DEFAULT_CONFIG),
    )
    .unwrap();
    let out = smmc(&["optimize", "--config", cfg.to_str().unwrap()], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("antenna_gain"));

    let out = smmc(
        &["simulate", "--t-set", "20000", "--r-uc", "81Mbps", "--r-mc", "100Mbps", "--episodes", "1"],
        None,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("set-up time"));

    let out = smmc(&["simulate", "--mode", "broadcast"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mode"));
}

#[test]
fn shipped_config_loads() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/default.toml");
    let doc = ok_json(&smmc(&["optimize", "--config", path], None));
    let rho0 = doc["config"]["ref_snr"].as_f64().unwrap();
    assert!((rho0 / 1.256e13 - 1.0).abs() < 1e-3);
}
