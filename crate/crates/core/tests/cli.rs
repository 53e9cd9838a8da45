use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wiretap-outage"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

const FOUR_STATE_LAW: &str = r#""distribution": {"kind": "discrete", "atoms": [
    {"h_m": 1.0, "h_e": 1.0, "p": 0.1}, {"h_m": 1.0, "h_e": 10.0, "p": 0.1},
    {"h_m": 10.0, "h_e": 1.0, "p": 0.4}, {"h_m": 10.0, "h_e": 10.0, "p": 0.4}]}"#;

const CHI_SQUARE_LAW: &str = r#""distribution": {"kind": "continuous",
    "marginal_m": {"family": "chi_square", "degrees": 2.0, "mean": 2.0},
    "marginal_e": {"family": "chi_square", "degrees": 2.0, "mean": 1.0}}"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn constant_power_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("capacity", &configs().join("four_state_constant_power.json"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("E[R_s]=0.8"), "{text}");
    assert!(text.contains("C=1"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("constant_power.json")).unwrap()).unwrap();
    assert!((json[0]["capacity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn capacity_and_policy_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("four_state.json");
    let out = run("capacity", &cfg, dir.path(), &[]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p_avg,C_full,C_main,high_power_limit"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[1] - 1.26).abs() < 0.01);
    assert!(row[2] <= row[1]);
    assert!(csv.ends_with('\n'));
    assert!(dir.path().join("solution_full_0.json").exists());

    let out = run("policy", &cfg, dir.path(), &[]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("policy.json")).unwrap()).unwrap();
    let full = &v["policies"][0];
    let labels: Vec<&str> = full["region_table"].as_array().unwrap().iter().map(|r| r["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["wf", "wf", "wf", "inv"]);
    let powers: Vec<f64> = full["region_table"].as_array().unwrap().iter().map(|r| r["power"].as_f64().unwrap()).collect();
    assert!(powers[0] == 0.0 && powers[1] == 0.0);
    assert!((powers[2] - 1.11).abs() < 0.02 && (powers[3] - 0.14).abs() < 0.01);
}

#[test]
fn policy_targets_zero_and_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "zero.json",
        &format!("{{{FOUR_STATE_LAW}, \"p_avg\": 0.5, \"eps\": 0.2, \"policy\": {{\"target\": 0.0}}}}"),
    );
    assert!(run("policy", &cfg, dir.path(), &[]).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("policy.json")).unwrap()).unwrap();
    for r in v["policies"][0]["region_table"].as_array().unwrap() {
        assert_eq!(r["label"], "wf");
    }
    let r_max = v["policies"][0]["r_max"].as_f64().unwrap();
    let cfg = write_config(
        dir.path(),
        "max.json",
        &format!("{{{FOUR_STATE_LAW}, \"p_avg\": 0.5, \"eps\": 0.2, \"policy\": {{\"target\": {r_max:?}}}}}"),
    );
    assert!(run("policy", &cfg, dir.path(), &[]).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("policy.json")).unwrap()).unwrap();
    let rows = v["policies"][0]["region_table"].as_array().unwrap();
    // All the budget goes to inverting the strong main-channel states.
    let spent: f64 = rows.iter().map(|r| r["prob"].as_f64().unwrap() * r["power"].as_f64().unwrap()).sum();
    assert!((spent - 0.5).abs() < 1e-6);
    assert_eq!(rows[2]["membership"], 1.0);
    assert_eq!(rows[3]["label"], "inv");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run("capacity", &dir.path().join("nope.json"), dir.path(), &[]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = write_config(dir.path(), "bad.json", "{\n  \"p_avg\": 1.0,\n  \"eps\": oops\n}\n");
    let out = run("capacity", &bad, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let invalid = write_config(dir.path(), "invalid.json", &format!("{{{FOUR_STATE_LAW}, \"p_avg\": -1.0, \"eps\": 0.2}}"));
    let out = run("capacity", &invalid, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_avg"));

    let too_fast = write_config(
        dir.path(),
        "fast.json",
        &format!("{{{FOUR_STATE_LAW}, \"p_avg\": 0.5, \"eps\": 0.2, \"policy\": {{\"target\": 50.0}}}}"),
    );
    let out = run("policy", &too_fast, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

fn small_simulation(dir: &Path, horizon: u64) -> PathBuf {
    write_config(
        dir,
        "sim.json",
        &format!(
            "{{{CHI_SQUARE_LAW}, \"p_avg\": 1.0, \"eps\": 0.02, \"seed\": 5,
              \"simulate\": {{\"buffer_grid\": [0.0, 2.0, 10.0, 40.0], \"horizon\": {horizon}, \"traces\": 3}}}}"
        ),
    )
}

#[test]
fn single_block_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_simulation(dir.path(), 1);
    let out = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/traces.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "identity_residual").unwrap();
    for line in csv.lines().skip(1) {
        let v: f64 = line.split(',').nth(col).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn simulation_is_deterministic_across_workers_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_simulation(dir.path(), 20_000);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert!(run("simulate", &cfg, &a, &["--workers", "1"]).status.success());
    assert!(run("simulate", &cfg, &b, &["--workers", "3"]).status.success());
    assert!(run("simulate", &a.join("effective_config.json"), &c, &[]).status.success());
    for name in ["traces.csv", "loss_ratio.csv", "outage.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} depends on worker count");
        assert_eq!(x, fs::read(c.join(name)).unwrap(), "{name} differs after config round trip");
    }
    assert_eq!(fs::read(a.join("effective_config.json")).unwrap(), fs::read(c.join("effective_config.json")).unwrap());

    let d = dir.path().join("d");
    assert!(run("simulate", &cfg, &d, &["--seed", "6"]).status.success());
    assert_ne!(fs::read(a.join("traces.csv")).unwrap(), fs::read(d.join("traces.csv")).unwrap());
    let eff: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("effective_config.json")).unwrap()).unwrap();
    assert_eq!(eff["seed"], 6);
}

#[test]
fn outage_table_has_bound_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_simulation(dir.path(), 50_000);
    assert!(run("simulate", &cfg, dir.path(), &[]).status.success());
    let csv = fs::read_to_string(dir.path().join("outage.csv")).unwrap();
    assert!(csv.starts_with("rate_multiplier,rate_R,M,eps_prime,eps_prime_stderr,bound_M\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
    let loss = fs::read_to_string(dir.path().join("loss_ratio.csv")).unwrap();
    let rows: Vec<Vec<f64>> = loss.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    for group in rows.chunks(4) {
        for w in group.windows(2) {
            assert!(w[1][3] <= w[0][3] + 1e-12, "loss ratio rises with M: {w:?}");
        }
    }
}

#[test]
fn sizing_bound_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "size.json",
        &format!("{{{CHI_SQUARE_LAW}, \"p_avg\": 1.0, \"eps\": 0.02, \"sizing\": {{\"bound_only\": true}}}}"),
    );
    let out = run("sizing", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sizing.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,eps_prime,C,var_rs,V,bound_M,simulated_M,sim_ci_halfwidth"));
    let bounds: Vec<f64> = lines.map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert_eq!(bounds.len(), 3);
    assert!(bounds[0] > bounds[1] && bounds[1] > bounds[2]);
}
