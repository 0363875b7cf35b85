use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn iridium(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iridium"))
        .args(args)
        .env_remove("IRIDIUM_CONFIG_DIR")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn scenario(id: &str) -> String {
    data().join("scenarios").join(format!("{id}.toml")).to_string_lossy().into_owned()
}

#[test]
fn validate_prints_resolved_series() {
    let o = iridium(&["scenario", "validate", &scenario("conservative_bau")]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("year,cumulative_gw,additions_gw,omega_kg_per_gw,gamma\n"));
    assert!(out.contains("\n2050,489,"));
}

#[test]
fn simulate_writes_breakdown_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = iridium(&["-q", "--out", p(dir.path()), "simulate", "--scenario", &scenario("optimistic_bau"), "--engine", "mc"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("demand_breakdown.csv")).unwrap();
    assert!(csv.starts_with("year,m_cap,m_eol,m_recycling,m_total,surplus_recycled,operating_capacity_gw\n"));
    assert_eq!(csv.lines().count(), 28);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["manifest"]["engine"], "mc");
    assert_eq!(meta["manifest"]["seed"], 20240);
    assert!(meta["manifest"]["rng_algorithm"].as_str().unwrap().contains("ChaCha8"));
    assert!(meta["manifest"]["resolved_config"].is_object());
}

#[test]
fn seed_flag_controls_mc_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = iridium(&["-q", "--seed", seed, "--out", p(&out), "simulate", "--engine", "mc", "--scenario", &scenario("conservative_nze")]);
        assert!(o.status.success());
        fs::read(out.join("demand_breakdown.csv")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    assert_ne!(run("a", "3"), run("c", "4"));
}

#[test]
fn supply_gaps_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let supply = dir.path().join("supply_weak.csv");
    let h = data().join("history.csv");
    let o = iridium(&["-q", "--out", p(&supply), "supply", "--history", p(&h), "--variant", "weak", "--start", "2024"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = iridium(&["-q", "--out", p(dir.path()), "simulate", "--scenario", &scenario("conservative_nze")]);
    assert!(o.status.success());
    let demand = dir.path().join("demand_breakdown.csv");
    let o = iridium(&["-q", "--out", p(dir.path()), "gaps", "--demand", p(&demand), "--supply", p(&supply), "--stock0", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("gap_report.json")).unwrap()).unwrap();
    assert_eq!(report["feasible"], false);
    assert!(report["total_shortfall_t"].as_f64().unwrap() > 50.0);
    let stock = fs::read_to_string(dir.path().join("stockpile.csv")).unwrap();
    assert_eq!(stock.lines().count(), 28);
}

#[test]
fn json_format_and_derived_metrics() {
    let o = iridium(&["--format", "json", "derived", "dissolution", "--scenario", &scenario("conservative_bau"), "--tau", "10,20"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 27);
    let r10 = rows[0]["rate_mg_cm2_h_tau_10"].as_f64().unwrap();
    let r20 = rows[0]["rate_mg_cm2_h_tau_20"].as_f64().unwrap();
    assert!((r10 - 2.0 * r20).abs() < 1e-18);
    let o = iridium(&["derived", "pgm", "--iridium", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pgm_t"], 50.0);
}

#[test]
fn sweep_reports_minimizer() {
    let o = iridium(&["-q", "sweep", "--scenario", &scenario("conservative_bau"), "--param", "tau", "--values", "5,8,11,14,20"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let min: Vec<&str> = out.lines().filter(|l| l.ends_with(",1")).collect();
    assert_eq!(min.len(), 1);
    assert!(min[0].starts_with("11,"), "{out}");
    let o = iridium(&["-q", "sweep", "--scenario", &scenario("conservative_bau"), "--param", "gamma", "--values", "0.7,0.97"]);
    assert!(o.status.success());
}

#[test]
fn run_matrix_uses_env_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_iridium"))
        .args(["-q", "--out", p(dir.path()), "run-matrix"])
        .env("IRIDIUM_CONFIG_DIR", data())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("matrix_summary.csv").exists());
    assert!(dir.path().join("conservative_nze/gap_report_weak.json").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(iridium(&["bogus"]).status.code(), Some(1));
    assert_eq!(iridium(&["simulate"]).status.code(), Some(1));
    assert_eq!(iridium(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario("conservative_bau")).unwrap().replace("[fleet]", "[fleet]\nspeed = 3");
    fs::write(&bad, text).unwrap();
    let o = iridium(&["scenario", "validate", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("speed"));

    let hist = dir.path().join("h.csv");
    fs::write(&hist, "year,sector,demand_t,price_eur_per_kg\n2020,electrical,-1,10\n").unwrap();
    let o = iridium(&["supply", "--history", p(&hist), "--variant", "strong"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("sector coverage incomplete"), "{err}");

    let missing = dir.path().join("nope.toml");
    assert_eq!(iridium(&["simulate", "--scenario", p(&missing)]).status.code(), Some(2));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = iridium(&["--out", p(&blocker.join("sub")), "simulate", "--scenario", &scenario("optimistic_bau")]);
    assert_eq!(o.status.code(), Some(2));
}
