//! Scenario × supply-variant matrix with sensitivity panels.
//!
//! Everything is computed in memory first; files are written only when every
//! cell succeeded, so a failing matrix leaves no partial outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{load_scenario, LoadedScenario};
use crate::error::{Error, Result};
use crate::fleet::{simulate, DemandBreakdown, Engine};
use crate::gap::{analyze_gap, sweep_gamma, sweep_tau, GapOptions, GapReport, SweepResult};
use crate::history::validate_history;
use crate::manifest::RunManifest;
use crate::output::{
    demand_table, gap_panel_table, gap_report_json, stockpile_table, supply_table, sweep_series_table,
    sweep_summary_table, write_file, write_json, Table,
};
use crate::scenario::RecyclingRamp;
use crate::supply::{project_supply, SupplyOptions, SupplyProjection, SupplyVariant, SUPPLY_ASSUMPTION};

pub const MATRIX_FILE: &str = "matrix.toml";

fn default_engine() -> Engine {
    Engine::Expected
}

fn default_variants() -> Vec<SupplyVariant> {
    SupplyVariant::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    /// Scenario files relative to the config directory.
    pub scenarios: Vec<PathBuf>,
    pub history: PathBuf,
    #[serde(default = "default_variants")]
    pub variants: Vec<SupplyVariant>,
    #[serde(default = "default_engine")]
    pub engine: Engine,
    #[serde(default)]
    pub gap: GapOptions,
    #[serde(default)]
    pub supply: SupplyOptions,
    #[serde(default)]
    pub sweeps: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampConfig {
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub start_year: i32,
    pub ramp_end_year: i32,
}

impl RampConfig {
    pub fn ramp(&self) -> Result<RecyclingRamp> {
        RecyclingRamp::new(self.start, self.end, self.start_year, self.ramp_end_year)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub gamma: Vec<RampConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let ramp = |label: &str, end: f64| RampConfig {
            label: label.into(),
            start: 0.70,
            end,
            start_year: 2024,
            ramp_end_year: 2035,
        };
        Self {
            taus: (5..=20).map(f64::from).collect(),
            gamma: vec![ramp("70pct", 0.70), ramp("80pct", 0.80), ramp("90pct", 0.90), ramp("97pct", 0.97)],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub scenario: String,
    pub variant: SupplyVariant,
    pub feasible: bool,
    pub total_shortfall: f64,
    pub total_surplus: f64,
    pub required_supply_increase_pct: f64,
}

/// In-memory results of one scenario row.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub loaded: LoadedScenario,
    pub demand: DemandBreakdown,
    pub gaps: Vec<(SupplyVariant, GapReport)>,
    pub tau_sweep: SweepResult,
    pub gamma_sweep: SweepResult,
}

#[derive(Debug, Clone)]
pub struct MatrixResult {
    pub config: MatrixConfig,
    pub supplies: Vec<SupplyProjection>,
    pub scenarios: Vec<ScenarioResult>,
    pub inputs: Vec<(String, Vec<u8>)>,
}

impl MatrixResult {
    pub fn cells(&self) -> Vec<CellSummary> {
        self.scenarios
            .iter()
            .flat_map(|s| {
                s.gaps.iter().map(move |(v, r)| CellSummary {
                    scenario: s.loaded.scenario.id.clone(),
                    variant: *v,
                    feasible: r.feasible,
                    total_shortfall: r.total_shortfall,
                    total_surplus: r.total_surplus,
                    required_supply_increase_pct: r.required_supply_increase_pct,
                })
            })
            .collect()
    }

    pub fn scenario(&self, id: &str) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.loaded.scenario.id == id)
    }
}

pub fn load_matrix_config(config_dir: &Path) -> Result<(MatrixConfig, Vec<u8>)> {
    let path = config_dir.join(MATRIX_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config {
        path: path.clone(),
        message: "file is not UTF-8".into(),
    })?;
    let cfg: MatrixConfig = toml::from_str(&text).map_err(|e| Error::Config {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let fail = |m: &str| Error::Config {
        path: path.clone(),
        message: m.into(),
    };
    if cfg.scenarios.is_empty() {
        return Err(fail("matrix lists no scenarios"));
    }
    if cfg.variants.is_empty() {
        return Err(fail("matrix lists no supply variants"));
    }
    if cfg.sweeps.taus.is_empty() || cfg.sweeps.gamma.is_empty() {
        return Err(fail("sweep lists must not be empty"));
    }
    Ok((cfg, bytes))
}

/// Computes the whole matrix without touching the filesystem beyond reads.
pub fn compute_matrix(config_dir: &Path) -> Result<MatrixResult> {
    let (config, matrix_bytes) = load_matrix_config(config_dir)?;
    let hist_path = config_dir.join(&config.history);
    let history = validate_history(&hist_path)?;
    let hist_bytes = std::fs::read(&hist_path).map_err(|e| Error::io(&hist_path, e))?;
    let mut inputs = vec![
        (MATRIX_FILE.to_string(), matrix_bytes),
        (config.history.to_string_lossy().into_owned(), hist_bytes),
    ];
    let loaded = config
        .scenarios
        .iter()
        .map(|p| load_scenario(config_dir.join(p)))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeMap::new();
    for l in &loaded {
        if let Some(prev) = seen.insert(l.scenario.id.clone(), l.path.clone()) {
            return Err(Error::Config {
                path: l.path.clone(),
                message: format!("scenario id `{}` already used by {}", l.scenario.id, prev.display()),
            });
        }
        inputs.extend(l.inputs.iter().cloned());
    }
    let supplies = config
        .variants
        .iter()
        .map(|&v| project_supply(&history, v, &config.supply))
        .collect::<Result<Vec<_>>>()?;
    let ramps = config
        .sweeps
        .gamma
        .iter()
        .map(|r| Ok((r.label.clone(), r.ramp()?)))
        .collect::<Result<Vec<_>>>()?;
    let scenarios = loaded
        .into_par_iter()
        .map(|l| {
            let s = &l.scenario;
            let demand = simulate(s, config.engine)?;
            let gaps = supplies
                .iter()
                .map(|p| Ok((p.variant, analyze_gap(&demand.m_total, &p.available_for_pemel, &config.gap)?)))
                .collect::<Result<Vec<_>>>()?;
            let tau_sweep = sweep_tau(s, &config.sweeps.taus, config.engine)?;
            let gamma_sweep = sweep_gamma(s, &ramps, config.engine)?;
            Ok(ScenarioResult {
                loaded: l,
                demand,
                gaps,
                tau_sweep,
                gamma_sweep,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixResult {
        config,
        supplies,
        scenarios,
        inputs,
    })
}

/// Output files of a matrix, as `(relative path, contents)`.
pub fn render_matrix(m: &MatrixResult) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let csv = |t: &Table| t.to_csv_string().into_bytes();
    let json_bytes = |v: &serde_json::Value| {
        let mut s = serde_json::to_string_pretty(v).expect("JSON");
        s.push('\n');
        s.into_bytes()
    };
    for p in &m.supplies {
        files.push((format!("supply_{}.csv", p.variant).into(), csv(&supply_table(p))));
    }
    for r in &m.scenarios {
        let id = &r.loaded.scenario.id;
        let dir = PathBuf::from(id);
        files.push((dir.join("panel_a_demand.csv"), csv(&demand_table(&r.demand))));
        for (v, g) in &r.gaps {
            let supply = &m
                .supplies
                .iter()
                .find(|p| p.variant == *v)
                .expect("variant computed")
                .available_for_pemel;
            let panel = match v {
                SupplyVariant::Strong => "panel_b",
                SupplyVariant::Weak => "panel_c",
            };
            files.push((
                dir.join(format!("{panel}_gap_{v}.csv")),
                csv(&gap_panel_table(&r.demand.m_total, supply, g)),
            ));
            files.push((dir.join(format!("gap_report_{v}.json")), json_bytes(&gap_report_json(g))));
            files.push((dir.join(format!("stockpile_{v}.csv")), csv(&stockpile_table(g))));
        }
        files.push((dir.join("panel_d_gamma_demand.csv"), csv(&sweep_series_table(&r.gamma_sweep))));
        files.push((dir.join("gamma_sweep.csv"), csv(&sweep_summary_table(&r.gamma_sweep))));
        files.push((dir.join("panel_e_tau_demand.csv"), csv(&sweep_series_table(&r.tau_sweep))));
        files.push((dir.join("panel_f_tau_cumulative.csv"), csv(&sweep_summary_table(&r.tau_sweep))));
    }
    let mut summary = String::from("scenario,variant,feasible,total_shortfall_t,total_surplus_t,required_supply_increase_pct\n");
    for c in m.cells() {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.scenario,
            c.variant,
            c.feasible,
            crate::series::fmt_f64(c.total_shortfall),
            crate::series::fmt_f64(c.total_surplus),
            crate::series::fmt_f64(c.required_supply_increase_pct)
        ));
    }
    files.push(("matrix_summary.csv".into(), summary.into_bytes()));
    files
}

/// Manifests for the matrix and each scenario; timestamps make these differ
/// between runs, unlike the CSV outputs.
pub fn matrix_manifests(m: &MatrixResult) -> Vec<(PathBuf, serde_json::Value)> {
    let mut out = Vec::new();
    for r in &m.scenarios {
        let s = &r.loaded.scenario;
        let mut inputs = r.loaded.inputs.clone();
        inputs.extend(m.inputs[..2].iter().cloned());
        let mut man = RunManifest::new(&s.id, m.config.engine, s.seed, &inputs);
        man.notes.push(SUPPLY_ASSUMPTION.to_string());
        man.resolved_config = serde_json::to_value(&r.loaded.config).ok();
        out.push((PathBuf::from(&s.id).join("run_manifest.json"), json!(man)));
    }
    let seed = m.scenarios.first().map(|s| s.loaded.scenario.seed).unwrap_or(0);
    let mut man = RunManifest::new("matrix", m.config.engine, seed, &m.inputs);
    man.notes.push(SUPPLY_ASSUMPTION.to_string());
    man.resolved_config = serde_json::to_value(&m.config).ok();
    out.push(("run_manifest.json".into(), json!(man)));
    out
}

/// Computes the matrix for `config_dir` and writes every output under
/// `out_dir`. Returns the written paths.
pub fn run_matrix(config_dir: &Path, out_dir: &Path) -> Result<(MatrixResult, Vec<PathBuf>)> {
    let m = compute_matrix(config_dir)?;
    let mut written = Vec::new();
    for (rel, bytes) in render_matrix(&m) {
        let p = out_dir.join(rel);
        write_file(&p, &bytes)?;
        written.push(p);
    }
    for (rel, v) in matrix_manifests(&m) {
        let p = out_dir.join(rel);
        write_json(&p, &v)?;
        written.push(p);
    }
    Ok((m, written))
}
