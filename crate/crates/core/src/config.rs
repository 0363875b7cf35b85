//! TOML scenario files and anchor CSVs.
//!
//! A scenario file has four sections. Unknown keys are rejected.
//!
//! ```toml
//! id = "conservative_bau"
//!
//! [pathway]
//! kind = "bau"                      # bau | nze | custom
//! anchors_file = "../bau_anchors.csv"
//! end_value = 489.0                 # bau only
//! end_year = 2050                   # bau only
//! extension = "accelerating-additions"
//!
//! [omega]                           # kg/GW
//! start = 750.0
//! floor = 96.0
//! decay_rate = 0.35
//! start_year = 2024
//!
//! [gamma]
//! start = 0.70
//! end = 0.97
//! start_year = 2024
//! ramp_end_year = 2035
//!
//! [fleet]
//! tau_mean = 10.0
//! seed = 42
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SchemaError};
use crate::scenario::{
    build_bau, build_nze, BauExtension, CapacityPathway, LifetimeShape, OmegaTrajectory, PathwayLabel,
    RecyclingRamp, Scenario,
};
use crate::series::{interpolate_linear, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub pathway: PathwayConfig,
    pub omega: OmegaConfig,
    pub gamma: GammaConfig,
    pub fleet: FleetConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathwayKind {
    Bau,
    Nze,
    Custom,
}

impl PathwayKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathwayKind::Bau => "bau",
            PathwayKind::Nze => "nze",
            PathwayKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathwayConfig {
    pub kind: PathwayKind,
    /// Inline `[year, value]` anchors. Mutually exclusive with `anchors_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<(i32, f64)>>,
    /// CSV with header `year,<value column>`, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<BauExtension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    pub start: f64,
    pub floor: f64,
    pub decay_rate: f64,
    pub start_year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_end_year: Option<i32>,
    /// Flat efficiency in `[0, 1]`; excludes the ramp keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub tau_mean: f64,
    #[serde(default)]
    pub lifetime: LifetimeShape,
    #[serde(default = "one")]
    pub unit_size_mw: f64,
    #[serde(default = "one_u32")]
    pub mc_subsample: u32,
    #[serde(default)]
    pub recycling_lag: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<(i32, i32)>,
}

/// A resolved scenario together with the raw inputs it was built from.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub path: PathBuf,
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    /// `(name, bytes)` of every file read, for digests.
    pub inputs: Vec<(String, Vec<u8>)>,
}

fn cfg_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn parse_scenario_config(text: &str, path: &Path) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| cfg_err(path, e.to_string()))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| cfg_err(path, "file is not UTF-8"))?;
    let config = parse_scenario_config(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut inputs = vec![(file_name(path), bytes)];
    let scenario = resolve(&config, base, path, &mut inputs)?;
    Ok(LoadedScenario {
        path: path.to_path_buf(),
        config,
        scenario,
        inputs,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Builds the [`Scenario`] described by `config`; relative files resolve
/// against `base`.
pub fn resolve(
    config: &ScenarioConfig,
    base: &Path,
    path: &Path,
    inputs: &mut Vec<(String, Vec<u8>)>,
) -> Result<Scenario> {
    let wrap = |e: Error| match e {
        Error::Io { .. } | Error::Config { .. } | Error::Schema(_) => e,
        other => cfg_err(path, other.to_string()),
    };
    let p = &config.pathway;
    let anchors = match (&p.anchors, &p.anchors_file) {
        (Some(a), None) => a.clone(),
        (None, Some(f)) => {
            let fp = base.join(f);
            let bytes = std::fs::read(&fp).map_err(|e| Error::io(&fp, e))?;
            let a = parse_anchors(&bytes)?;
            inputs.push((file_name(&fp), bytes));
            a
        }
        (Some(_), Some(_)) => return Err(cfg_err(path, "[pathway] sets both `anchors` and `anchors_file`")),
        (None, None) => return Err(cfg_err(path, "[pathway] needs `anchors` or `anchors_file`")),
    };
    let reject = |key: &str, set: bool| -> Result<()> {
        if set {
            Err(cfg_err(path, format!("[pathway] key `{key}` does not apply to kind `{}`", p.kind.as_str())))
        } else {
            Ok(())
        }
    };
    let pathway = match p.kind {
        PathwayKind::Bau => {
            reject("share", p.share.is_some())?;
            build_bau(
                &anchors,
                p.end_value.unwrap_or(489.0),
                p.end_year.unwrap_or(2050),
                p.extension.unwrap_or_default(),
            )
            .map_err(wrap)?
        }
        PathwayKind::Nze => {
            reject("end_value", p.end_value.is_some())?;
            reject("end_year", p.end_year.is_some())?;
            reject("extension", p.extension.is_some())?;
            build_nze(&anchors, p.share.unwrap_or(0.40)).map_err(wrap)?
        }
        PathwayKind::Custom => {
            reject("share", p.share.is_some())?;
            reject("end_value", p.end_value.is_some())?;
            reject("end_year", p.end_year.is_some())?;
            reject("extension", p.extension.is_some())?;
            let (a, b) = (anchors.first().map(|x| x.0), anchors.last().map(|x| x.0));
            let (Some(a), Some(b)) = (a, b) else {
                return Err(cfg_err(path, "[pathway] has no anchors"));
            };
            let cum = interpolate_linear(&anchors, (a, b), Unit::Gigawatt).map_err(wrap)?;
            CapacityPathway::from_cumulative(PathwayLabel::Custom, cum).map_err(wrap)?
        }
    };
    let o = &config.omega;
    let omega = OmegaTrajectory::new(o.start, o.floor, o.decay_rate, o.start_year).map_err(wrap)?;
    let g = &config.gamma;
    let gamma = match g.constant {
        Some(c) => {
            if g.start.is_some() || g.end.is_some() || g.start_year.is_some() || g.ramp_end_year.is_some() {
                return Err(cfg_err(path, "[gamma] `constant` excludes the ramp keys"));
            }
            RecyclingRamp::constant(c).map_err(wrap)?
        }
        None => {
            let need = |v: Option<f64>, k: &str| v.ok_or_else(|| cfg_err(path, format!("[gamma] missing `{k}`")));
            let start = need(g.start, "start")?;
            let end = need(g.end, "end")?;
            let ramp_end = g.ramp_end_year.ok_or_else(|| cfg_err(path, "[gamma] missing `ramp_end_year`"))?;
            RecyclingRamp::new(start, end, g.start_year.unwrap_or(pathway.start_year()), ramp_end).map_err(wrap)?
        }
    };
    let f = &config.fleet;
    let mut s = Scenario::new(config.id.clone(), pathway, omega, gamma, f.tau_mean).map_err(wrap)?;
    s.lifetime_shape = f.lifetime;
    s.unit_size_mw = f.unit_size_mw;
    s.mc_subsample = f.mc_subsample;
    s.recycling_lag = f.recycling_lag;
    s.seed = f.seed;
    if let Some(h) = f.horizon {
        s.horizon = h;
    }
    s.validate().map_err(wrap)?;
    Ok(s)
}

/// Parses a two-column `year,<value>` anchor CSV.
pub fn parse_anchors(bytes: &[u8]) -> Result<Vec<(i32, f64)>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = r.headers()?.clone();
    let mut errors = Vec::new();
    if headers.len() != 2 || &headers[0] != "year" {
        errors.push(SchemaError {
            line: 1,
            column: None,
            message: "expected two columns with `year` first".into(),
        });
        return Err(Error::Schema(errors));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        match (rec[0].parse::<i32>(), rec[1].parse::<f64>()) {
            (Ok(y), Ok(v)) if v.is_finite() => out.push((y, v)),
            (Err(_), _) => errors.push(SchemaError {
                line,
                column: Some("year".into()),
                message: format!("not an integer: `{}`", &rec[0]),
            }),
            _ => errors.push(SchemaError {
                line,
                column: Some(headers[1].to_string()),
                message: format!("not a finite number: `{}`", &rec[1]),
            }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(Error::Schema(errors))
    }
}
