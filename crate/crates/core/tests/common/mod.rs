#![allow(dead_code)]

use std::path::PathBuf;

use iridium_core::config::load_scenario;
use iridium_core::scenario::Scenario;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn shipped(id: &str) -> Scenario {
    load_scenario(data_dir().join("scenarios").join(format!("{id}.toml")))
        .unwrap_or_else(|e| panic!("{id}: {e}"))
        .scenario
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}
