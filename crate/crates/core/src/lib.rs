//! Iridium demand and supply simulator for PEM electrolyzer scale-up.
//!
//! The crate projects primary iridium demand of an electrolyzer fleet
//! (installations, end-of-life replacements, closed-loop recycling), projects
//! the iridium left over for electrolysis after competing sectors, and
//! quantifies the gap between the two.
//!
//! ```
//! use iridium_core::prelude::*;
//!
//! let pathway = build_nze(&[(2024, 0.0), (2050, 3670.0)], 0.4).unwrap();
//! let omega = OmegaTrajectory::new(750.0, 96.0, 0.35, 2024).unwrap();
//! let gamma = RecyclingRamp::new(0.70, 0.97, 2024, 2035).unwrap();
//! let scenario = Scenario::new("demo", pathway, omega, gamma, 10.0).unwrap();
//! let demand = simulate_fleet_expected(&scenario).unwrap();
//! assert_eq!(demand.m_total.len(), 27);
//! ```

pub mod config;
pub mod error;
pub mod fleet;
pub mod gap;
pub mod history;
pub mod manifest;
pub mod matrix;
pub mod output;
pub mod scenario;
pub mod series;
pub mod supply;

pub use error::{Error, Result, SchemaError};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::fleet::{
        simulate, simulate_fleet_expected, simulate_fleet_mc, DemandBreakdown, Engine,
        Lifetime, LifetimeDistribution, LifetimePmf,
    };
    pub use crate::gap::{
        analyze_gap, max_capacity_path, pgm_required, required_dissolution_rate, sweep_gamma,
        sweep_tau, CellParams, GapOptions, GapReport, GapSegment, SegmentKind, SweepResult,
    };
    pub use crate::scenario::{
        build_bau, build_nze, BauExtension, CapacityPathway, LifetimeShape, OmegaTrajectory,
        PathwayLabel, RecyclingRamp, Scenario,
    };
    pub use crate::series::{interpolate_linear, AnnualSeries, Unit};
    pub use crate::supply::{
        fit_damped_trend, forecast, project_supply, DampedTrendModel, History, Sector,
        SupplyOptions, SupplyProjection, SupplyVariant,
    };
}
