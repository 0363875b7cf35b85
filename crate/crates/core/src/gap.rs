//! Supply–demand gaps, stockpiles, sensitivity sweeps and derived metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::{simulate, Engine, Lifetime};
use crate::scenario::{OmegaTrajectory, RecyclingRamp, Scenario};
use crate::series::{AnnualSeries, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Shortfall,
    Surplus,
}

/// Contiguous run of years with the same gap sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSegment {
    pub start_year: i32,
    pub end_year: i32,
    pub kind: SegmentKind,
    /// Σ|gap| over the run, t.
    pub integral: f64,
}

impl GapSegment {
    pub fn years(&self) -> i32 {
        self.end_year - self.start_year + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapOptions {
    /// Stock available at the start of the horizon, t.
    pub initial_stock: f64,
    /// Primary supply the supply-increase percentages refer to, t/yr.
    pub baseline_primary: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            initial_stock: 1.0,
            baseline_primary: 7.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    /// Demand − supply, t/yr.
    pub gap: AnnualSeries,
    pub segments: Vec<GapSegment>,
    /// initial_stock + Σ(supply − demand), t. Negative values mean infeasible.
    pub stockpile: AnnualSeries,
    pub total_shortfall: f64,
    pub total_surplus: f64,
    pub initial_stock: f64,
    /// Net shortfall ÷ (baseline primary × shortfall years).
    pub required_supply_increase_pct: f64,
    /// Gross shortfall ÷ (baseline primary × shortfall years).
    pub required_supply_increase_gross_pct: f64,
    pub shortfall_years: u32,
    pub feasible: bool,
}

impl GapReport {
    pub fn net_shortfall(&self) -> f64 {
        self.total_shortfall - self.total_surplus
    }

    pub fn min_stockpile(&self) -> f64 {
        self.stockpile.min()
    }

    pub fn shortfall_segments(&self) -> impl Iterator<Item = &GapSegment> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Shortfall)
    }

    /// Per-segment supply increase: integral ÷ (baseline × segment years).
    pub fn segment_increase_pct(&self, seg: &GapSegment, baseline_primary: f64) -> f64 {
        100.0 * seg.integral / (baseline_primary * f64::from(seg.years()))
    }
}

pub fn analyze_gap(demand: &AnnualSeries, supply: &AnnualSeries, opts: &GapOptions) -> Result<GapReport> {
    if !opts.initial_stock.is_finite() {
        return Err(Error::param("initial_stock", "must be finite"));
    }
    if !(opts.baseline_primary > 0.0 && opts.baseline_primary.is_finite()) {
        return Err(Error::param("baseline_primary", "must be positive"));
    }
    let gap = demand.sub(supply)?;
    let mut segments: Vec<GapSegment> = Vec::new();
    for (year, g) in gap.iter() {
        let kind = if g > 0.0 {
            SegmentKind::Shortfall
        } else if g < 0.0 {
            SegmentKind::Surplus
        } else {
            continue;
        };
        match segments.last_mut() {
            Some(s) if s.kind == kind && s.end_year == year - 1 => {
                s.end_year = year;
                s.integral += g.abs();
            }
            _ => segments.push(GapSegment {
                start_year: year,
                end_year: year,
                kind,
                integral: g.abs(),
            }),
        }
    }
    let total_shortfall = gap.values().iter().filter(|&&g| g > 0.0).fold(0.0, |a, g| a + g);
    let total_surplus = gap.values().iter().filter(|&&g| g < 0.0).fold(0.0, |a, g| a - g);
    let shortfall_years = gap.values().iter().filter(|&&g| g > 0.0).count() as u32;
    let mut stock = opts.initial_stock;
    let stockpile = AnnualSeries::new(
        gap.start_year(),
        gap.values()
            .iter()
            .map(|g| {
                stock -= g;
                stock
            })
            .collect(),
        gap.unit().accumulated(),
    )?;
    let denom = opts.baseline_primary * f64::from(shortfall_years);
    let (net_pct, gross_pct) = if shortfall_years == 0 {
        (0.0, 0.0)
    } else {
        (
            100.0 * (total_shortfall - total_surplus).max(0.0) / denom,
            100.0 * total_shortfall / denom,
        )
    };
    let feasible = stockpile.min() >= 0.0;
    Ok(GapReport {
        gap,
        segments,
        stockpile,
        total_shortfall,
        total_surplus,
        initial_stock: opts.initial_stock,
        required_supply_increase_pct: net_pct,
        required_supply_increase_gross_pct: gross_pct,
        shortfall_years,
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Tau,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub labels: Vec<String>,
    /// τ in years, or the ramp's end efficiency for γ sweeps.
    pub values: Vec<f64>,
    pub cumulative_demand: Vec<f64>,
    /// Annual primary demand of each run.
    pub demand: Vec<AnnualSeries>,
    /// Index of the minimizing entry.
    pub minimizer: usize,
}

impl SweepResult {
    pub fn minimizer_value(&self) -> f64 {
        self.values[self.minimizer]
    }

    pub fn minimizer_label(&self) -> &str {
        &self.labels[self.minimizer]
    }
}

fn argmin(values: &[f64], cum: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..cum.len() {
        if cum[i] < cum[best] || (cum[i] == cum[best] && values[i] < values[best]) {
            best = i;
        }
    }
    best
}

/// One run per τ with everything else fixed. Ties in cumulative demand go to
/// the smaller τ.
pub fn sweep_tau(base: &Scenario, taus: &[f64], engine: Engine) -> Result<SweepResult> {
    if taus.is_empty() {
        return Err(Error::param("taus", "empty sweep"));
    }
    if let Some(t) = taus.iter().find(|t| !(1.0..=40.0).contains(*t)) {
        return Err(Error::param("taus", format!("τ = {t} not in [1, 40]")));
    }
    let runs = taus
        .par_iter()
        .map(|&t| simulate(&base.with_tau(t), engine).map(|d| d.m_total))
        .collect::<Result<Vec<_>>>()?;
    let cumulative_demand: Vec<f64> = runs.iter().map(AnnualSeries::sum).collect();
    Ok(SweepResult {
        parameter: SweepParameter::Tau,
        labels: taus.iter().map(|t| format!("{t}")).collect(),
        values: taus.to_vec(),
        minimizer: argmin(taus, &cumulative_demand),
        cumulative_demand,
        demand: runs,
    })
}

/// One run per recycling ramp. Ties go to the earlier ramp in the list.
pub fn sweep_gamma(base: &Scenario, ramps: &[(String, RecyclingRamp)], engine: Engine) -> Result<SweepResult> {
    if ramps.is_empty() {
        return Err(Error::param("ramps", "empty sweep"));
    }
    let runs = ramps
        .par_iter()
        .map(|(_, r)| simulate(&base.with_gamma(*r), engine).map(|d| d.m_total))
        .collect::<Result<Vec<_>>>()?;
    let cumulative_demand: Vec<f64> = runs.iter().map(AnnualSeries::sum).collect();
    let order: Vec<f64> = (0..ramps.len()).map(|i| i as f64).collect();
    Ok(SweepResult {
        parameter: SweepParameter::Gamma,
        labels: ramps.iter().map(|(l, _)| l.clone()).collect(),
        values: ramps.iter().map(|(_, r)| r.gamma_end).collect(),
        minimizer: argmin(&order, &cumulative_demand),
        cumulative_demand,
        demand: runs,
    })
}

/// PGM output needed to yield `extra_iridium` as a byproduct.
pub fn pgm_required(extra_iridium: f64, ir_fraction: f64) -> Result<f64> {
    check_fraction(ir_fraction)?;
    if !(extra_iridium >= 0.0 && extra_iridium.is_finite()) {
        return Err(Error::param("extra_iridium", format!("{extra_iridium} must be a finite, non-negative mass")));
    }
    Ok(extra_iridium / ir_fraction)
}

/// Element-wise [`pgm_required`]; the result is tagged `t PGM`.
pub fn pgm_required_series(extra_iridium: &AnnualSeries, ir_fraction: f64) -> Result<AnnualSeries> {
    check_fraction(ir_fraction)?;
    Ok(extra_iridium.map(|v| v / ir_fraction).with_unit(Unit::TonnePgm))
}

fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::param("ir_fraction", format!("{f} not in (0, 1)")));
    }
    Ok(())
}

/// Capacity reachable when the fleet may only use the given iridium supply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCapacityPath {
    /// Operating capacity, GW.
    pub cumulative: AnnualSeries,
    /// New expansion capacity, GW/yr.
    pub additions: AnnualSeries,
    /// Retiring capacity that was replaced, GW/yr.
    pub replaced: AnnualSeries,
    /// Supply plus recycled returns, t/yr.
    pub iridium_available: AnnualSeries,
    /// Iridium put into new and replacement stacks, t/yr.
    pub iridium_used: AnnualSeries,
}

/// Greedy allocation: each year the iridium available is the supply plus the
/// recycled returns of the constrained fleet's own retirements. Replacements
/// of retiring capacity are funded first and the remainder ÷ ω becomes new
/// expansion. Lifetimes, recycling ramp and horizon come from `base`.
pub fn max_capacity_path(supply: &AnnualSeries, omega: &OmegaTrajectory, base: &Scenario) -> Result<MaxCapacityPath> {
    if supply.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("supply", "must be non-negative"));
    }
    let (first, last) = (supply.start_year(), supply.end_year());
    let pmf = Lifetime::for_scenario(base)?.pmf();
    let w = omega.series(first, last)?;
    let w = w.values();
    let g = base.gamma.series(first, last)?;
    let g = g.values();
    let s = supply.values();
    let lag = base.recycling_lag as usize;
    let n = s.len();
    let mut installs = vec![0.0; n];
    let mut adds = vec![0.0; n];
    let mut replaced = vec![0.0; n];
    let mut retired_mass = vec![0.0; n];
    let mut avail = vec![0.0; n];
    let mut used = vec![0.0; n];
    let mut operating = vec![0.0; n];
    let mut op = 0.0;
    for i in 0..n {
        let mut retiring = 0.0;
        let mut rm = 0.0;
        for (k, p) in pmf.iter() {
            let k = k as usize;
            if k > i {
                break;
            }
            retiring += installs[i - k] * p;
            rm += installs[i - k] * w[i - k] * p / 1000.0;
        }
        retired_mass[i] = rm;
        let recycled = if i >= lag { retired_mass[i - lag] * g[i] } else { 0.0 };
        avail[i] = s[i] + recycled;
        let per_gw = w[i] / 1000.0;
        let rep = retiring.min(avail[i] / per_gw);
        let add = (avail[i] - rep * per_gw).max(0.0) / per_gw;
        replaced[i] = rep;
        adds[i] = add;
        installs[i] = rep + add;
        used[i] = installs[i] * per_gw;
        op += add + rep - retiring;
        operating[i] = op;
    }
    Ok(MaxCapacityPath {
        cumulative: AnnualSeries::new(first, operating, Unit::Gigawatt)?,
        additions: AnnualSeries::new(first, adds, Unit::GigawattPerYear)?,
        replaced: AnnualSeries::new(first, replaced, Unit::GigawattPerYear)?,
        iridium_available: AnnualSeries::new(first, avail, Unit::TonnePerYear)?,
        iridium_used: AnnualSeries::new(first, used, Unit::TonnePerYear)?,
    })
}

/// Stack parameters for the dissolution-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    pub power_density_w_per_cm2: f64,
    pub capacity_factor: f64,
    /// Share of the loading that may dissolve before end of life.
    pub consumable_fraction: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            power_density_w_per_cm2: 3.0,
            capacity_factor: 0.9,
            consumable_fraction: 1.0,
        }
    }
}

impl CellParams {
    pub fn operating_hours_per_year(&self) -> f64 {
        8760.0 * self.capacity_factor
    }
}

/// Dissolution rate (mg·cm⁻²·h⁻¹) that consumes the permitted share of the
/// anode loading over `tau` years of operation.
pub fn required_dissolution_rate(omega_series: &AnnualSeries, tau: f64, cell: &CellParams) -> Result<AnnualSeries> {
    if omega_series.unit() != Unit::KgPerGigawatt {
        return Err(Error::UnitMismatch {
            left: Unit::KgPerGigawatt,
            right: omega_series.unit(),
        });
    }
    for (name, v) in [
        ("tau", tau),
        ("power_density_w_per_cm2", cell.power_density_w_per_cm2),
        ("capacity_factor", cell.capacity_factor),
        ("consumable_fraction", cell.consumable_fraction),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("{v} must be positive")));
        }
    }
    let hours = tau * cell.operating_hours_per_year();
    Ok(omega_series
        .map(|w| cell.consumable_fraction * (w * 1e-3 * cell.power_density_w_per_cm2) / hours)
        .with_unit(Unit::MgPerCm2Hour))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(v: f64, n: usize) -> AnnualSeries {
        AnnualSeries::new(2024, vec![v; n], Unit::TonnePerYear).unwrap()
    }

    #[test]
    fn single_shortfall_segment() {
        let r = analyze_gap(&c(2.0, 10), &c(1.0, 10), &GapOptions::default()).unwrap();
        assert_eq!(r.segments.len(), 1);
        let s = &r.segments[0];
        assert_eq!((s.start_year, s.end_year, s.kind), (2024, 2033, SegmentKind::Shortfall));
        assert_relative_eq!(s.integral, 10.0);
        assert_relative_eq!(r.stockpile.last(), 1.0 - 10.0);
        assert!(!r.feasible);
    }

    #[test]
    fn balanced_has_no_segments() {
        let r = analyze_gap(&c(1.3, 10), &c(1.3, 10), &GapOptions::default()).unwrap();
        assert!(r.segments.is_empty());
        assert!(r.stockpile.values().iter().all(|&v| v == 1.0));
        assert!(r.feasible);
        assert_eq!(r.required_supply_increase_pct, 0.0);
    }

    #[test]
    fn zero_gap_years_split_segments() {
        let d = AnnualSeries::new(2024, vec![2.0, 1.0, 2.0, 0.5], Unit::TonnePerYear).unwrap();
        let r = analyze_gap(&d, &c(1.0, 4), &GapOptions::default()).unwrap();
        let kinds: Vec<_> = r.segments.iter().map(|s| (s.start_year, s.end_year, s.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (2024, 2024, SegmentKind::Shortfall),
                (2026, 2026, SegmentKind::Shortfall),
                (2027, 2027, SegmentKind::Surplus)
            ]
        );
    }

    #[test]
    fn supply_increase_percentages() {
        // 4.5 t over 8 years against 7.5 t/yr is 7.5%.
        let mut d = vec![4.5 / 8.0; 8];
        d.extend([-1.0; 2]);
        let gap = AnnualSeries::new(2024, d, Unit::TonnePerYear).unwrap();
        let zero = c(0.0, 10);
        let r = analyze_gap(&gap, &zero, &GapOptions::default()).unwrap();
        assert_relative_eq!(r.required_supply_increase_gross_pct, 7.5, max_relative = 1e-12);
        assert_relative_eq!(r.required_supply_increase_pct, 100.0 * 2.5 / 60.0, max_relative = 1e-12);
        let seg = r.shortfall_segments().next().unwrap();
        assert_relative_eq!(r.segment_increase_pct(seg, 7.5), 7.5, max_relative = 1e-12);
    }

    #[test]
    fn unit_mismatch() {
        let s = AnnualSeries::new(2024, vec![1.0], Unit::Tonne).unwrap();
        assert!(analyze_gap(&c(1.0, 1), &s, &GapOptions::default()).is_err());
    }

    #[test]
    fn pgm() {
        assert_relative_eq!(pgm_required(1.0, 0.02).unwrap(), 50.0, max_relative = 1e-12);
        assert_eq!(pgm_required(0.0, 0.02).unwrap(), 0.0);
        assert!(pgm_required(1.0, 0.0).is_err());
        let s = pgm_required_series(&c(2.0, 3), 0.02).unwrap();
        assert_eq!(s.unit(), Unit::TonnePgm);
        assert_relative_eq!(s.first(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn dissolution_rate_formula() {
        let w = AnnualSeries::new(2024, vec![650.0], Unit::KgPerGigawatt).unwrap();
        let r = required_dissolution_rate(&w, 10.0, &CellParams::default()).unwrap();
        assert_relative_eq!(r.first(), 1.95 / 78_840.0, max_relative = 1e-12);
        assert_relative_eq!(r.first(), 2.47e-5, max_relative = 1e-2);
        let r20 = required_dissolution_rate(&w, 20.0, &CellParams::default()).unwrap();
        assert_relative_eq!(r20.first() * 2.0, r.first(), max_relative = 1e-12);
        assert!(required_dissolution_rate(&w, 0.0, &CellParams::default()).is_err());
        let bad = CellParams {
            capacity_factor: -1.0,
            ..Default::default()
        };
        assert!(required_dissolution_rate(&w, 10.0, &bad).is_err());
    }
}
