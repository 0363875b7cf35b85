//! Iridium available for electrolysis: constant primary supply minus the
//! damped-trend forecasts of competing sectors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{AnnualSeries, Unit};

/// Minimum number of observations for a fit.
pub const MIN_HISTORY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Electrical,
    Electrochemical,
    Chemical,
    Other,
}

impl Sector {
    pub const ALL: [Sector; 4] = [Sector::Electrical, Sector::Electrochemical, Sector::Chemical, Sector::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Electrical => "electrical",
            Sector::Electrochemical => "electrochemical",
            Sector::Chemical => "chemical",
            Sector::Other => "other",
        }
    }

    /// Sectors whose demand is forecast rather than held flat.
    pub fn is_price_responsive(self) -> bool {
        matches!(self, Sector::Electrical | Sector::Other)
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Sector::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::param("sector", format!("unknown sector `{s}`")))
    }
}

/// Historical sector demand (t/yr) and the shared iridium price (EUR/kg).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct History {
    pub sectors: BTreeMap<Sector, AnnualSeries>,
    pub price: AnnualSeries,
}

impl History {
    pub fn new(sectors: BTreeMap<Sector, AnnualSeries>, price: AnnualSeries) -> Result<Self> {
        for s in Sector::ALL {
            let d = sectors.get(&s).ok_or_else(|| Error::MissingSector(s.to_string()))?;
            if d.len() < MIN_HISTORY {
                return Err(Error::HistoryTooShort {
                    got: d.len(),
                    need: MIN_HISTORY,
                });
            }
            if d.start_year() != price.start_year() || d.end_year() != price.end_year() {
                return Err(Error::param("history", format!("sector `{s}` years differ from price years")));
            }
            if d.unit() != Unit::TonnePerYear {
                return Err(Error::UnitMismatch {
                    left: Unit::TonnePerYear,
                    right: d.unit(),
                });
            }
            if let Some((y, v)) = d.iter().find(|(_, v)| *v < 0.0) {
                return Err(Error::param("demand_t", format!("negative demand {v} for `{s}` in {y}")));
            }
        }
        if price.unit() != Unit::EuroPerKg {
            return Err(Error::UnitMismatch {
                left: Unit::EuroPerKg,
                right: price.unit(),
            });
        }
        Ok(Self { sectors, price })
    }

    pub fn sector(&self, s: Sector) -> &AnnualSeries {
        &self.sectors[&s]
    }

    pub fn first_year(&self) -> i32 {
        self.price.start_year()
    }

    pub fn last_year(&self) -> i32 {
        self.price.end_year()
    }
}

/// Fitted damped-trend exponential smoothing state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampedTrendModel {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub level: f64,
    pub trend: f64,
    pub fitted_sse: f64,
    /// Year of the last observation; forecasts start the year after.
    pub last_year: i32,
    pub unit: Unit,
}

struct Smoothed {
    level: f64,
    trend: f64,
    sse: f64,
}

/// Damped-trend recursions from `level = y0`, `trend = y1 - y0`, accumulating
/// one-step-ahead squared errors over `y[1..]`.
fn smooth(y: &[f64], alpha: f64, beta: f64, phi: f64) -> Smoothed {
    let mut level = y[0];
    let mut trend = y[1] - y[0];
    let mut sse = 0.0;
    for &obs in &y[1..] {
        let fc = level + phi * trend;
        let e = obs - fc;
        sse += e * e;
        let new_level = alpha * obs + (1.0 - alpha) * fc;
        trend = beta * (new_level - level) + (1.0 - beta) * phi * trend;
        level = new_level;
    }
    Smoothed { level, trend, sse }
}

fn check_history(history: &AnnualSeries, phi: f64) -> Result<()> {
    if history.len() < MIN_HISTORY {
        return Err(Error::HistoryTooShort {
            got: history.len(),
            need: MIN_HISTORY,
        });
    }
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::param("phi", format!("{phi} not in (0, 1]")));
    }
    Ok(())
}

/// Smooths `history` with fixed parameters.
pub fn damped_trend_with(history: &AnnualSeries, alpha: f64, beta: f64, phi: f64) -> Result<DampedTrendModel> {
    check_history(history, phi)?;
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::param(name, format!("{v} not in (0, 1]")));
        }
    }
    let s = smooth(history.values(), alpha, beta, phi);
    Ok(DampedTrendModel {
        alpha,
        beta,
        phi,
        level: s.level,
        trend: s.trend,
        fitted_sse: s.sse,
        last_year: history.end_year(),
        unit: history.unit(),
    })
}

/// Holt's linear method: the damped recursion with φ = 1.
pub fn holt_linear(history: &AnnualSeries, alpha: f64, beta: f64) -> Result<DampedTrendModel> {
    damped_trend_with(history, alpha, beta, 1.0)
}

/// Fits α and β on the 0.01 lattice of `(0, 1]` by minimum one-step SSE.
/// Ties go to the smaller α, then the smaller β.
pub fn fit_damped_trend(history: &AnnualSeries, phi: f64) -> Result<DampedTrendModel> {
    check_history(history, phi)?;
    let y = history.values();
    let mut best: Option<(f64, f64, f64, Smoothed)> = None;
    for ai in 1..=100 {
        let alpha = f64::from(ai) / 100.0;
        for bi in 1..=100 {
            let beta = f64::from(bi) / 100.0;
            let s = smooth(y, alpha, beta, phi);
            if best.as_ref().is_none_or(|b| s.sse < b.0) {
                best = Some((s.sse, alpha, beta, s));
            }
        }
    }
    let (sse, alpha, beta, s) = best.expect("lattice is non-empty");
    if !(s.level.is_finite() && s.trend.is_finite()) {
        return Err(Error::NonFinite {
            year: history.end_year(),
            value: s.level,
        });
    }
    Ok(DampedTrendModel {
        alpha,
        beta,
        phi,
        level: s.level,
        trend: s.trend,
        fitted_sse: sse,
        last_year: history.end_year(),
        unit: history.unit(),
    })
}

impl DampedTrendModel {
    /// `level + (φ + φ² + … + φ^h)·trend`.
    pub fn forecast_at(&self, h: u32) -> f64 {
        let mut damp = 0.0;
        let mut pow = 1.0;
        for _ in 0..h {
            pow *= self.phi;
            damp += pow;
        }
        self.level + damp * self.trend
    }

    /// Limit of the forecast as h → ∞ (infinite unless φ < 1 or trend = 0).
    pub fn forecast_limit(&self) -> f64 {
        if self.trend == 0.0 {
            self.level
        } else if self.phi < 1.0 {
            self.level + self.trend * self.phi / (1.0 - self.phi)
        } else {
            self.trend.signum() * f64::INFINITY
        }
    }
}

/// Forecasts for the `h` years after the last observation.
pub fn forecast(model: &DampedTrendModel, h: i32) -> Result<AnnualSeries> {
    if h < 1 {
        return Err(Error::param("h", format!("horizon {h} must be at least 1")));
    }
    let mut damp = 0.0;
    let mut pow = 1.0;
    let values = (0..h)
        .map(|_| {
            pow *= model.phi;
            damp += pow;
            model.level + damp * model.trend
        })
        .collect();
    AnnualSeries::new(model.last_year + 1, values, model.unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupplyVariant {
    Strong,
    Weak,
}

impl SupplyVariant {
    pub const ALL: [SupplyVariant; 2] = [SupplyVariant::Strong, SupplyVariant::Weak];

    /// Damping factor: faster price growth (φ = 0.9) means a faster decline of
    /// competing demand and therefore strong supply.
    pub fn phi(self) -> f64 {
        match self {
            SupplyVariant::Strong => 0.9,
            SupplyVariant::Weak => 0.8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SupplyVariant::Strong => "strong",
            SupplyVariant::Weak => "weak",
        }
    }
}

impl fmt::Display for SupplyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SupplyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(SupplyVariant::Strong),
            "weak" => Ok(SupplyVariant::Weak),
            other => Err(Error::param("variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// Text recorded in outputs describing how supply is derived.
pub const SUPPLY_ASSUMPTION: &str = "sector demands of electrical and other are damped-trend forecasts \
(phi 0.9 strong, 0.8 weak) floored at 0 and capped at their last observation; chemical and \
electrochemical are held at their last observation; price is forecast alongside but not coupled";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupplyOptions {
    /// Primary iridium supply, t/yr.
    pub primary: f64,
    pub horizon: (i32, i32),
}

impl Default for SupplyOptions {
    fn default() -> Self {
        Self {
            primary: 7.5,
            horizon: (2024, 2050),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupplyProjection {
    pub variant: SupplyVariant,
    pub phi: f64,
    pub primary: AnnualSeries,
    pub sector_forecasts: BTreeMap<Sector, AnnualSeries>,
    pub available_for_pemel: AnnualSeries,
    pub price_forecast: AnnualSeries,
    pub models: BTreeMap<Sector, DampedTrendModel>,
    pub price_model: DampedTrendModel,
}

pub fn project_supply(history: &History, variant: SupplyVariant, opts: &SupplyOptions) -> Result<SupplyProjection> {
    let (first, last) = opts.horizon;
    if first <= history.last_year() {
        return Err(Error::param(
            "horizon",
            format!("starts in {first}, not after the history end {}", history.last_year()),
        ));
    }
    if last < first {
        return Err(Error::param("horizon", "end precedes start"));
    }
    if !(opts.primary >= 0.0 && opts.primary.is_finite()) {
        return Err(Error::param("primary", "must be finite and non-negative"));
    }
    let phi = variant.phi();
    let h = last - history.last_year();
    let mut sector_forecasts = BTreeMap::new();
    let mut models = BTreeMap::new();
    for s in Sector::ALL {
        let hist = history.sector(s);
        let cap = hist.last();
        let f = if s.is_price_responsive() {
            let m = fit_damped_trend(hist, phi)?;
            models.insert(s, m);
            forecast(&m, h)?.map(|v| v.clamp(0.0, cap))
        } else {
            AnnualSeries::constant(history.last_year() + 1, last, cap, Unit::TonnePerYear)?
        };
        sector_forecasts.insert(s, f.slice(first, last)?);
    }
    let price_model = fit_damped_trend(&history.price, phi)?;
    let price_forecast = forecast(&price_model, h)?.map(|v| v.max(0.0)).slice(first, last)?;
    let primary = AnnualSeries::constant(first, last, opts.primary, Unit::TonnePerYear)?;
    let available_for_pemel = AnnualSeries::from_fn(first, last, Unit::TonnePerYear, |y| {
        let used: f64 = sector_forecasts.values().map(|f| f.at(y).expect("same range")).sum();
        (opts.primary - used).max(0.0)
    })?;
    Ok(SupplyProjection {
        variant,
        phi,
        primary,
        sector_forecasts,
        available_for_pemel,
        price_forecast,
        models,
        price_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(v: &[f64]) -> AnnualSeries {
        AnnualSeries::new(2014, v.to_vec(), Unit::TonnePerYear).unwrap()
    }

    #[test]
    fn constant_history_gives_flat_forecast() {
        let m = fit_damped_trend(&series(&[5.0; 5]), 0.9).unwrap();
        assert_eq!(m.trend, 0.0);
        let f = forecast(&m, 30).unwrap();
        assert!(f.values().iter().all(|&v| v == 5.0));
        assert_eq!(f.start_year(), 2019);
    }

    #[test]
    fn linear_history_phi_one_continues_line() {
        let m = fit_damped_trend(&series(&[1.0, 3.0, 5.0, 7.0, 9.0, 11.0]), 1.0).unwrap();
        let f = forecast(&m, 5).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            assert_relative_eq!(*v, 13.0 + 2.0 * i as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn frozen_state_forecasts() {
        let m = DampedTrendModel {
            alpha: 0.5,
            beta: 0.5,
            phi: 0.8,
            level: 100.0,
            trend: 10.0,
            fitted_sse: 0.0,
            last_year: 2023,
            unit: Unit::EuroPerKg,
        };
        assert_relative_eq!(forecast(&m, 2).unwrap().at(2025).unwrap(), 114.4, max_relative = 1e-12);
        assert_relative_eq!(m.forecast_at(500), 140.0, epsilon = 1e-9);
        assert_relative_eq!(m.forecast_limit(), 140.0, max_relative = 1e-12);
        let m9 = DampedTrendModel { phi: 0.9, ..m };
        assert!(m9.forecast_at(20) > m.forecast_at(20));
        let zero = DampedTrendModel { trend: 0.0, ..m };
        assert!(forecast(&zero, 10).unwrap().values().iter().all(|&v| v == 100.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_damped_trend(&series(&[1.0, 2.0, 3.0, 4.0]), 0.9),
            Err(Error::HistoryTooShort { got: 4, need: 5 })
        ));
        assert!(fit_damped_trend(&series(&[1.0; 6]), 0.0).is_err());
        assert!(fit_damped_trend(&series(&[1.0; 6]), 1.1).is_err());
        let m = fit_damped_trend(&series(&[1.0; 6]), 0.9).unwrap();
        assert!(forecast(&m, 0).is_err());
    }

    #[test]
    fn grid_tie_breaks_to_smallest() {
        // Constant data has zero SSE everywhere, so the first lattice point wins.
        let m = fit_damped_trend(&series(&[2.0; 8]), 0.85).unwrap();
        assert_eq!((m.alpha, m.beta), (0.01, 0.01));
    }

    fn flat_history(values: [f64; 4]) -> History {
        let mut sectors = BTreeMap::new();
        for (s, v) in Sector::ALL.into_iter().zip(values) {
            sectors.insert(s, AnnualSeries::constant(2014, 2023, v, Unit::TonnePerYear).unwrap());
        }
        let price = AnnualSeries::constant(2014, 2023, 20_000.0, Unit::EuroPerKg).unwrap();
        History::new(sectors, price).unwrap()
    }

    #[test]
    fn constant_sectors_leave_constant_supply() {
        let h = flat_history([2.0, 1.5, 1.0, 2.0]);
        for v in SupplyVariant::ALL {
            let p = project_supply(&h, v, &SupplyOptions::default()).unwrap();
            assert_eq!(p.available_for_pemel.len(), 27);
            for &a in p.available_for_pemel.values() {
                assert_relative_eq!(a, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn horizon_must_follow_history() {
        let h = flat_history([2.0, 1.5, 1.0, 2.0]);
        let opts = SupplyOptions {
            horizon: (2023, 2050),
            ..Default::default()
        };
        assert!(project_supply(&h, SupplyVariant::Strong, &opts).is_err());
    }

    #[test]
    fn missing_sector_rejected() {
        let mut sectors = BTreeMap::new();
        sectors.insert(Sector::Electrical, AnnualSeries::constant(2014, 2023, 1.0, Unit::TonnePerYear).unwrap());
        let price = AnnualSeries::constant(2014, 2023, 1.0, Unit::EuroPerKg).unwrap();
        assert!(matches!(History::new(sectors, price), Err(Error::MissingSector(_))));
    }
}
