//! Exogenous inputs of a run: capacity pathways, iridium-specific power
//! density, recycling efficiency, and the [`Scenario`] bundling them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{interpolate_linear, AnnualSeries, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathwayLabel {
    #[serde(rename = "BAU")]
    Bau,
    #[serde(rename = "IEA-NZE")]
    IeaNze,
    Custom,
}

/// Cumulative installed capacity and the implied annual additions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityPathway {
    pub label: PathwayLabel,
    cumulative: AnnualSeries,
    additions: AnnualSeries,
}

impl CapacityPathway {
    /// Builds a pathway from cumulative GW. The first year's addition equals
    /// its cumulative value.
    pub fn from_cumulative(label: PathwayLabel, cumulative: AnnualSeries) -> Result<Self> {
        if cumulative.unit() != Unit::Gigawatt {
            return Err(Error::UnitMismatch {
                left: Unit::Gigawatt,
                right: cumulative.unit(),
            });
        }
        let v = cumulative.values();
        if v[0] < 0.0 {
            return Err(Error::InvalidAnchors(format!(
                "cumulative capacity is negative in {}",
                cumulative.start_year()
            )));
        }
        let mut adds = Vec::with_capacity(v.len());
        adds.push(v[0]);
        for (i, w) in v.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(Error::InvalidAnchors(format!(
                    "cumulative capacity decreases in {}",
                    cumulative.start_year() + i as i32 + 1
                )));
            }
            adds.push(w[1] - w[0]);
        }
        let additions = AnnualSeries::new(cumulative.start_year(), adds, Unit::GigawattPerYear)?;
        Ok(Self {
            label,
            cumulative,
            additions,
        })
    }

    /// Builds a pathway from annual additions (GW/yr); cumulative is their running sum.
    pub fn from_additions(label: PathwayLabel, additions: AnnualSeries) -> Result<Self> {
        if additions.values().iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidAnchors("negative capacity addition".into()));
        }
        let cumulative = additions.cumulative().with_unit(Unit::Gigawatt);
        Ok(Self {
            label,
            cumulative,
            additions: additions.with_unit(Unit::GigawattPerYear),
        })
    }

    pub fn cumulative(&self) -> &AnnualSeries {
        &self.cumulative
    }

    pub fn additions(&self) -> &AnnualSeries {
        &self.additions
    }

    pub fn start_year(&self) -> i32 {
        self.cumulative.start_year()
    }

    pub fn end_year(&self) -> i32 {
        self.cumulative.end_year()
    }

    /// Multiplies every capacity value by `factor` (≥ 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::param("factor", "must be finite and non-negative"));
        }
        Ok(Self {
            label: self.label,
            cumulative: self.cumulative.scale(factor)?,
            additions: self.additions.scale(factor)?,
        })
    }
}

/// How the BAU pathway continues past the last database anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BauExtension {
    /// Straight line in cumulative capacity to the endpoint (constant additions).
    #[default]
    Linear,
    /// Annual additions keep growing linearly from their last database value
    /// so cumulative capacity bends upward and lands on the endpoint.
    AcceleratingAdditions,
}

/// BAU pathway: piecewise-linear through `db_anchors`, then extended to
/// `(end_year, end_value)`.
pub fn build_bau(
    db_anchors: &[(i32, f64)],
    end_value: f64,
    end_year: i32,
    extension: BauExtension,
) -> Result<CapacityPathway> {
    let &(last_year, last_value) = db_anchors
        .last()
        .ok_or_else(|| Error::InvalidAnchors("no database anchors".into()))?;
    if end_value < last_value {
        return Err(Error::InvalidAnchors(format!(
            "end value {end_value} GW is below the last anchor value {last_value} GW"
        )));
    }
    if end_year <= last_year {
        return Err(Error::InvalidAnchors(format!(
            "end year {end_year} must follow the last anchor year {last_year}"
        )));
    }
    let first_year = db_anchors[0].0;
    let cumulative = match extension {
        BauExtension::Linear => {
            let mut anchors = db_anchors.to_vec();
            anchors.push((end_year, end_value));
            interpolate_linear(&anchors, (first_year, end_year), Unit::Gigawatt)?
        }
        BauExtension::AcceleratingAdditions => {
            if db_anchors.len() < 2 {
                return Err(Error::InvalidAnchors(
                    "accelerating extension needs at least 2 database anchors".into(),
                ));
            }
            let db = interpolate_linear(db_anchors, (first_year, last_year), Unit::Gigawatt)?;
            let v = db.values();
            let a_last = v[v.len() - 1] - v[v.len() - 2];
            let n = f64::from(end_year - last_year);
            let growth = (end_value - last_value - n * a_last) / (n * (n + 1.0) / 2.0);
            if a_last + growth * n < 0.0 {
                return Err(Error::InvalidAnchors(
                    "endpoint would require negative additions".into(),
                ));
            }
            let mut values = v.to_vec();
            for k in 1..(end_year - last_year) {
                let k = f64::from(k);
                values.push(last_value + k * a_last + growth * k * (k + 1.0) / 2.0);
            }
            values.push(end_value);
            AnnualSeries::new(first_year, values, Unit::Gigawatt)?
        }
    };
    CapacityPathway::from_cumulative(PathwayLabel::Bau, cumulative)
}

/// NZE pathway: `pemel_share` of the interpolated total electrolyzer market.
pub fn build_nze(total_market_anchors: &[(i32, f64)], pemel_share: f64) -> Result<CapacityPathway> {
    if !(pemel_share > 0.0 && pemel_share <= 1.0) {
        return Err(Error::param("pemel_share", format!("{pemel_share} not in (0, 1]")));
    }
    if total_market_anchors.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err(Error::InvalidAnchors("total-market anchors must be non-decreasing".into()));
    }
    let (first, last) = match (total_market_anchors.first(), total_market_anchors.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::InvalidAnchors("no anchors".into())),
    };
    let total = interpolate_linear(total_market_anchors, (first, last), Unit::Gigawatt)?;
    let cumulative = total.map(|v| pemel_share * v);
    CapacityPathway::from_cumulative(PathwayLabel::IeaNze, cumulative)
}

/// Exponentially decaying iridium-specific power density in kg/GW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaTrajectory {
    pub omega_start: f64,
    pub omega_floor: f64,
    pub decay_rate: f64,
    pub start_year: i32,
}

impl OmegaTrajectory {
    pub fn new(omega_start: f64, omega_floor: f64, decay_rate: f64, start_year: i32) -> Result<Self> {
        if !(omega_floor > 0.0 && omega_floor.is_finite()) {
            return Err(Error::param("omega_floor", "must be positive"));
        }
        if !(omega_start >= omega_floor && omega_start.is_finite()) {
            return Err(Error::param("omega_start", "must be at least omega_floor"));
        }
        if !(decay_rate >= 0.0 && decay_rate.is_finite()) {
            return Err(Error::param("decay_rate", "must be non-negative"));
        }
        Ok(Self {
            omega_start,
            omega_floor,
            decay_rate,
            start_year,
        })
    }

    /// Constant power density.
    pub fn constant(omega: f64, start_year: i32) -> Result<Self> {
        Self::new(omega, omega, 0.0, start_year)
    }

    pub fn at(&self, year: i32) -> Result<f64> {
        if year < self.start_year {
            return Err(Error::param(
                "year",
                format!("{year} is before the trajectory start {}", self.start_year),
            ));
        }
        Ok(self.eval(year))
    }

    fn eval(&self, year: i32) -> f64 {
        let t = f64::from(year - self.start_year);
        self.omega_floor + (self.omega_start - self.omega_floor) * (-self.decay_rate * t).exp()
    }

    pub fn series(&self, first: i32, last: i32) -> Result<AnnualSeries> {
        self.at(first)?;
        AnnualSeries::from_fn(first, last, Unit::KgPerGigawatt, |y| self.eval(y))
    }
}

/// Recycling efficiency rising linearly from `gamma_start` at `start_year`
/// to `gamma_end` at `ramp_end_year`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecyclingRamp {
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub start_year: i32,
    pub ramp_end_year: i32,
}

impl RecyclingRamp {
    pub fn new(gamma_start: f64, gamma_end: f64, start_year: i32, ramp_end_year: i32) -> Result<Self> {
        if !(gamma_start > 0.0 && gamma_start <= gamma_end && gamma_end <= 0.99) {
            return Err(Error::param(
                "gamma",
                format!("need 0 < start ({gamma_start}) <= end ({gamma_end}) <= 0.99"),
            ));
        }
        if ramp_end_year < start_year || (ramp_end_year == start_year && gamma_start != gamma_end) {
            return Err(Error::param("ramp_end_year", "must follow start_year"));
        }
        Ok(Self {
            gamma_start,
            gamma_end,
            start_year,
            ramp_end_year,
        })
    }

    /// Flat efficiency anywhere in `[0, 1]`, for counterfactual runs such as
    /// no recycling or lossless recycling.
    pub fn constant(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} not in [0, 1]")));
        }
        Ok(Self {
            gamma_start: gamma,
            gamma_end: gamma,
            start_year: i32::MIN,
            ramp_end_year: i32::MIN,
        })
    }

    pub fn at(&self, year: i32) -> f64 {
        if year >= self.ramp_end_year {
            self.gamma_end
        } else if year <= self.start_year {
            self.gamma_start
        } else {
            let frac = f64::from(year - self.start_year) / f64::from(self.ramp_end_year - self.start_year);
            self.gamma_start + (self.gamma_end - self.gamma_start) * frac
        }
    }

    pub fn series(&self, first: i32, last: i32) -> Result<AnnualSeries> {
        AnnualSeries::from_fn(first, last, Unit::Fraction, |y| self.at(y))
    }

    pub fn is_constant(&self) -> bool {
        self.gamma_start == self.gamma_end
    }
}

/// Shape of the stack-lifetime distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LifetimeShape {
    /// Normal with σ = τ/3 truncated to `[1, 2τ]`, binned to integer years.
    #[default]
    TruncatedNormal,
    /// Every unit lives exactly τ years.
    PointMass,
}

/// Full parameterization of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub id: String,
    pub pathway: CapacityPathway,
    pub omega: OmegaTrajectory,
    pub gamma: RecyclingRamp,
    /// Mean stack lifetime τ in years.
    pub tau_mean: f64,
    pub lifetime_shape: LifetimeShape,
    pub unit_size_mw: f64,
    pub horizon: (i32, i32),
    pub seed: u64,
    /// Physical units represented by one simulated unit.
    pub mc_subsample: u32,
    /// Years between retirement and the recycled iridium becoming available.
    pub recycling_lag: u32,
}

impl Scenario {
    /// Scenario with 1 MW units, seed 0, no subsampling and the pathway's full
    /// year range as horizon.
    pub fn new(
        id: impl Into<String>,
        pathway: CapacityPathway,
        omega: OmegaTrajectory,
        gamma: RecyclingRamp,
        tau_mean: f64,
    ) -> Result<Self> {
        let horizon = (pathway.start_year(), pathway.end_year());
        let s = Self {
            id: id.into(),
            pathway,
            omega,
            gamma,
            tau_mean,
            lifetime_shape: LifetimeShape::TruncatedNormal,
            unit_size_mw: 1.0,
            horizon,
            seed: 0,
            mc_subsample: 1,
            recycling_lag: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=40.0).contains(&self.tau_mean) {
            return Err(Error::param("tau_mean", format!("{} not in [1, 40]", self.tau_mean)));
        }
        if self.lifetime_shape == LifetimeShape::PointMass && self.tau_mean.fract() != 0.0 {
            return Err(Error::param("tau_mean", "point-mass lifetime needs an integer τ"));
        }
        if !(self.unit_size_mw > 0.0 && self.unit_size_mw.is_finite()) {
            return Err(Error::param("unit_size_mw", "must be positive"));
        }
        if self.mc_subsample == 0 {
            return Err(Error::param("mc_subsample", "must be at least 1"));
        }
        let (a, b) = self.horizon;
        if b - a < 1 {
            return Err(Error::param("horizon", format!("{a}..={b} spans fewer than 2 years")));
        }
        if a < self.pathway.start_year() || b > self.pathway.end_year() {
            return Err(Error::param(
                "horizon",
                format!(
                    "{a}..={b} outside pathway coverage {}..={}",
                    self.pathway.start_year(),
                    self.pathway.end_year()
                ),
            ));
        }
        if a < self.omega.start_year {
            return Err(Error::param("horizon", "starts before the omega trajectory"));
        }
        Ok(())
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.horizon.0..=self.horizon.1
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self {
            tau_mean: tau,
            ..self.clone()
        }
    }

    pub fn with_gamma(&self, gamma: RecyclingRamp) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}
