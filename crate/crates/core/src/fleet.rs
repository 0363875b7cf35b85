//! Cohort fleet simulation: install, retire, replace, recycle.
//!
//! Two engines share one discrete lifetime distribution. The Monte Carlo
//! engine follows individual units; the expected-value engine propagates the
//! renewal recursion `retirements[i] = Σ_k installs[i-k]·pmf(k)` exactly.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scenario::{LifetimeShape, Scenario};
use crate::series::{AnnualSeries, Unit};

/// Algorithm tag written to run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Normal lifetime with σ = τ/3 truncated to `[1, 2τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeDistribution {
    pub mean: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl LifetimeDistribution {
    pub fn new(tau: f64) -> Result<Self> {
        if !(1.0..=40.0).contains(&tau) {
            return Err(Error::param("tau_mean", format!("{tau} not in [1, 40]")));
        }
        Ok(Self {
            mean: tau,
            sigma: tau / 3.0,
            lower: 1.0,
            upper: 2.0 * tau,
        })
    }

    /// Normal density integrated over `[k-0.5, k+0.5] ∩ [lower, upper]` for
    /// every integer `k` in the bounds, then normalized.
    pub fn pmf(&self) -> LifetimePmf {
        let normal = Normal::new(self.mean, self.sigma).expect("sigma is positive");
        let first = self.lower.ceil() as u32;
        let last = self.upper.floor() as u32;
        let weights: Vec<f64> = (first..=last)
            .map(|k| {
                let a = (f64::from(k) - 0.5).max(self.lower);
                let b = (f64::from(k) + 0.5).min(self.upper);
                if b <= a {
                    0.0
                } else if a >= self.mean {
                    normal.sf(a) - normal.sf(b)
                } else {
                    normal.cdf(b) - normal.cdf(a)
                }
            })
            .collect();
        LifetimePmf::from_weights(first, weights)
    }
}

/// Lifetime model used by the engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Lifetime {
    TruncatedNormal(LifetimeDistribution),
    PointMass(u32),
}

impl Lifetime {
    pub fn for_scenario(s: &Scenario) -> Result<Self> {
        match s.lifetime_shape {
            LifetimeShape::TruncatedNormal => Ok(Lifetime::TruncatedNormal(LifetimeDistribution::new(s.tau_mean)?)),
            LifetimeShape::PointMass => {
                if s.tau_mean.fract() != 0.0 || s.tau_mean < 1.0 {
                    return Err(Error::param("tau_mean", "point-mass lifetime needs an integer τ ≥ 1"));
                }
                Ok(Lifetime::PointMass(s.tau_mean as u32))
            }
        }
    }

    pub fn pmf(&self) -> LifetimePmf {
        match *self {
            Lifetime::TruncatedNormal(d) => d.pmf(),
            Lifetime::PointMass(k) => LifetimePmf::from_weights(k, vec![1.0]),
        }
    }
}

/// Probability mass over integer lifetimes `first..first+len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimePmf {
    first: u32,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl LifetimePmf {
    fn from_weights(first: u32, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { first, probs, cdf }
    }

    pub fn min_lifetime(&self) -> u32 {
        self.first
    }

    pub fn max_lifetime(&self) -> u32 {
        self.first + self.probs.len() as u32 - 1
    }

    /// Probability of lifetime `k` years (0 outside the support).
    pub fn get(&self, k: u32) -> f64 {
        if k < self.first {
            return 0.0;
        }
        self.probs.get((k - self.first) as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.first + i as u32, p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| f64::from(k) * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(k, p)| (f64::from(k) - m).powi(2) * p).sum()
    }

    /// Inverse-CDF draw from the discrete distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1);
        self.first + idx as u32
    }
}

/// Samples one integer lifetime.
pub fn sample_lifetime<R: Rng + ?Sized>(dist: &LifetimeDistribution, rng: &mut R) -> u32 {
    dist.pmf().sample(rng)
}

pub fn lifetime_pmf(dist: &LifetimeDistribution) -> LifetimePmf {
    dist.pmf()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Mc,
    Expected,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Mc => "mc",
            Engine::Expected => "expected",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Engine::Mc),
            "expected" => Ok(Engine::Expected),
            other => Err(Error::param("engine", format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CohortOrigin {
    Expansion,
    Replacement,
}

/// Capacity installed in one year by one origin, with its expected
/// retirement schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cohort {
    pub install_year: i32,
    pub capacity: f64,
    /// ω at the install year, kg/GW.
    pub loading: f64,
    pub origin: CohortOrigin,
    pub retirement_profile: Vec<(i32, f64)>,
}

impl Cohort {
    pub fn new(install_year: i32, capacity: f64, loading: f64, origin: CohortOrigin, pmf: &LifetimePmf) -> Self {
        let retirement_profile = pmf
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| (install_year + k as i32, capacity * p))
            .collect();
        Self {
            install_year,
            capacity,
            loading,
            origin,
            retirement_profile,
        }
    }

    /// Iridium contained in the cohort, t.
    pub fn contained_mass(&self) -> f64 {
        self.capacity * self.loading / 1000.0
    }
}

/// Per-year demand decomposition of one run. Flows in t/yr, capacity in GW.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandBreakdown {
    pub engine: Engine,
    pub m_cap: AnnualSeries,
    pub m_eol: AnnualSeries,
    /// Gross recycled iridium credited in each year.
    pub m_recycling: AnnualSeries,
    pub m_total: AnnualSeries,
    pub surplus_recycled: AnnualSeries,
    pub operating_capacity: AnnualSeries,
    pub replacement_capacity: AnnualSeries,
    /// Simulated units (MC engine only).
    pub simulated_units: Option<u64>,
    pub warnings: Vec<String>,
}

/// Horizon sums used by the mass-balance checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassBalance {
    pub inflow: f64,
    pub total: f64,
    pub recycling: f64,
    pub surplus: f64,
}

impl MassBalance {
    /// Relative residual of `Σ(cap+eol) + Σ surplus = Σ total + Σ recycling`.
    pub fn residual(&self) -> f64 {
        let lhs = self.inflow + self.surplus;
        let rhs = self.total + self.recycling;
        (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
    }

    /// Relative residual of `Σ(cap+eol) = Σ total + Σ recycling + Σ surplus`.
    /// Agrees with [`MassBalance::residual`] only when no surplus occurs.
    pub fn literal_residual(&self) -> f64 {
        let rhs = self.total + self.recycling + self.surplus;
        (self.inflow - rhs).abs() / self.inflow.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

impl DemandBreakdown {
    pub fn mass_balance(&self) -> MassBalance {
        MassBalance {
            inflow: self.m_cap.sum() + self.m_eol.sum(),
            total: self.m_total.sum(),
            recycling: self.m_recycling.sum(),
            surplus: self.surplus_recycled.sum(),
        }
    }

    pub fn cumulative_demand(&self) -> f64 {
        self.m_total.sum()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.m_total.years()
    }
}

struct Inputs {
    start: i32,
    additions: Vec<f64>,
    omega: Vec<f64>,
    gamma: Vec<f64>,
    pmf: LifetimePmf,
    lag: usize,
}

fn prepare(s: &Scenario) -> Result<Inputs> {
    s.validate()?;
    let start = s.pathway.start_year();
    let end = s.horizon.1;
    let additions = s.pathway.additions().slice(start, end)?.values().to_vec();
    let omega = s.omega.series(start, end)?;
    let gamma = s.gamma.series(start, end)?;
    Ok(Inputs {
        start,
        additions,
        omega: omega.values().to_vec(),
        gamma: gamma.values().to_vec(),
        pmf: Lifetime::for_scenario(s)?.pmf(),
        lag: s.recycling_lag as usize,
    })
}

struct Flows {
    cap_mass: Vec<f64>,
    eol_mass: Vec<f64>,
    retired_mass: Vec<f64>,
    operating: Vec<f64>,
    replaced: Vec<f64>,
}

fn assemble(
    s: &Scenario,
    inp: &Inputs,
    f: Flows,
    engine: Engine,
    simulated_units: Option<u64>,
    warnings: Vec<String>,
) -> Result<DemandBreakdown> {
    let n = inp.additions.len();
    let mut rec = vec![0.0; n];
    for i in inp.lag..n {
        rec[i] = f.retired_mass[i - inp.lag] * inp.gamma[i];
    }
    let mut total = vec![0.0; n];
    let mut surplus = vec![0.0; n];
    for i in 0..n {
        let raw = f.cap_mass[i] + f.eol_mass[i] - rec[i];
        if raw >= 0.0 {
            total[i] = raw;
        } else {
            surplus[i] = -raw;
        }
    }
    let (a, b) = s.horizon;
    let mk = |v: Vec<f64>, unit: Unit| -> Result<AnnualSeries> {
        AnnualSeries::new(inp.start, v, unit)?.slice(a, b)
    };
    Ok(DemandBreakdown {
        engine,
        m_cap: mk(f.cap_mass, Unit::TonnePerYear)?,
        m_eol: mk(f.eol_mass, Unit::TonnePerYear)?,
        m_recycling: mk(rec, Unit::TonnePerYear)?,
        m_total: mk(total, Unit::TonnePerYear)?,
        surplus_recycled: mk(surplus, Unit::TonnePerYear)?,
        operating_capacity: mk(f.operating, Unit::Gigawatt)?,
        replacement_capacity: mk(f.replaced, Unit::GigawattPerYear)?,
        simulated_units,
        warnings,
    })
}

/// Deterministic expected-value engine (renewal convolution).
pub fn simulate_fleet_expected(s: &Scenario) -> Result<DemandBreakdown> {
    let inp = prepare(s)?;
    let n = inp.additions.len();
    let mut installs = vec![0.0; n];
    let mut replaced = vec![0.0; n];
    let mut retired_mass = vec![0.0; n];
    for i in 0..n {
        let mut r = 0.0;
        let mut rm = 0.0;
        for (k, p) in inp.pmf.iter() {
            let k = k as usize;
            if k > i {
                break;
            }
            let j = i - k;
            r += installs[j] * p;
            rm += installs[j] * inp.omega[j] * p;
        }
        replaced[i] = r;
        retired_mass[i] = rm / 1000.0;
        installs[i] = inp.additions[i] + r;
    }
    let mut acc = 0.0;
    let operating = inp
        .additions
        .iter()
        .map(|a| {
            acc += a;
            acc
        })
        .collect();
    let flows = Flows {
        cap_mass: (0..n).map(|i| inp.additions[i] * inp.omega[i] / 1000.0).collect(),
        eol_mass: (0..n).map(|i| replaced[i] * inp.omega[i] / 1000.0).collect(),
        retired_mass,
        operating,
        replaced,
    };
    assemble(s, &inp, flows, Engine::Expected, None, Vec::new())
}

/// Monte Carlo engine. Each simulated unit is `unit_size_mw · mc_subsample`
/// MW; fractional units are carried into the next year.
pub fn simulate_fleet_mc(s: &Scenario) -> Result<DemandBreakdown> {
    let inp = prepare(s)?;
    let n = inp.additions.len();
    let unit_gw = s.unit_size_mw * f64::from(s.mc_subsample) / 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    // retiring[r * n + j]: units installed in year j retiring in year r.
    let mut retiring = vec![0u64; n * n];
    let mut carry = 0.0;
    let mut warnings = Vec::new();
    let mut units_total = 0u64;
    let mut expansion_units = vec![0u64; n];
    let mut replacement_units = vec![0u64; n];
    let mut retired_mass = vec![0.0; n];
    for i in 0..n {
        let target = inp.additions[i] / unit_gw + carry;
        let n_exp = target.round().max(0.0);
        carry = target - n_exp;
        let n_exp = n_exp as u64;
        if inp.additions[i] > 0.0 && n_exp == 0 {
            warnings.push(format!(
                "{}: addition of {:.6} GW rounds to zero units; residual {:.6} units carried forward",
                inp.start + i as i32,
                inp.additions[i],
                carry
            ));
        }
        let row = &retiring[i * n..(i + 1) * n];
        let n_rep: u64 = row.iter().sum();
        retired_mass[i] = row
            .iter()
            .zip(&inp.omega)
            .map(|(&c, &w)| c as f64 * unit_gw * w)
            .sum::<f64>()
            / 1000.0;
        expansion_units[i] = n_exp;
        replacement_units[i] = n_rep;
        let installs = n_exp + n_rep;
        units_total += installs;
        for _ in 0..installs {
            let r = i + inp.pmf.sample(&mut rng) as usize;
            if r < n {
                retiring[r * n + i] += 1;
            }
        }
    }
    let mut acc = 0u64;
    let operating = expansion_units
        .iter()
        .map(|&e| {
            acc += e;
            acc as f64 * unit_gw
        })
        .collect();
    let flows = Flows {
        cap_mass: (0..n)
            .map(|i| expansion_units[i] as f64 * unit_gw * inp.omega[i] / 1000.0)
            .collect(),
        eol_mass: (0..n)
            .map(|i| replacement_units[i] as f64 * unit_gw * inp.omega[i] / 1000.0)
            .collect(),
        retired_mass,
        operating,
        replaced: replacement_units.iter().map(|&r| r as f64 * unit_gw).collect(),
    };
    assemble(s, &inp, flows, Engine::Mc, Some(units_total), warnings)
}

pub fn simulate(s: &Scenario, engine: Engine) -> Result<DemandBreakdown> {
    match engine {
        Engine::Mc => simulate_fleet_mc(s),
        Engine::Expected => simulate_fleet_expected(s),
    }
}

/// Expansion and replacement cohorts of the expected-value engine, in
/// install-year order.
pub fn expected_cohorts(s: &Scenario) -> Result<Vec<Cohort>> {
    let d = simulate_fleet_expected(s)?;
    let pmf = Lifetime::for_scenario(s)?.pmf();
    let mut out = Vec::new();
    for (year, add) in s.pathway.additions().iter().filter(|(y, _)| *y <= s.horizon.1) {
        let loading = s.omega.at(year)?;
        out.push(Cohort::new(year, add, loading, CohortOrigin::Expansion, &pmf));
        if d.replacement_capacity.contains_year(year) {
            let rep = d.replacement_capacity.at(year)?;
            if rep > 0.0 {
                out.push(Cohort::new(year, rep, loading, CohortOrigin::Replacement, &pmf));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_nze, OmegaTrajectory, RecyclingRamp};
    use approx::assert_relative_eq;

    #[test]
    fn pmf_support_and_normalization() {
        for tau in [1.0, 2.5, 6.0, 10.0, 20.0, 40.0] {
            let p = LifetimeDistribution::new(tau).unwrap().pmf();
            assert_eq!(p.min_lifetime(), 1);
            assert_eq!(p.max_lifetime(), (2.0 * tau).floor() as u32);
            let s: f64 = p.iter().map(|(_, q)| q).sum();
            assert!((s - 1.0).abs() <= 1e-12, "tau {tau}: sum {s}");
        }
    }

    #[test]
    fn pmf_mode_and_interior_symmetry() {
        let p = LifetimeDistribution::new(10.0).unwrap().pmf();
        let mode = p.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(mode, 10);
        for j in 1..=8 {
            assert!((p.get(10 - j) - p.get(10 + j)).abs() <= 1e-12, "pair {j}");
        }
    }

    #[test]
    fn point_mass_pmf() {
        let p = Lifetime::PointMass(7).pmf();
        assert_eq!(p.get(7), 1.0);
        assert_eq!(p.mean(), 7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| p.sample(&mut rng) == 7));
    }

    #[test]
    fn samples_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d10 = LifetimeDistribution::new(10.0).unwrap();
        let p10 = d10.pmf();
        assert!((0..100_000).all(|_| (1..=20).contains(&p10.sample(&mut rng))));
        let p1 = LifetimeDistribution::new(1.0).unwrap().pmf();
        assert!((0..10_000).all(|_| (1..=2).contains(&p1.sample(&mut rng))));
        assert!((1..=20).contains(&sample_lifetime(&d10, &mut rng)));
    }

    #[test]
    fn cohort_retirement_profile_sums_to_capacity() {
        let pmf = LifetimeDistribution::new(10.0).unwrap().pmf();
        let c = Cohort::new(2024, 3.5, 750.0, CohortOrigin::Expansion, &pmf);
        let s: f64 = c.retirement_profile.iter().map(|(_, g)| g).sum();
        assert_relative_eq!(s, 3.5, max_relative = 1e-9);
        assert!(c.retirement_profile.iter().all(|(y, _)| (2025..=2044).contains(y)));
        assert_relative_eq!(c.contained_mass(), 3.5 * 0.75);
    }

    fn small_scenario() -> Scenario {
        let p = build_nze(&[(2024, 0.0), (2050, 100.0)], 1.0).unwrap();
        let w = OmegaTrajectory::new(750.0, 100.0, 0.1, 2024).unwrap();
        let g = RecyclingRamp::new(0.7, 0.97, 2024, 2035).unwrap();
        Scenario::new("small", p, w, g, 8.0).unwrap()
    }

    #[test]
    fn expected_engine_conserves_capacity_and_mass() {
        let s = small_scenario();
        let d = simulate_fleet_expected(&s).unwrap();
        for (y, v) in d.operating_capacity.iter() {
            assert_relative_eq!(v, s.pathway.cumulative().at(y).unwrap(), max_relative = 1e-9);
        }
        assert!(d.mass_balance().residual() < 1e-12);
    }

    #[test]
    fn mc_is_deterministic_for_a_seed() {
        let s = small_scenario().with_seed(11);
        let a = simulate_fleet_mc(&s).unwrap();
        let b = simulate_fleet_mc(&s).unwrap();
        assert_eq!(a, b);
        let c = simulate_fleet_mc(&s.with_seed(12)).unwrap();
        assert_ne!(a.m_eol, c.m_eol);
    }

    #[test]
    fn mc_warns_on_coarse_subsample() {
        let mut s = small_scenario();
        s.mc_subsample = 10_000;
        let d = simulate_fleet_mc(&s).unwrap();
        assert!(!d.warnings.is_empty());
    }

    #[test]
    fn engine_parse() {
        assert_eq!("mc".parse::<Engine>().unwrap(), Engine::Mc);
        assert_eq!("expected".parse::<Engine>().unwrap(), Engine::Expected);
        assert!("exact".parse::<Engine>().is_err());
    }
}
