use iridium_core::fleet::{simulate, simulate_fleet_expected, simulate_fleet_mc, Engine};
use iridium_core::scenario::{
    CapacityPathway, LifetimeShape, OmegaTrajectory, PathwayLabel, RecyclingRamp, Scenario,
};
use iridium_core::series::{AnnualSeries, Unit};

mod common;
use common::{rel_err, shipped};

fn custom(adds: Vec<f64>, omega: OmegaTrajectory, gamma: RecyclingRamp, tau: f64) -> Scenario {
    let p = CapacityPathway::from_additions(
        PathwayLabel::Custom,
        AnnualSeries::new(2024, adds, Unit::GigawattPerYear).unwrap(),
    )
    .unwrap();
    Scenario::new("custom", p, omega, gamma, tau).unwrap()
}

#[test]
fn single_cohort_trace() {
    let mut adds = vec![0.0; 15];
    adds[0] = 1.0;
    let w = OmegaTrajectory::new(750.0, 100.0, 0.1, 2024).unwrap();
    let mut s = custom(adds, w, RecyclingRamp::constant(0.0).unwrap(), 10.0);
    s.lifetime_shape = LifetimeShape::PointMass;
    for engine in [Engine::Expected, Engine::Mc] {
        let d = simulate(&s, engine).unwrap();
        for y in 2024..=2038 {
            let cap = if y == 2024 { w.at(2024).unwrap() / 1000.0 } else { 0.0 };
            let eol = if y == 2034 { w.at(2034).unwrap() / 1000.0 } else { 0.0 };
            assert!((d.m_cap.at(y).unwrap() - cap).abs() < 1e-15, "{engine} {y}");
            assert!((d.m_eol.at(y).unwrap() - eol).abs() < 1e-15, "{engine} {y}");
            assert_eq!(d.m_recycling.at(y).unwrap(), 0.0);
        }
    }
}

/// Literal lag-τ recursion for a point-mass lifetime.
fn lag_oracle(adds: &[f64], omega: &[f64], gamma: &[f64], tau: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = adds.len();
    let mut cap = vec![0.0; n];
    let mut eol = vec![0.0; n];
    let mut rec = vec![0.0; n];
    let mut installed = vec![0.0; n];
    for i in 0..n {
        cap[i] = adds[i] * omega[i] / 1000.0;
        if i >= tau {
            eol[i] = installed[i - tau] * omega[i] / 1000.0;
            rec[i] = (cap[i - tau] + eol[i - tau]) * gamma[i];
        }
        installed[i] = adds[i] + if i >= tau { installed[i - tau] } else { 0.0 };
    }
    (cap, eol, rec)
}

#[test]
fn point_mass_reproduces_lag_recursion() {
    let adds = vec![1.0, 2.5, 0.0, 4.0, 3.0, 7.5, 1.0, 0.5, 9.0, 2.0, 6.0, 0.0, 3.5, 8.0, 4.5];
    let w = OmegaTrajectory::new(750.0, 96.0, 0.35, 2024).unwrap();
    let g = RecyclingRamp::new(0.7, 0.97, 2024, 2035).unwrap();
    for tau in [1u32, 3, 4, 7] {
        let mut s = custom(adds.clone(), w, g, f64::from(tau));
        s.lifetime_shape = LifetimeShape::PointMass;
        let d = simulate_fleet_expected(&s).unwrap();
        let omega: Vec<f64> = (2024..2039).map(|y| w.at(y).unwrap()).collect();
        let gamma: Vec<f64> = (2024..2039).map(|y| g.at(y)).collect();
        let (cap, eol, rec) = lag_oracle(&adds, &omega, &gamma, tau as usize);
        for i in 0..15 {
            assert!((d.m_cap.values()[i] - cap[i]).abs() <= 1e-12, "tau {tau} i {i}");
            assert!((d.m_eol.values()[i] - eol[i]).abs() <= 1e-12, "tau {tau} i {i}");
            assert!((d.m_recycling.values()[i] - rec[i]).abs() <= 1e-12, "tau {tau} i {i}");
        }
    }
}

#[test]
fn closed_loop_steady_state() {
    let w = OmegaTrajectory::constant(500.0, 2024).unwrap();
    let mut s = custom(vec![10.0; 40], w, RecyclingRamp::constant(1.0).unwrap(), 5.0);
    s.lifetime_shape = LifetimeShape::PointMass;
    let d = simulate_fleet_expected(&s).unwrap();
    for (i, y) in (2024..2064).enumerate() {
        let expansion = 10.0 * 0.5;
        let t = d.m_total.at(y).unwrap();
        if i >= 5 {
            assert!((d.m_recycling.at(y).unwrap() - d.m_eol.at(y).unwrap()).abs() < 1e-12);
            assert!((t - expansion).abs() < 1e-12, "{y}: {t}");
        }
    }
    let s = custom(vec![10.0; 40], w, RecyclingRamp::constant(1.0).unwrap(), 5.0);
    let d = simulate_fleet_expected(&s).unwrap();
    let last = d.m_total.at(2063).unwrap();
    assert!((last - 5.0).abs() < 1e-9, "truncated normal steady state {last}");
}

#[test]
fn mc_subsample_keeps_totals() {
    let base = shipped("conservative_nze");
    let exp = simulate_fleet_expected(&base).unwrap().cumulative_demand();
    for sub in [1u32, 10, 100] {
        let mut s = base.clone();
        s.mc_subsample = sub;
        let d = simulate_fleet_mc(&s).unwrap();
        let r = rel_err(d.cumulative_demand(), exp);
        assert!(r < 0.01, "subsample {sub}: {} vs {exp} ({r})", d.cumulative_demand());
        assert!(d.mass_balance().residual() < 1e-9);
    }
}

#[test]
fn shipped_scenarios_balance_on_both_engines() {
    for id in ["conservative_bau", "optimistic_bau", "conservative_nze", "optimistic_nze"] {
        let s = shipped(id);
        for engine in [Engine::Expected, Engine::Mc] {
            let d = simulate(&s, engine).unwrap();
            let mb = d.mass_balance();
            assert!(mb.residual() < 1e-9, "{id} {engine}: {}", mb.residual());
            if mb.surplus == 0.0 {
                assert!(mb.literal_residual() < 1e-9);
            }
            assert_eq!(d.m_total.start_year(), 2024);
            assert_eq!(d.m_total.end_year(), 2050);
        }
    }
}

#[test]
fn expected_operating_capacity_tracks_pathway() {
    let s = shipped("optimistic_bau");
    let d = simulate_fleet_expected(&s).unwrap();
    for (y, v) in d.operating_capacity.iter() {
        assert!(rel_err(v, s.pathway.cumulative().at(y).unwrap()) < 1e-12);
    }
}
