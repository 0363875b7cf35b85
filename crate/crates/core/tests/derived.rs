use iridium_core::gap::{max_capacity_path, pgm_required, required_dissolution_rate, CellParams};
use iridium_core::scenario::{build_nze, OmegaTrajectory, RecyclingRamp, Scenario};
use iridium_core::series::{AnnualSeries, Unit};

fn base(tau: f64) -> Scenario {
    let p = build_nze(&[(2024, 0.0), (2050, 100.0)], 1.0).unwrap();
    let w = OmegaTrajectory::constant(250.0, 2024).unwrap();
    Scenario::new("maxcap", p, w, RecyclingRamp::constant(0.0).unwrap(), tau).unwrap()
}

#[test]
fn pgm_factor() {
    assert_eq!(pgm_required(1.0, 0.02).unwrap(), 50.0);
    assert_eq!(pgm_required(0.0, 0.02).unwrap(), 0.0);
    assert!(pgm_required(-1.0, 0.02).is_err());
}

#[test]
fn max_capacity_first_year_fixture() {
    let supply = AnnualSeries::constant(2024, 2030, 7.5 * 0.3, Unit::TonnePerYear).unwrap();
    let w = OmegaTrajectory::constant(250.0, 2024).unwrap();
    let m = max_capacity_path(&supply, &w, &base(10.0)).unwrap();
    assert!((m.additions.at(2024).unwrap() - 9.0).abs() < 1e-12);
}

#[test]
fn max_capacity_constant_without_retirements() {
    let supply = AnnualSeries::constant(2024, 2030, 2.0, Unit::TonnePerYear).unwrap();
    let w = OmegaTrajectory::constant(400.0, 2024).unwrap();
    let mut s = base(20.0);
    s.lifetime_shape = iridium_core::scenario::LifetimeShape::PointMass;
    let m = max_capacity_path(&supply, &w, &s).unwrap();
    assert!(m.additions.values().iter().all(|&a| (a - 5.0).abs() < 1e-12));
    assert!((m.cumulative.last() - 35.0).abs() < 1e-9);
    let half = OmegaTrajectory::constant(200.0, 2024).unwrap();
    let m2 = max_capacity_path(&supply, &half, &s).unwrap();
    assert!((m2.additions.first() - 2.0 * m.additions.first()).abs() < 1e-12);
}

#[test]
fn max_capacity_spends_supply_exactly() {
    let supply = AnnualSeries::from_fn(2024, 2050, Unit::TonnePerYear, |y| 1.0 + 0.1 * f64::from(y - 2024)).unwrap();
    let w = OmegaTrajectory::new(750.0, 96.0, 0.35, 2024).unwrap();
    let mut s = base(6.0);
    s.gamma = RecyclingRamp::new(0.7, 0.97, 2024, 2035).unwrap();
    let m = max_capacity_path(&supply, &w, &s).unwrap();
    for (y, used) in m.iridium_used.iter() {
        assert!((used - m.iridium_available.at(y).unwrap()).abs() < 1e-9, "{y}");
        assert!(m.iridium_available.at(y).unwrap() >= supply.at(y).unwrap() - 1e-12);
    }
    assert!(m.replaced.sum() > 0.0);
}

#[test]
fn dissolution_rate_fixture() {
    let cell = CellParams::default();
    let omega = AnnualSeries::constant(2024, 2030, 650.0, Unit::KgPerGigawatt).unwrap();
    let r = required_dissolution_rate(&omega, 10.0, &cell).unwrap();
    let expected = 1.95 / 78_840.0;
    assert!((r.first() - expected).abs() < 1e-15);
    assert!((r.first() - 2.47e-5).abs() < 0.01e-5);
    let r20 = required_dissolution_rate(&omega, 20.0, &cell).unwrap();
    assert!((r20.first() * 2.0 - r.first()).abs() < 1e-18);
}

#[test]
fn dissolution_rate_constant_after_floor() {
    let w = OmegaTrajectory::new(750.0, 96.0, 5.0, 2024).unwrap();
    let r = required_dissolution_rate(&w.series(2024, 2050).unwrap(), 10.0, &CellParams::default()).unwrap();
    let tail = r.slice(2030, 2050).unwrap();
    assert!(tail.values().windows(2).all(|p| (p[0] - p[1]).abs() < 1e-15));
}
