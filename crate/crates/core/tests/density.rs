use std::f64::consts::{PI, TAU};

use orthofree::density::{
    covering_report, estimate_cell_density, monte_carlo_density, select_dense_cells, select_dense_cells_with,
    EpsilonPolicy, MembershipOracle, BETA,
};
use orthofree::grid::{divisions, CellSet, DyadicCell, GridLevel};
use orthofree::search::double_cap_cellset;
use orthofree::sphere::UnitVector;
use orthofree::Error;
use proptest::prelude::*;

const DOUBLE_CAP_RADIUS: f64 = PI / 4.0;

#[test]
fn epsilon_range_is_enforced() {
    let m = MembershipOracle::All;
    assert!(matches!(select_dense_cells(&m, 2, 0.5, 1000, 0), Err(Error::EpsilonOutOfRange { .. })));
    assert!(select_dense_cells(&m, 2, BETA, 1000, 0).is_err());
    assert!(select_dense_cells(&m, 2, BETA / 2.0, 1000, 0).is_ok());
    assert!(select_dense_cells_with(&m, 2, 0.5, 1000, 0, EpsilonPolicy::Relaxed).is_ok());
}

#[test]
fn whole_sphere_selects_everything() {
    let r = select_dense_cells(&MembershipOracle::All, 3, 0.01, 1000, 0).unwrap();
    assert_eq!(r.selected, CellSet::all(3));
    assert!((r.captured_measure - 4.0 * PI).abs() < 1e-12);
}

#[test]
fn cell_set_oracle_returns_itself() {
    let cells = CellSet::from_pairs(3, [(0, 0), (4, 9), (9, 4)]).unwrap();
    let oracle = MembershipOracle::CellSet { cells: cells.clone() };
    let r = select_dense_cells(&oracle, 3, 0.01, 1000, 0).unwrap();
    assert_eq!(r.selected, cells);
    let fine = select_dense_cells(&oracle, 5, 0.01, 1000, 0).unwrap();
    assert_eq!(fine.selected, cells.refine_to(5).unwrap());
}

#[test]
fn double_cap_densities_are_exact() {
    let oracle = MembershipOracle::DoubleCap { radius: DOUBLE_CAP_RADIUS };
    assert!((oracle.exact_measure().unwrap() - 4.0 * PI * (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
    for level in 2..=6 {
        let r = select_dense_cells_with(&oracle, level, 0.05, 1000, 0, EpsilonPolicy::Relaxed).unwrap();
        assert!(r.oracle_measure_exact);
        // Every selected cell lies inside the caps, so they are exactly the fully dense ones.
        assert!(r.cells.iter().all(|c| c.stderr == 0.0));
        let full = double_cap_cellset(level).unwrap();
        assert!(full.pairs().iter().all(|p| r.selected.pairs().contains(p)));
    }
}

#[test]
fn sieve_fraction() {
    for depth in 0..=4 {
        let oracle = MembershipOracle::SieveFractal { depth };
        let m = oracle.exact_measure().unwrap();
        assert!((m - 4.0 * PI * 0.75f64.powi(depth as i32)).abs() < 1e-12);
        let r = select_dense_cells(&oracle, depth, 0.01, 1000, 0).unwrap();
        assert_eq!(r.selected.len(), 4 * 3usize.pow(depth));
    }
}

#[test]
fn covering_gaps_for_caps() {
    let oracle = MembershipOracle::DoubleCap { radius: DOUBLE_CAP_RADIUS };
    let sel = double_cap_cellset(5).unwrap();
    let r = covering_report(&oracle, &sel, 1000, 0).unwrap();
    assert!((r.union - sel.measure()).abs() < 1e-12);
    assert!(r.excess <= 1e-12, "double-cap cells lie inside the caps");
    assert!(r.missed > 0.0);
    assert!((r.inside + r.missed - r.oracle_measure).abs() < 1e-9);
}

#[test]
fn csv_has_one_row_per_nonzero_cell() {
    let oracle = MembershipOracle::DoubleCap { radius: DOUBLE_CAP_RADIUS };
    let r = select_dense_cells_with(&oracle, 3, 0.05, 1000, 0, EpsilonPolicy::Relaxed).unwrap();
    let csv = r.to_csv().unwrap();
    assert_eq!(csv.lines().count(), r.cells.len() + 1);
    assert!(csv.starts_with("band,sector,density,stderr"));
}

#[test]
fn polygon_oracle_is_seeded() {
    let square = orthofree::polygon::ConvexPolygon::new(vec![
        UnitVector::from_polar(0.9, 0.1),
        UnitVector::from_polar(0.9, 0.7),
        UnitVector::from_polar(1.4, 0.7),
        UnitVector::from_polar(1.4, 0.1),
    ])
    .unwrap();
    let oracle = MembershipOracle::PolygonSet { polygons: vec![square] };
    let cell = DyadicCell::new(2, 2, 0).unwrap();
    let a = estimate_cell_density(&oracle, &cell, 4000, 9).unwrap();
    let b = estimate_cell_density(&oracle, &cell, 4000, 9).unwrap();
    assert_eq!(a, b);
    assert!(!a.exact && a.density > 0.0 && a.density < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_cap_density_within_monte_carlo_error(
        theta in 0.0f64..PI,
        phi in 0.0f64..TAU,
        radius in 0.05f64..3.0,
        level in 1u32..4,
        k in 0u32..1024,
    ) {
        let oracle = MembershipOracle::Cap { center: UnitVector::from_polar(theta, phi), radius };
        let n = divisions(level);
        let cell = DyadicCell::from_ordinal(level, k % (n * n)).unwrap();
        let exact = estimate_cell_density(&oracle, &cell, 1000, 0).unwrap();
        prop_assert!(exact.exact);
        let mc = monte_carlo_density(&oracle, &cell, 20_000, u64::from(k));
        prop_assert!((mc.density - exact.density).abs() <= 5.0 * mc.stderr + 1e-9,
            "exact {} vs sampled {} ± {}", exact.density, mc.density, mc.stderr);
    }

    #[test]
    fn cap_densities_sum_to_cap_area(theta in 0.0f64..PI, radius in 0.1f64..3.0) {
        let oracle = MembershipOracle::Cap { center: UnitVector::from_polar(theta, 1.0), radius };
        let g = GridLevel::new(2).unwrap();
        let total: f64 = g
            .cells()
            .map(|c| estimate_cell_density(&oracle, &c, 1000, 0).unwrap().density * c.area())
            .sum();
        prop_assert!((total - oracle.exact_measure().unwrap()).abs() < 1e-7);
    }
}
