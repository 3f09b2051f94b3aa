use std::f64::consts::PI;

use orthofree::conflict::{dot_range_boxes, AngularBox};
use orthofree::grid::{divisions, CellSet, DyadicCell};
use orthofree::scaling::{
    choose_constants, largest_feasible_epsilon, remove_polar_caps, scale_set, scale_set_with, scaled_measure_lower_bound,
    shrink_cell, verify_scaled_opf, ScaleOverrides,
};
use orthofree::search::double_cap_cellset;
use orthofree::Error;
use proptest::prelude::*;

fn any_cell(min_level: u32, max_level: u32) -> impl Strategy<Value = DyadicCell> {
    (min_level..=max_level).prop_flat_map(|level| {
        let n = divisions(level);
        (Just(level), 0..n, 0..n).prop_map(|(l, b, s)| DyadicCell::new(l, b, s).unwrap())
    })
}

fn inside(inner: &AngularBox, outer: &AngularBox) -> bool {
    outer.cos_theta.lo <= inner.cos_theta.lo
        && inner.cos_theta.hi <= outer.cos_theta.hi
        && outer.phi.lo <= inner.phi.lo
        && inner.phi.hi <= outer.phi.hi
}

#[test]
fn infeasible_epsilon_suggests_a_feasible_one() {
    match choose_constants(0.1, PI) {
        Err(Error::InfeasibleConstants { largest_feasible: Some(e), .. }) => {
            assert!(e < 0.1);
            assert!(choose_constants(e, PI).is_ok());
            assert!(choose_constants(e * 1.01, PI).is_err());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zero_overrides_are_the_identity() {
    let sel = double_cap_cellset(4).unwrap();
    let e = largest_feasible_epsilon(0.5, sel.measure()).unwrap();
    let c = choose_constants(e, sel.measure()).unwrap();
    let s = scale_set_with(&sel, &c, ScaleOverrides { shrink: Some(0.0), delta: Some(0.0) });
    assert_eq!(s.regions.len(), sel.len());
    for (r, cell) in s.regions.iter().zip(sel.cells()) {
        assert_eq!(r.region, Some(AngularBox::from_cell(&cell)));
    }
    assert!((s.summary.region_measure - sel.measure()).abs() < 1e-12);
}

#[test]
fn scaled_double_caps_certify() {
    for level in 2..=5 {
        let sel = double_cap_cellset(level).unwrap();
        let e = largest_feasible_epsilon(0.5, sel.measure()).unwrap();
        let c = choose_constants(e, sel.measure()).unwrap();
        let s = scale_set(&sel, &c);
        assert!(verify_scaled_opf(&s.regions).is_clean(), "level {level}");
        assert!(s.summary.region_measure >= s.summary.lower_bound_total - 1e-12);
        assert_eq!(s.summary.polar_cells_removed, sel.len() - remove_polar_caps(&sel, c.delta).len());
    }
}

#[test]
fn polar_removal_respects_delta() {
    let all = CellSet::all(5);
    for delta in [0.0, 0.01, 0.2, 0.7] {
        let kept = remove_polar_caps(&all, delta);
        for c in kept.cells() {
            let t = c.theta_bounds();
            assert!(t.lo >= delta && t.hi <= PI - delta);
        }
    }
}

proptest! {
    #[test]
    fn shrinking_nests(cell in any_cell(1, 8), a in 0.0f64..0.05, b in 0.0f64..0.05) {
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        let outer = AngularBox::from_cell(&cell);
        let r1 = shrink_cell(&cell, small);
        let r2 = shrink_cell(&cell, large);
        if let Some(b1) = r1.region {
            prop_assert!(inside(&b1, &outer));
            if let Some(b2) = r2.region {
                prop_assert!(inside(&b2, &b1));
            }
        } else {
            prop_assert!(r2.is_empty());
        }
        prop_assert!(r2.area() <= r1.area() && r1.area() <= cell.area() + 1e-15);
    }

    #[test]
    fn shrunk_ranges_nest(c1 in any_cell(3, 3), c2 in any_cell(3, 3), shrink in 0.0f64..0.05) {
        let full = dot_range_boxes(&AngularBox::from_cell(&c1), &AngularBox::from_cell(&c2));
        if let (Some(a), Some(b)) = (shrink_cell(&c1, shrink).region, shrink_cell(&c2, shrink).region) {
            let r = dot_range_boxes(&a, &b);
            prop_assert!(full.lo <= r.lo + 1e-12 && r.hi <= full.hi + 1e-12);
        }
    }

    #[test]
    fn region_area_meets_lower_bound(cell in any_cell(2, 6), frac in 0.1f64..1.0) {
        let sel = double_cap_cellset(cell.level).unwrap();
        let e = largest_feasible_epsilon(0.5, sel.measure()).unwrap() * frac;
        let c = choose_constants(e, sel.measure()).unwrap();
        let t = cell.theta_bounds();
        prop_assume!(t.lo >= c.delta && t.hi <= PI - c.delta);
        let r = shrink_cell(&cell, c.shrink_for(&cell));
        prop_assert!(r.area() >= scaled_measure_lower_bound(&cell, &c));
    }
}
