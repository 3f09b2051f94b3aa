use orthofree::convexify::{
    check_pasch, check_triangle_lemma, connected_components, conv, conv2, convex_hull_with, hausdorff_distance,
    hausdorff_distance_converged, HullOptions, MERGE_TOL,
};
use orthofree::grid::CellSet;
use orthofree::polygon::{polygon_distance, ConvexPolygon};
use orthofree::search::double_cap_cellset;
use orthofree::sphere::{seeded_rng, GnomonicFrame, UnitVector};
use proptest::prelude::*;
use rand::Rng;

fn coarse() -> HullOptions {
    HullOptions { initial_samples: 8, max_samples: 16, area_tol: 1e-8 }
}

/// A small random convex polygon around a random center.
fn random_polygon(seed: u64) -> ConvexPolygon {
    let mut rng = seeded_rng(seed, 0);
    let center = UnitVector::from_cos_theta(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
    let frame = GnomonicFrame::new(center);
    let spread = rng.gen_range(0.05..0.6);
    let pts: Vec<UnitVector> = (0..rng.gen_range(3..12))
        .map(|_| frame.unproject([rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)]))
        .collect();
    ConvexPolygon::hull_of(&pts).unwrap()
}

#[test]
fn hull_covers_its_cells() {
    let sel = CellSet::from_pairs(4, [(3, 4), (3, 5), (4, 5), (5, 5), (5, 6)]).unwrap();
    let comps = connected_components(&sel);
    assert_eq!(comps.len(), 1);
    let h = convex_hull_with(&comps[0], &coarse()).unwrap();
    for cell in sel.cells() {
        for p in cell.boundary_points(64) {
            assert!(h.polygon.distance_to_point(&p) < 1e-12);
        }
    }
    assert!(h.area >= sel.measure());
}

#[test]
fn components_split_on_gaps() {
    let sel = CellSet::from_pairs(3, [(2, 2), (3, 3), (2, 6), (13, 2)]).unwrap();
    let comps = connected_components(&sel);
    let sizes: Vec<usize> = comps.iter().map(CellSet::len).collect();
    assert_eq!(sizes.iter().sum::<usize>(), 4);
    assert_eq!(comps.len(), 3, "corner contact joins (2,2) and (3,3)");
}

#[test]
fn double_cap_converts_to_two_polygons() {
    let r = orthofree::convexify::conv_with(&double_cap_cellset(3).unwrap(), &coarse(), MERGE_TOL).unwrap();
    assert_eq!(r.polygons, 2);
    assert!(r.violations.is_empty());
    assert!(r.polygon_measure >= r.cell_measure);
    assert!(r.conv2.merges.is_empty());
    let again = conv2(r.decomposition(), MERGE_TOL).unwrap();
    assert_eq!(&again.decomposition, r.decomposition());
    let d = r.decomposition();
    assert!(check_triangle_lemma(d, 2000, 1).violations.is_empty());
    assert!(check_pasch(d, 2000, 2).violations.is_empty());
}

#[test]
fn enclosed_component_is_merged() {
    // A C shape whose hull swallows a separate cell in its mouth.
    let mut pairs = Vec::new();
    for s in 0..=4 {
        pairs.push((6, s));
        pairs.push((10, s));
    }
    for b in 7..=9 {
        pairs.push((b, 0));
    }
    pairs.push((8, 3));
    let sel = CellSet::from_pairs(4, pairs).unwrap();
    assert_eq!(connected_components(&sel).len(), 2);
    let r = orthofree::convexify::conv_with(&sel, &coarse(), MERGE_TOL).unwrap();
    assert_eq!(r.conv1.decomposition.len(), 2);
    assert_eq!(r.conv2.merges.len(), 1);
    assert_eq!(r.conv2.merges[0].distance, 0.0);
    assert_eq!(r.polygons, 1);
}

#[test]
fn empty_selection_gives_empty_decomposition() {
    let r = conv(&CellSet::empty(3)).unwrap();
    assert_eq!(r.polygons, 0);
    assert_eq!(r.polygon_measure, 0.0);
    assert_eq!(r.decomposition().pairwise_min_distance, None);
}

#[test]
fn hausdorff_of_disjoint_points() {
    let a = ConvexPolygon::new(vec![UnitVector::NORTH]).unwrap();
    let b = ConvexPolygon::new(vec![UnitVector::from_polar(0.3, 0.0)]).unwrap();
    assert!((hausdorff_distance(&a, &b, 4) - 0.3).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hausdorff_is_a_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (p, q, r) = (random_polygon(a), random_polygon(b), random_polygon(c));
        let pq = hausdorff_distance(&p, &q, 32);
        prop_assert_eq!(pq, hausdorff_distance(&q, &p, 32));
        prop_assert_eq!(hausdorff_distance(&p, &p, 32), 0.0);
        let (pq, _) = hausdorff_distance_converged(&p, &q, 1e-10);
        let (qr, _) = hausdorff_distance_converged(&q, &r, 1e-10);
        let (pr, _) = hausdorff_distance_converged(&p, &r, 1e-10);
        prop_assert!(pr <= pq + qr + 1e-6);
        prop_assert!(pq >= polygon_distance(&p, &q));
    }

    #[test]
    fn hausdorff_bounds_vertex_distances(a in any::<u64>(), b in any::<u64>()) {
        let (p, q) = (random_polygon(a), random_polygon(b));
        let d = hausdorff_distance(&p, &q, 16);
        for v in p.vertices() {
            prop_assert!(q.distance_to_point(v) <= d + 1e-12);
        }
    }
}
