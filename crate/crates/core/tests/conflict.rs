use orthofree::conflict::{
    build_conflict_graph, build_conflict_graph_capped, cache_path, cells_conflict, dot_range_cells, load_graph,
    load_or_build, save_graph, DEFAULT_MAX_GRAPH_LEVEL,
};
use orthofree::grid::{divisions, DyadicCell, GridLevel};
use orthofree::sphere::{seeded_rng, UnitVector};
use orthofree::Error;
use proptest::prelude::*;
use rand::Rng;

fn any_cell(min_level: u32, max_level: u32) -> impl Strategy<Value = DyadicCell> {
    (min_level..=max_level).prop_flat_map(|level| {
        let n = divisions(level);
        (Just(level), 0..n, 0..n).prop_map(|(l, b, s)| DyadicCell::new(l, b, s).unwrap())
    })
}

fn cell_pair(max_level: u32) -> impl Strategy<Value = (DyadicCell, DyadicCell)> {
    (0..=max_level).prop_flat_map(|level| {
        let n = divisions(level);
        (0..n, 0..n, 0..n, 0..n).prop_map(move |(a, b, c, d)| {
            (DyadicCell::new(level, a, b).unwrap(), DyadicCell::new(level, c, d).unwrap())
        })
    })
}

fn point_in<R: Rng>(c: &DyadicCell, rng: &mut R) -> UnitVector {
    let (z, phi) = c.bounds();
    UnitVector::from_cos_theta(rng.gen_range(z.lo..=z.hi), rng.gen_range(phi.lo..=phi.hi))
}

#[test]
fn level_zero_cells_all_self_conflict() {
    let g = build_conflict_graph(0, 0.0).unwrap();
    assert_eq!(g.self_conflicts(), vec![0, 1, 2, 3]);
}

#[test]
fn graph_agrees_with_pairwise_oracle() {
    for level in 1..=3 {
        let g = build_conflict_graph(level, 0.0).unwrap();
        let cells: Vec<_> = GridLevel::new(level).unwrap().cells().collect();
        let mut edges = 0u64;
        for a in &cells {
            assert_eq!(g.is_self_conflicting(a.ordinal()), cells_conflict(a, a, 0.0));
            for b in &cells {
                let want = cells_conflict(a, b, 0.0);
                assert_eq!(g.conflicts(a.ordinal(), b.ordinal()), want, "{a:?} {b:?}");
                if a.ordinal() < b.ordinal() && want {
                    edges += 1;
                }
            }
        }
        assert_eq!(g.edge_count(), edges);
    }
}

#[test]
fn level_cap_is_enforced() {
    match build_conflict_graph(DEFAULT_MAX_GRAPH_LEVEL + 1, 0.0) {
        Err(Error::ResourceCap { .. }) => {}
        other => panic!("expected a resource cap, got {other:?}"),
    }
    assert!(build_conflict_graph_capped(3, 0.0, 2).is_err());
}

#[test]
fn cache_roundtrip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = cache_path(dir.path(), 4, 0.0);
    let built = build_conflict_graph(4, 0.0).unwrap();
    let (g, hit) = load_or_build(&path, 4, 0.0, || build_conflict_graph(4, 0.0)).unwrap();
    assert!(!hit);
    assert_eq!(g, built);
    let (again, hit) = load_or_build(&path, 4, 0.0, || unreachable!()).unwrap();
    assert!(hit);
    assert_eq!(again, built);
    assert_eq!(again.degree_histogram(), built.degree_histogram());

    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_graph(&path), Err(Error::CorruptCache(_))));

    save_graph(&built, &path).unwrap();
    std::fs::write(&path, &std::fs::read(&path).unwrap()[..20]).unwrap();
    assert!(matches!(load_graph(&path), Err(Error::CorruptCache(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn range_contains_sampled_dots((a, b) in cell_pair(6), seed in any::<u64>()) {
        let r = dot_range_cells(&a, &b);
        let mut rng = seeded_rng(seed, 0);
        for _ in 0..50 {
            let d = point_in(&a, &mut rng).dot(&point_in(&b, &mut rng));
            prop_assert!(r.lo - 1e-12 <= d && d <= r.hi + 1e-12, "{d} outside {r:?}");
        }
    }

    #[test]
    fn children_ranges_nest((a, b) in cell_pair(6)) {
        let parent = dot_range_cells(&a, &b);
        for ca in a.refine() {
            for cb in b.refine() {
                let child = dot_range_cells(&ca, &cb);
                prop_assert!(parent.lo <= child.lo + 1e-12 && child.hi <= parent.hi + 1e-12);
            }
        }
    }

    #[test]
    fn antipode_negates_range((a, b) in cell_pair(7)) {
        let r = dot_range_cells(&a, &b);
        let s = dot_range_cells(&a, &b.antipode());
        prop_assert!((r.lo + s.hi).abs() < 1e-12 && (r.hi + s.lo).abs() < 1e-12);
        prop_assert_eq!(cells_conflict(&a, &b, 0.0), cells_conflict(&a.antipode(), &b.antipode(), 0.0));
    }

    #[test]
    fn conflict_is_symmetric((a, b) in cell_pair(7)) {
        prop_assert_eq!(cells_conflict(&a, &b, 0.0), cells_conflict(&b, &a, 0.0));
    }

    #[test]
    fn fine_cells_do_not_self_conflict(c in any_cell(2, 9)) {
        prop_assert!(!cells_conflict(&c, &c, 0.0));
    }
}
