//! Turning a cell selection into disjoint convex polygons.
//!
//! `conv1` hulls every connected component of the selection. `conv2` then
//! merges, lowest index pair first, any two polygons at distance at most the
//! merge tolerance, until all pairwise distances exceed it. Both stages
//! re-check that no orthogonal pair appeared.
//!
//! Cell edges along latitude circles are small-circle arcs. Hull input for
//! each such edge is a set of samples on the arc plus, where the arc bulges
//! outward from the cell, the meeting points of the tangent great circles at
//! consecutive samples. The hull therefore contains every cell exactly, and
//! it converges to the true hull as the sampling density grows.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conflict::polygons_conflict;
use crate::error::{Error, Result};
use crate::grid::{CellSet, DyadicCell};
use crate::polygon::{directed_hausdorff, distance_at_most, polygon_distance, ConvexPolygon, TOUCH_TOL};
use crate::sphere::{geodesic_distance, seeded_rng, slerp, GnomonicFrame, UnitVector};

/// Hull sampling controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullOptions {
    /// Samples per latitude edge at the first attempt.
    pub initial_samples: usize,
    /// Largest sampling density tried.
    pub max_samples: usize,
    /// Stop doubling once the hull area changes by less than this.
    pub area_tol: f64,
}

impl Default for HullOptions {
    fn default() -> Self {
        Self { initial_samples: 32, max_samples: 256, area_tol: 1e-8 }
    }
}

/// Default distance at or below which two polygons are merged.
pub const MERGE_TOL: f64 = TOUCH_TOL;

/// Partition of `selection` into classes of cells linked by shared boundary points.
pub fn connected_components(selection: &CellSet) -> Vec<CellSet> {
    let cells: Vec<DyadicCell> = selection.cells().collect();
    let mut seen = vec![false; cells.len()];
    let index = |c: &DyadicCell| selection.pairs().binary_search(&(c.band, c.sector)).ok();
    let mut out = Vec::new();
    for start in 0..cells.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(cells[i]);
            for nb in cells[i].neighbors() {
                if let Some(j) = index(&nb) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(CellSet::from_cells(selection.level(), members).expect("cells of a valid set"));
    }
    out
}

/// Colatitude where the great circles tangent to the latitude circle at
/// colatitude `t`, at longitudes `Δ` apart, meet.
fn tangent_meet(t: f64, delta: f64) -> f64 {
    let half = (0.5 * delta).cos();
    if t < FRAC_PI_2 {
        (t.tan() / half).atan()
    } else if t > FRAC_PI_2 {
        PI - ((PI - t).tan() / half).atan()
    } else {
        t
    }
}

/// Points whose hull contains `cell`, with `m` samples per latitude edge.
fn cell_hull_points(cell: &DyadicCell, m: usize, out: &mut Vec<UnitVector>) {
    let z = cell.cos_theta_bounds();
    let phi = cell.phi_bounds();
    let th = cell.theta_bounds();
    let step = phi.width() / m as f64;
    // (cos θ, colatitude, whether the arc bulges out of the cell).
    let edges = [(z.hi, th.lo, th.lo > FRAC_PI_2), (z.lo, th.hi, th.hi < FRAC_PI_2)];
    for (zc, t, bulges) in edges {
        if zc.abs() == 1.0 {
            out.push(UnitVector::from_cos_theta(zc, 0.0));
            continue;
        }
        for i in 0..=m {
            out.push(UnitVector::from_cos_theta(zc, phi.lo + i as f64 * step));
        }
        if bulges {
            let ts = tangent_meet(t, step);
            for i in 0..m {
                out.push(UnitVector::from_polar(ts, phi.lo + (i as f64 + 0.5) * step));
            }
        }
    }
}

/// Hull points of a component: only cells with a boundary side can contribute
/// hull vertices, but interior cells are cheap enough to keep.
fn component_points(component: &CellSet, m: usize) -> Vec<UnitVector> {
    let mut pts = Vec::new();
    for c in component.cells() {
        cell_hull_points(&c, m, &mut pts);
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullOutcome {
    pub polygon: ConvexPolygon,
    pub samples_per_edge: usize,
    pub area: f64,
    /// Whether the last doubling changed the area by less than the tolerance.
    pub converged: bool,
}

/// Convex hull of a component with default sampling.
pub fn convex_hull(component: &CellSet) -> Result<HullOutcome> {
    convex_hull_with(component, &HullOptions::default())
}

pub fn convex_hull_with(component: &CellSet, opts: &HullOptions) -> Result<HullOutcome> {
    if component.is_empty() {
        return Err(Error::HullInfeasible("empty component".into()));
    }
    let mut m = opts.initial_samples.max(1);
    let mut polygon = ConvexPolygon::hull_of(&component_points(component, m))?;
    let mut area = polygon.area();
    loop {
        if m * 2 > opts.max_samples {
            return Ok(HullOutcome { polygon, samples_per_edge: m, area, converged: false });
        }
        let next = ConvexPolygon::hull_of(&component_points(component, m * 2))?;
        let next_area = next.area();
        let change = (next_area - area).abs();
        m *= 2;
        polygon = next;
        area = next_area;
        if change < opts.area_tol {
            return Ok(HullOutcome { polygon, samples_per_edge: m, area, converged: true });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexDecomposition {
    pub polygons: Vec<ConvexPolygon>,
    /// Smallest distance between two distinct polygons; `None` with fewer than two.
    pub pairwise_min_distance: Option<f64>,
}

impl ConvexDecomposition {
    pub fn new(polygons: Vec<ConvexPolygon>) -> Self {
        use rayon::prelude::*;
        let pairs: Vec<(usize, usize)> =
            (0..polygons.len()).flat_map(|i| (i + 1..polygons.len()).map(move |j| (i, j))).collect();
        let min = pairs
            .par_iter()
            .map(|&(i, j)| polygon_distance(&polygons[i], &polygons[j]))
            .min_by(f64::total_cmp);
        Self { polygons, pairwise_min_distance: min }
    }

    pub fn empty() -> Self {
        Self { polygons: Vec::new(), pairwise_min_distance: None }
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.polygons.iter().map(ConvexPolygon::area).fold(0.0, |a, b| a + b)
    }

    /// Whether any polygon (or pair of polygons) contains an orthogonal pair.
    /// Returns `(i, j)` with `i ≤ j`; `(i, i)` means the polygon's diameter reaches π/2.
    pub fn orthogonality_violations(&self) -> Vec<(usize, usize)> {
        let p = &self.polygons;
        let mut out = Vec::new();
        for i in 0..p.len() {
            for j in i..p.len() {
                if polygons_conflict(&p[i], &p[j]) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1Report {
    pub decomposition: ConvexDecomposition,
    pub components: usize,
    pub hulls: Vec<HullSummary>,
    pub cell_measure: f64,
    pub polygon_measure: f64,
    pub violations: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSummary {
    pub cells: usize,
    pub vertices: usize,
    pub samples_per_edge: usize,
    pub converged: bool,
    pub area: f64,
}

pub fn conv1(selection: &CellSet) -> Result<Conv1Report> {
    conv1_with(selection, &HullOptions::default())
}

pub fn conv1_with(selection: &CellSet, opts: &HullOptions) -> Result<Conv1Report> {
    let comps = connected_components(selection);
    let outcomes: Vec<HullOutcome> = {
        use rayon::prelude::*;
        comps.par_iter().map(|c| convex_hull_with(c, opts)).collect::<Result<_>>()?
    };
    let hulls = comps
        .iter()
        .zip(&outcomes)
        .map(|(c, h)| HullSummary {
            cells: c.len(),
            vertices: h.polygon.len(),
            samples_per_edge: h.samples_per_edge,
            converged: h.converged,
            area: h.area,
        })
        .collect();
    let decomposition = ConvexDecomposition::new(outcomes.into_iter().map(|h| h.polygon).collect());
    let violations = decomposition.orthogonality_violations();
    Ok(Conv1Report {
        components: comps.len(),
        hulls,
        cell_measure: selection.measure(),
        polygon_measure: decomposition.total_area(),
        violations,
        decomposition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    /// Index of the surviving polygon before the merge.
    pub kept: usize,
    /// Index of the absorbed polygon before the merge.
    pub absorbed: usize,
    pub distance: f64,
    /// Violations found right after this merge, as index pairs after the merge.
    pub violations: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2Report {
    pub decomposition: ConvexDecomposition,
    pub merges: Vec<MergeRecord>,
    pub violations: Vec<(usize, usize)>,
}

/// Merges polygons at distance ≤ `tol` until every pair is farther apart.
pub fn conv2(decomp: &ConvexDecomposition, tol: f64) -> Result<Conv2Report> {
    let mut polys = decomp.polygons.clone();
    let mut merges = Vec::new();
    loop {
        let mut hit = None;
        'scan: for i in 0..polys.len() {
            for j in i + 1..polys.len() {
                if distance_at_most(&polys[i], &polys[j], tol) {
                    hit = Some((i, j, polygon_distance(&polys[i], &polys[j])));
                    break 'scan;
                }
            }
        }
        let Some((i, j, distance)) = hit else { break };
        let mut pts: Vec<UnitVector> = polys[i].vertices().to_vec();
        pts.extend_from_slice(polys[j].vertices());
        let merged = ConvexPolygon::hull_of(&pts)?;
        polys[i] = merged;
        polys.remove(j);
        let mut violations = Vec::new();
        for k in 0..polys.len() {
            if polygons_conflict(&polys[i], &polys[k]) {
                violations.push((i.min(k), i.max(k)));
            }
        }
        violations.sort_unstable();
        merges.push(MergeRecord { kept: i, absorbed: j, distance, violations });
    }
    let decomposition = if merges.is_empty() { decomp.clone() } else { ConvexDecomposition::new(polys) };
    let violations = decomposition.orthogonality_violations();
    Ok(Conv2Report { decomposition, merges, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvReport {
    pub conv1: Conv1Report,
    pub conv2: Conv2Report,
    pub cell_measure: f64,
    pub polygon_measure: f64,
    pub polygons: usize,
    pub violations: Vec<(usize, usize)>,
}

impl ConvReport {
    pub fn decomposition(&self) -> &ConvexDecomposition {
        &self.conv2.decomposition
    }
}

/// conv2 ∘ conv1 with default sampling and merge tolerance.
pub fn conv(selection: &CellSet) -> Result<ConvReport> {
    conv_with(selection, &HullOptions::default(), MERGE_TOL)
}

pub fn conv_with(selection: &CellSet, opts: &HullOptions, tol: f64) -> Result<ConvReport> {
    let first = conv1_with(selection, opts)?;
    let second = conv2(&first.decomposition, tol)?;
    Ok(ConvReport {
        cell_measure: first.cell_measure,
        polygon_measure: second.decomposition.total_area(),
        polygons: second.decomposition.len(),
        violations: second.violations.clone(),
        conv1: first,
        conv2: second,
    })
}

/// Symmetric Hausdorff distance from boundary samples (`per_edge` per edge).
pub fn hausdorff_distance(p: &ConvexPolygon, q: &ConvexPolygon, per_edge: usize) -> f64 {
    directed_hausdorff(p, q, per_edge).max(directed_hausdorff(q, p, per_edge))
}

/// Hausdorff distance with the per-edge sampling doubled until two successive
/// values differ by less than `tol` (or 4096 samples per edge are reached).
/// Returns the distance and the sampling used.
pub fn hausdorff_distance_converged(p: &ConvexPolygon, q: &ConvexPolygon, tol: f64) -> (f64, usize) {
    let mut m = 8;
    let mut d = hausdorff_distance(p, q, m);
    while m < 4096 {
        let next = hausdorff_distance(p, q, 2 * m);
        m *= 2;
        let done = (next - d).abs() < tol;
        d = next;
        if done {
            break;
        }
    }
    (d, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleWitness {
    pub polygon: usize,
    pub points: [UnitVector; 3],
    /// "segment" if x–z leaves the polygon, "distance" if two points are π/2 or more apart.
    pub clause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub trials: usize,
    pub violations: Vec<TriangleWitness>,
}

fn probe_point<R: Rng>(p: &ConvexPolygon, rng: &mut R) -> Option<UnitVector> {
    // A quarter of the probes use vertices, which is where extreme distances live.
    if rng.gen_bool(0.25) || p.len() < 3 {
        Some(p.vertices()[rng.gen_range(0..p.len())])
    } else {
        p.sample_interior(rng, 10_000)
    }
}

/// For random x, y, z in one polygon: the segment x–z stays inside and all
/// three pairwise distances are below π/2.
pub fn check_triangle_lemma(decomp: &ConvexDecomposition, trials: usize, seed: u64) -> PropertyReport {
    let mut violations = Vec::new();
    if decomp.is_empty() {
        return PropertyReport { trials: 0, violations };
    }
    let mut rng = seeded_rng(seed, 0);
    for _ in 0..trials {
        let k = rng.gen_range(0..decomp.len());
        let poly = &decomp.polygons[k];
        let (Some(x), Some(y), Some(z)) = (probe_point(poly, &mut rng), probe_point(poly, &mut rng), probe_point(poly, &mut rng))
        else {
            continue;
        };
        let inside = (1..16).all(|i| poly.distance_to_point(&slerp(&x, &z, i as f64 / 16.0)) <= 1e-9);
        if !inside {
            violations.push(TriangleWitness { polygon: k, points: [x, y, z], clause: "segment".into() });
        }
        let far = [(x, y), (y, z), (x, z)].iter().any(|(a, b)| geodesic_distance(a, b) >= FRAC_PI_2);
        if far {
            violations.push(TriangleWitness { polygon: k, points: [x, y, z], clause: "distance".into() });
        }
    }
    PropertyReport { trials, violations }
}

fn seg_hits(p: [f64; 2], d: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    // Line p + s·d against the closed segment ab.
    let side = |q: [f64; 2]| d[0] * (q[1] - p[1]) - d[1] * (q[0] - p[0]);
    let (sa, sb) = (side(a), side(b));
    let scale = 1e-12 * (d[0].abs() + d[1].abs()) * (1.0 + a[0].abs() + a[1].abs() + b[0].abs() + b[1].abs());
    sa * sb <= 0.0 || sa.abs() <= scale || sb.abs() <= scale
}

/// For random triangles abc inside a polygon and random great circles through
/// a point of side ab, the circle also meets bc ∪ ca. Checked in the
/// gnomonic chart, where the circle is a line.
pub fn check_pasch(decomp: &ConvexDecomposition, trials: usize, seed: u64) -> PropertyReport {
    let mut violations = Vec::new();
    if decomp.is_empty() {
        return PropertyReport { trials: 0, violations };
    }
    let mut rng = seeded_rng(seed, 1);
    for _ in 0..trials {
        let k = rng.gen_range(0..decomp.len());
        let poly = &decomp.polygons[k];
        let pts: Option<Vec<UnitVector>> = (0..3).map(|_| poly.sample_interior(&mut rng, 10_000)).collect();
        let Some(pts) = pts else { continue };
        let (a, b, c) = (pts[0], pts[1], pts[2]);
        let on_ab = slerp(&a, &b, rng.gen_range(0.0..=1.0));
        let other = crate::sphere::sample_uniform(&mut rng);
        let n = on_ab.cross(&other);
        let Ok(normal) = UnitVector::from_array(n) else { continue };
        let dir = UnitVector::from_array(crate::sphere::cross3(normal.to_array(), on_ab.to_array()))
            .expect("normal is orthogonal to the point");
        let frame = GnomonicFrame::new(poly.hemisphere_center());
        let ahead = slerp(&on_ab, &dir, 1e-3 / FRAC_PI_2);
        let (Ok(pa), Ok(pb), Ok(pc), Ok(q0), Ok(q1)) =
            (frame.project(&a), frame.project(&b), frame.project(&c), frame.project(&on_ab), frame.project(&ahead))
        else {
            continue;
        };
        let d = [q1[0] - q0[0], q1[1] - q0[1]];
        if !(seg_hits(q0, d, pb, pc) || seg_hits(q0, d, pc, pa)) {
            violations.push(TriangleWitness { polygon: k, points: [a, b, c], clause: "pasch".into() });
        }
    }
    PropertyReport { trials, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::double_cap_cellset;

    #[test]
    fn components() {
        let two = CellSet::from_pairs(3, [(5, 5), (5, 6)]).unwrap();
        assert_eq!(connected_components(&two).len(), 1);
        let apart = CellSet::from_pairs(3, [(0, 0), (15, 0)]).unwrap();
        assert_eq!(connected_components(&apart).len(), 2);
        let top = CellSet::from_pairs(2, (0..8).map(|s| (0, s))).unwrap();
        assert_eq!(connected_components(&top).len(), 1);
        let corner = CellSet::from_pairs(3, [(4, 4), (5, 5)]).unwrap();
        assert_eq!(connected_components(&corner).len(), 1);
    }

    #[test]
    fn single_cell_hull_contains_cell() {
        let c = DyadicCell::new(3, 2, 5).unwrap();
        let set = CellSet::from_cells(3, [c]).unwrap();
        let h = convex_hull(&set).unwrap();
        assert!(h.area >= c.area() - 1e-12);
        for p in c.boundary_points(200) {
            assert!(h.polygon.contains(&p), "{p:?}");
        }
    }

    #[test]
    fn southern_cell_hull_contains_cell() {
        let c = DyadicCell::new(3, 12, 1).unwrap();
        let h = convex_hull(&CellSet::from_cells(3, [c]).unwrap()).unwrap();
        for p in c.boundary_points(200) {
            assert!(h.polygon.contains(&p));
        }
    }

    #[test]
    fn meridian_strip() {
        let s = CellSet::from_pairs(3, [(3, 2), (4, 2), (5, 2)]).unwrap();
        let h = convex_hull(&s).unwrap();
        assert!(h.area >= s.measure());
    }

    #[test]
    fn double_cap_level_three() {
        let r = conv(&double_cap_cellset(3).unwrap()).unwrap();
        assert_eq!(r.polygons, 2);
        assert!(r.violations.is_empty());
        assert!(r.polygon_measure >= r.cell_measure);
        assert!(conv1(&CellSet::empty(3)).unwrap().decomposition.is_empty());
    }

    #[test]
    fn touching_triangles_merge() {
        let v = UnitVector::from_polar(0.8, 0.4);
        let t1 = ConvexPolygon::new(vec![v, UnitVector::from_polar(0.6, 0.2), UnitVector::from_polar(0.6, 0.6)]).unwrap();
        let t2 = ConvexPolygon::new(vec![v, UnitVector::from_polar(1.0, 0.6), UnitVector::from_polar(1.0, 0.2)]).unwrap();
        let far = ConvexPolygon::new(vec![
            UnitVector::from_polar(0.3, 3.0),
            UnitVector::from_polar(0.4, 3.2),
            UnitVector::from_polar(0.2, 3.3),
        ])
        .unwrap();
        let d = ConvexDecomposition::new(vec![t1, far.clone(), t2]);
        let r = conv2(&d, MERGE_TOL).unwrap();
        assert_eq!(r.decomposition.len(), 2);
        assert_eq!(r.merges.len(), 1);
        let again = conv2(&r.decomposition, MERGE_TOL).unwrap();
        assert!(again.merges.is_empty());
        assert_eq!(again.decomposition.polygons, r.decomposition.polygons);
    }

    #[test]
    fn hausdorff_of_concentric_polygons() {
        let mk = |r: f64| {
            let f = GnomonicFrame::new(UnitVector::from_polar(0.5, 1.0));
            let t = r.tan();
            let pts: Vec<_> = (0..720)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / 720.0;
                    f.unproject([t * a.cos(), t * a.sin()])
                })
                .collect();
            ConvexPolygon::hull_of(&pts).unwrap()
        };
        let (a, b) = (mk(0.2), mk(0.35));
        let d = hausdorff_distance(&a, &b, 4);
        assert!((d - 0.15).abs() < 1e-4, "{d}");
        assert_eq!(d, hausdorff_distance(&b, &a, 4));
        assert_eq!(hausdorff_distance(&a, &a, 4), 0.0);
    }

    #[test]
    fn triangle_lemma_flags_wide_polygon() {
        let narrow = ConvexDecomposition::new(vec![ConvexPolygon::new(vec![
            UnitVector::from_polar(0.2, 0.0),
            UnitVector::from_polar(0.2, 2.0),
            UnitVector::from_polar(0.2, 4.0),
        ])
        .unwrap()]);
        assert!(check_triangle_lemma(&narrow, 500, 1).violations.is_empty());
        assert!(check_pasch(&narrow, 500, 1).violations.is_empty());
        let wide = ConvexDecomposition::new(vec![ConvexPolygon::new(vec![
            UnitVector::from_polar(1.2, 0.0),
            UnitVector::from_polar(1.2, 2.0),
            UnitVector::from_polar(1.2, 4.0),
        ])
        .unwrap()]);
        let r = check_triangle_lemma(&wide, 500, 1);
        assert!(r.violations.iter().any(|w| w.clause == "distance"));
        assert!(check_triangle_lemma(&ConvexDecomposition::empty(), 10, 1).violations.is_empty());
    }
}
