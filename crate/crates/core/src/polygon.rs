//! Convex geodesic polygons contained in an open hemisphere.
//!
//! A polygon keeps its vertices counterclockwise (seen from outside the
//! sphere) together with a hemisphere witness and its gnomonic image around
//! that witness. Containment is a planar binary search; distance queries
//! prune edge runs with bounding caps so that hulls with tens of thousands of
//! boundary vertices stay cheap.

use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{
    cross3, dot3, geodesic_distance, norm, point_arc_distance, slerp, spherical_polygon_area,
    GnomonicFrame, UnitVector, PREDICATE_TOL,
};

/// Most edges in a leaf of the bounding-cap tree.
const LEAF: usize = 8;

/// Node of a binary tree of bounding caps over runs of consecutive edges.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CapNode {
    center: UnitVector,
    radius: f64,
    /// First edge index of the run.
    start: usize,
    /// One past the last edge index.
    end: usize,
    children: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolygonDoc", into = "PolygonDoc")]
pub struct ConvexPolygon {
    vertices: Vec<UnitVector>,
    hemisphere_center: UnitVector,
    frame: GnomonicFrame,
    planar: Vec<[f64; 2]>,
    /// Root at index 0.
    tree: Vec<CapNode>,
}

#[derive(Serialize, Deserialize)]
struct PolygonDoc {
    vertices: Vec<UnitVector>,
    hemisphere_center: UnitVector,
}

impl TryFrom<PolygonDoc> for ConvexPolygon {
    type Error = Error;

    fn try_from(doc: PolygonDoc) -> Result<Self> {
        ConvexPolygon::with_center(doc.vertices, doc.hemisphere_center)
    }
}

impl From<ConvexPolygon> for PolygonDoc {
    fn from(p: ConvexPolygon) -> Self {
        PolygonDoc { vertices: p.vertices, hemisphere_center: p.hemisphere_center }
    }
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Indices of the planar convex hull, counterclockwise, collinear points dropped.
pub(crate) fn planar_hull(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && cross2(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= lower && cross2(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

fn bounding_cap(points: &[UnitVector], start: usize, end: usize) -> CapNode {
    let mut s = [0.0; 3];
    for p in points {
        s[0] += p.x();
        s[1] += p.y();
        s[2] += p.z();
    }
    let center = UnitVector::from_array(s).unwrap_or(points[0]);
    let mut radius = points.iter().map(|p| geodesic_distance(&center, p)).fold(0.0, f64::max);
    // Caps wider than a hemisphere are not convex, so they bound nothing useful.
    radius = if radius < FRAC_PI_2 - 1e-6 { radius + 1e-12 } else { PI };
    CapNode { center, radius, start, end, children: None }
}

/// Builds the subtree over edges `start..end`, returning its index.
fn build_tree(vertices: &[UnitVector], start: usize, end: usize, tree: &mut Vec<CapNode>) -> u32 {
    let n = vertices.len();
    let pts: Vec<UnitVector> = (start..=end).map(|i| vertices[i % n]).collect();
    let at = tree.len();
    tree.push(bounding_cap(&pts, start, end));
    if end - start > LEAF {
        let mid = start + (end - start) / 2;
        let l = build_tree(vertices, start, mid, tree);
        let r = build_tree(vertices, mid, end, tree);
        tree[at].children = Some((l, r));
    }
    at as u32
}

/// Heap entry ordered by ascending lower bound.
struct Pending<T> {
    bound: f64,
    item: T,
}

impl<T> PartialEq for Pending<T> {
    fn eq(&self, other: &Self) -> bool {
        self.bound.total_cmp(&other.bound).is_eq()
    }
}

impl<T> Eq for Pending<T> {}

impl<T> PartialOrd for Pending<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Pending<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.bound.total_cmp(&self.bound)
    }
}

impl ConvexPolygon {
    /// Polygon from vertices already in convex position (either orientation).
    ///
    /// Consecutive duplicates and collinear-redundant vertices are dropped; a
    /// reflex vertex is an error.
    pub fn new(vertices: Vec<UnitVector>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::MalformedPolygon("no vertices".into()));
        }
        let center = crate::sphere::hemisphere_witness(&vertices)
            .ok_or_else(|| Error::MalformedPolygon("vertices are not in one open hemisphere".into()))?;
        Self::with_center(vertices, center)
    }

    /// As [`ConvexPolygon::new`] with an explicit hemisphere witness.
    pub fn with_center(vertices: Vec<UnitVector>, center: UnitVector) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::MalformedPolygon("no vertices".into()));
        }
        let min_dot = (1e-9f64).sin();
        if let Some(v) = vertices.iter().find(|v| center.dot(v) <= min_dot) {
            return Err(Error::MalformedPolygon(format!(
                "vertex {:?} is not within π/2 − 1e−9 of the hemisphere witness",
                v.to_array()
            )));
        }
        let frame = GnomonicFrame::new(center);
        let planar: Vec<[f64; 2]> = vertices.iter().map(|v| frame.project(v)).collect::<Result<_>>()?;
        let hull = planar_hull(&planar);
        let mut distinct = vertices.clone();
        distinct.dedup();
        if distinct.len() > 1 && distinct.first() == distinct.last() {
            distinct.pop();
        }
        if hull.len() >= 3 {
            // Every input vertex must be on the hull boundary (possibly collinear).
            let hp: Vec<[f64; 2]> = hull.iter().map(|&i| planar[i]).collect();
            let scale = hp.iter().map(|q| q[0].abs().max(q[1].abs())).fold(1.0, f64::max);
            for (i, q) in planar.iter().enumerate() {
                if hull.contains(&i) {
                    continue;
                }
                let on_boundary = (0..hp.len()).any(|e| {
                    let a = hp[e];
                    let b = hp[(e + 1) % hp.len()];
                    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt().max(1e-300);
                    (cross2(a, b, *q) / len).abs() <= 1e-9 * scale
                });
                if !on_boundary {
                    return Err(Error::MalformedPolygon(format!("vertex {i} is not in convex position")));
                }
            }
        }
        // Keep the caller's starting vertex so that re-validation is idempotent.
        let mut hull = hull;
        if let Some(k) = hull.iter().enumerate().min_by_key(|(_, &i)| i).map(|(k, _)| k) {
            hull.rotate_left(k);
        }
        let verts: Vec<UnitVector> = hull.iter().map(|&i| vertices[i]).collect();
        Ok(Self::build(verts, center, frame))
    }

    /// Convex hull of a point cloud lying in an open hemisphere.
    pub fn hull_of(points: &[UnitVector]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::MalformedPolygon("empty point set".into()));
        }
        let center = crate::sphere::hemisphere_witness(points).ok_or_else(|| {
            Error::HullInfeasible("points are not contained in one open hemisphere".into())
        })?;
        let min_dot = (1e-9f64).sin();
        if points.iter().any(|p| center.dot(p) <= min_dot) {
            return Err(Error::HullInfeasible("points reach the boundary of the witness hemisphere".into()));
        }
        let frame = GnomonicFrame::new(center);
        let planar: Vec<[f64; 2]> = points.iter().map(|v| frame.project(v)).collect::<Result<_>>()?;
        let hull = planar_hull(&planar);
        let verts: Vec<UnitVector> = hull.iter().map(|&i| points[i]).collect();
        Ok(Self::build(verts, center, frame))
    }

    fn build(vertices: Vec<UnitVector>, center: UnitVector, frame: GnomonicFrame) -> Self {
        let planar: Vec<[f64; 2]> = vertices
            .iter()
            .map(|v| frame.project(v).expect("vertices were checked against the witness"))
            .collect();
        let n = vertices.len();
        let m = edge_count(n);
        let mut tree = Vec::with_capacity(2 * m / LEAF + 2);
        build_tree(&vertices, 0, m, &mut tree);
        Self { vertices, hemisphere_center: center, frame, planar, tree }
    }

    pub fn vertices(&self) -> &[UnitVector] {
        &self.vertices
    }

    pub fn hemisphere_center(&self) -> UnitVector {
        self.hemisphere_center
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Bounding cap (center, radius) containing the whole polygon.
    pub fn bounding_cap(&self) -> (UnitVector, f64) {
        (self.tree[0].center, self.tree[0].radius)
    }

    fn edge(&self, i: usize) -> (&UnitVector, &UnitVector) {
        let n = self.vertices.len();
        (&self.vertices[i % n], &self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (UnitVector, UnitVector)> + '_ {
        (0..edge_count(self.vertices.len())).map(|i| {
            let (a, b) = self.edge(i);
            (*a, *b)
        })
    }

    pub fn area(&self) -> f64 {
        if self.vertices.len() < 3 {
            0.0
        } else {
            spherical_polygon_area(&self.vertices).unwrap_or(0.0)
        }
    }

    /// Closed containment.
    pub fn contains(&self, p: &UnitVector) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return self.boundary_distance(p) <= 1e-12;
        }
        if self.hemisphere_center.dot(p) <= 0.0 {
            return false;
        }
        let q = match self.frame.project(p) {
            Ok(q) => q,
            Err(_) => return false,
        };
        let v = &self.planar;
        let scale = 1e-12 * (1.0 + q[0].abs() + q[1].abs());
        if cross2(v[0], v[1], q) < -scale || cross2(v[0], v[n - 1], q) > scale {
            return false;
        }
        // Find the fan wedge v0, v[i], v[i+1] containing q.
        let (mut lo, mut hi) = (1, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if cross2(v[0], v[mid], q) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cross2(v[lo], v[hi], q) >= -scale
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: &UnitVector) -> f64 {
        let mut heap = BinaryHeap::new();
        heap.push(Pending { bound: f64::NEG_INFINITY, item: 0u32 });
        let mut best = f64::INFINITY;
        while let Some(Pending { bound, item }) = heap.pop() {
            if bound >= best {
                break;
            }
            let node = &self.tree[item as usize];
            match node.children {
                Some((l, r)) => {
                    for k in [l, r] {
                        let c = &self.tree[k as usize];
                        let lb = geodesic_distance(&c.center, p) - c.radius;
                        if lb < best {
                            heap.push(Pending { bound: lb, item: k });
                        }
                    }
                }
                None => {
                    for e in node.start..node.end {
                        let (a, b) = self.edge(e);
                        best = best.min(point_arc_distance(p, a, b));
                    }
                }
            }
        }
        best
    }

    /// Distance from `p` to the polygon (0 inside).
    pub fn distance_to_point(&self, p: &UnitVector) -> f64 {
        if self.vertices.len() >= 3 && self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    /// Image under p ↦ −p, counterclockwise again.
    pub fn antipode(&self) -> ConvexPolygon {
        let mut verts: Vec<UnitVector> = self.vertices.iter().map(|v| v.antipode()).collect();
        verts.reverse();
        let center = self.hemisphere_center.antipode();
        Self::build(verts, center, GnomonicFrame::new(center))
    }

    /// Greatest distance between two points of the polygon.
    pub fn diameter(&self) -> f64 {
        max_distance(self, self)
    }

    /// Boundary points: every vertex plus `per_edge − 1` interior points per edge.
    pub fn boundary_samples(&self, per_edge: usize) -> Vec<UnitVector> {
        let per_edge = per_edge.max(1);
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            for i in 0..per_edge {
                out.push(slerp(&a, &b, i as f64 / per_edge as f64));
            }
        }
        if self.vertices.len() == 2 {
            out.push(self.vertices[1]);
        }
        if out.is_empty() {
            out.push(self.vertices[0]);
        }
        out
    }

    /// Uniform point inside the polygon (rejection from the bounding cap).
    /// Returns `None` for degenerate polygons or after `max_tries` misses.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R, max_tries: usize) -> Option<UnitVector> {
        if self.vertices.len() < 3 {
            return None;
        }
        let (c, r) = (self.tree[0].center, self.tree[0].radius.min(FRAC_PI_2));
        let frame = GnomonicFrame::new(c);
        let zmin = r.cos();
        for _ in 0..max_tries {
            let z: f64 = rng.gen_range(zmin..=1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let local = UnitVector::from_cos_theta(z, phi);
            // Rotate the sampled point from the north pole frame to the cap frame.
            let t = (1.0 - z * z).max(0.0).sqrt() / z;
            let p = if z > 1e-12 {
                frame.unproject([t * phi.cos(), t * phi.sin()])
            } else {
                local
            };
            if self.contains(&p) {
                return Some(p);
            }
        }
        None
    }
}

fn edge_count(n: usize) -> usize {
    match n {
        0 => 0,
        1 | 2 => 1,
        _ => n,
    }
}

/// Whether the minor arcs `ab` and `cd` share a point.
pub(crate) fn arcs_cross(a: &UnitVector, b: &UnitVector, c: &UnitVector, d: &UnitVector) -> bool {
    let n1 = a.cross(b);
    let n2 = c.cross(d);
    if norm(n1) < 1e-15 || norm(n2) < 1e-15 {
        return false;
    }
    let sc = c.dot_raw(n1);
    let sd = d.dot_raw(n1);
    let sa = a.dot_raw(n2);
    let sb = b.dot_raw(n2);
    if sc * sd > 0.0 || sa * sb > 0.0 {
        return false;
    }
    let x = cross3(n1, n2);
    if norm(x) < 1e-15 {
        // Same great circle: overlap shows up as a zero vertex–edge distance.
        return false;
    }
    let on = |p: [f64; 3], u: &UnitVector, v: &UnitVector, n: [f64; 3]| {
        dot3(cross3(u.to_array(), p), n) >= 0.0 && dot3(cross3(p, v.to_array()), n) >= 0.0
    };
    let mx = [-x[0], -x[1], -x[2]];
    (on(x, a, b, n1) && on(x, c, d, n2)) || (on(mx, a, b, n1) && on(mx, c, d, n2))
}

fn caps_apart(a: &CapNode, b: &CapNode) -> f64 {
    geodesic_distance(&a.center, &b.center) - a.radius - b.radius
}

fn edges_cross(p: &ConvexPolygon, q: &ConvexPolygon, i: usize, j: usize) -> bool {
    let a = &p.tree[i];
    let b = &q.tree[j];
    if caps_apart(a, b) > 0.0 {
        return false;
    }
    match (a.children, b.children) {
        (None, None) => (a.start..a.end).any(|e| {
            let (u, v) = p.edge(e);
            (b.start..b.end).any(|f| {
                let (w, x) = q.edge(f);
                arcs_cross(u, v, w, x)
            })
        }),
        (Some((l, r)), None) => edges_cross(p, q, l as usize, j) || edges_cross(p, q, r as usize, j),
        (None, Some((l, r))) => edges_cross(p, q, i, l as usize) || edges_cross(p, q, i, r as usize),
        (Some((l, r)), Some((x, y))) => {
            if a.radius >= b.radius {
                edges_cross(p, q, l as usize, j) || edges_cross(p, q, r as usize, j)
            } else {
                edges_cross(p, q, i, x as usize) || edges_cross(p, q, i, y as usize)
            }
        }
    }
}

/// Whether the closed polygons share a point.
pub fn intersects(p: &ConvexPolygon, q: &ConvexPolygon) -> bool {
    // Without crossing boundaries the polygons are disjoint or nested, and
    // nesting shows up at any single vertex.
    if p.vertices.len() >= 3 && p.contains(&q.vertices[0]) {
        return true;
    }
    if q.vertices.len() >= 3 && q.contains(&p.vertices[0]) {
        return true;
    }
    edges_cross(p, q, 0, 0)
}

/// Vertices of one leaf run against the edges of the other, both ways.
fn leaf_distance(p: &ConvexPolygon, a: &CapNode, q: &ConvexPolygon, b: &CapNode, mut best: f64) -> f64 {
    let mut scan = |x: &ConvexPolygon, xa: &CapNode, y: &ConvexPolygon, yb: &CapNode| {
        let n = x.vertices.len();
        for vi in xa.start..=xa.end {
            let v = &x.vertices[vi % n];
            if geodesic_distance(v, &yb.center) - yb.radius >= best {
                continue;
            }
            for e in yb.start..yb.end {
                let (s, t) = y.edge(e);
                best = best.min(point_arc_distance(v, s, t));
            }
        }
    };
    scan(p, a, q, b);
    scan(q, b, p, a);
    best
}

/// Best-first search for the smallest boundary distance. Stops as soon as a
/// pair at distance `<= stop_at` is found, or once every remaining pair is
/// provably farther than `give_up`.
fn boundary_gap(p: &ConvexPolygon, q: &ConvexPolygon, stop_at: f64, give_up: f64) -> f64 {
    let mut heap = BinaryHeap::new();
    heap.push(Pending { bound: caps_apart(&p.tree[0], &q.tree[0]), item: (0u32, 0u32) });
    let mut best = f64::INFINITY;
    while let Some(Pending { bound, item: (i, j) }) = heap.pop() {
        if bound >= best || bound > give_up {
            break;
        }
        let a = &p.tree[i as usize];
        let b = &q.tree[j as usize];
        let split_p = match (a.children, b.children) {
            (None, None) => {
                best = leaf_distance(p, a, q, b, best);
                if best <= stop_at {
                    break;
                }
                continue;
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(_), Some(_)) => a.radius >= b.radius,
        };
        let kids: [(u32, u32); 2] = if split_p {
            let (l, r) = a.children.unwrap();
            [(l, j), (r, j)]
        } else {
            let (l, r) = b.children.unwrap();
            [(i, l), (i, r)]
        };
        for (x, y) in kids {
            let lb = caps_apart(&p.tree[x as usize], &q.tree[y as usize]);
            if lb < best && lb <= give_up {
                heap.push(Pending { bound: lb, item: (x, y) });
            }
        }
    }
    best
}

/// Smallest geodesic distance between two polygons; 0 iff their closures meet.
pub fn polygon_distance(p: &ConvexPolygon, q: &ConvexPolygon) -> f64 {
    if intersects(p, q) {
        return 0.0;
    }
    boundary_gap(p, q, f64::NEG_INFINITY, f64::INFINITY)
}

/// Whether `polygon_distance(p, q) <= t`, without computing the distance exactly.
pub fn distance_at_most(p: &ConvexPolygon, q: &ConvexPolygon, t: f64) -> bool {
    if intersects(p, q) {
        return true;
    }
    boundary_gap(p, q, t, t) <= t
}

/// Whether `max_distance(p, q) >= t`.
pub fn max_distance_at_least(p: &ConvexPolygon, q: &ConvexPolygon, t: f64) -> bool {
    distance_at_most(p, &q.antipode(), PI - t)
}

/// Largest geodesic distance between a point of `p` and a point of `q`.
pub fn max_distance(p: &ConvexPolygon, q: &ConvexPolygon) -> f64 {
    PI - polygon_distance(p, &q.antipode())
}

/// Directed Hausdorff distance sup_{x ∈ p} d(x, q), evaluated on boundary samples of `p`.
pub fn directed_hausdorff(p: &ConvexPolygon, q: &ConvexPolygon, per_edge: usize) -> f64 {
    p.boundary_samples(per_edge)
        .iter()
        .map(|x| q.distance_to_point(x))
        .fold(0.0, f64::max)
}

/// Distance tolerance used when deciding that two polygons touch.
pub const TOUCH_TOL: f64 = PREDICATE_TOL;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sample_uniform, seeded_rng};

    fn polar_polygon(center_theta: f64, center_phi: f64, radius: f64, n: usize) -> ConvexPolygon {
        let c = UnitVector::from_polar(center_theta, center_phi);
        let frame = GnomonicFrame::new(c);
        let t = radius.tan();
        let verts = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                frame.unproject([t * a.cos(), t * a.sin()])
            })
            .collect();
        ConvexPolygon::new(verts).unwrap()
    }

    #[test]
    fn octant_triangle_basics() {
        let tri = ConvexPolygon::new(vec![
            UnitVector::new(1.0, 0.0, 0.0).unwrap(),
            UnitVector::new(0.0, 1.0, 0.0).unwrap(),
            UnitVector::new(0.0, 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        assert!((tri.area() - FRAC_PI_2).abs() < 1e-12);
        assert!(tri.contains(&UnitVector::new(1.0, 1.0, 1.0).unwrap()));
        assert!(!tri.contains(&UnitVector::new(-1.0, 1.0, 1.0).unwrap()));
        assert!((tri.diameter() - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn reflex_vertex_rejected() {
        let verts = vec![
            UnitVector::from_polar(0.3, 0.0),
            UnitVector::from_polar(0.05, 1.0),
            UnitVector::from_polar(0.3, 2.0),
            UnitVector::from_polar(0.3, 4.0),
        ];
        // Vertex 1 is pulled towards the middle and is reflex.
        assert!(ConvexPolygon::new(verts).is_err());
    }

    #[test]
    fn collinear_vertices_dropped() {
        let a = UnitVector::from_polar(FRAC_PI_2, 0.0);
        let b = UnitVector::from_polar(FRAC_PI_2, 0.5);
        let mid = UnitVector::from_polar(FRAC_PI_2, 0.25);
        let top = UnitVector::from_polar(1.2, 0.25);
        let p = ConvexPolygon::new(vec![a, mid, b, top]).unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn distance_examples() {
        let p = polar_polygon(0.3, 0.0, 0.1, 5);
        assert_eq!(polygon_distance(&p, &p), 0.0);

        let shared = UnitVector::from_polar(0.8, 0.4);
        let t1 = ConvexPolygon::new(vec![shared, UnitVector::from_polar(0.6, 0.2), UnitVector::from_polar(0.6, 0.6)]).unwrap();
        let t2 = ConvexPolygon::new(vec![shared, UnitVector::from_polar(1.0, 0.6), UnitVector::from_polar(1.0, 0.2)]).unwrap();
        assert!(polygon_distance(&t1, &t2) < 1e-12);

        let north = polar_polygon(0.1, 0.0, 0.2, 7);
        let south = polar_polygon(PI - 0.1, 2.0, 0.2, 7);
        let d = polygon_distance(&north, &south);
        assert!(d >= PI - 2.0 * std::f64::consts::FRAC_PI_4);
        // Dense sampling oracle.
        let mut rng = seeded_rng(5, 0);
        let a: Vec<_> = (0..300).map(|_| north.sample_interior(&mut rng, 10_000).unwrap()).chain(north.boundary_samples(40)).collect();
        let b: Vec<_> = (0..300).map(|_| south.sample_interior(&mut rng, 10_000).unwrap()).chain(south.boundary_samples(40)).collect();
        let mut sampled = f64::INFINITY;
        for x in &a {
            for y in &b {
                sampled = sampled.min(geodesic_distance(x, y));
            }
        }
        assert!(sampled >= d - 1e-12);
        assert!(sampled - d < 1e-3);
    }

    #[test]
    fn crossing_quads_intersect() {
        // Two thin rectangles crossing like a plus sign: no vertex inside the other.
        let f = GnomonicFrame::new(UnitVector::NORTH);
        let rect = |w: f64, h: f64| {
            ConvexPolygon::new(vec![
                f.unproject([-w, -h]),
                f.unproject([w, -h]),
                f.unproject([w, h]),
                f.unproject([-w, h]),
            ])
            .unwrap()
        };
        let a = rect(0.3, 0.01);
        let b = rect(0.01, 0.3);
        assert_eq!(polygon_distance(&a, &b), 0.0);
    }

    #[test]
    fn point_polygons() {
        let a = ConvexPolygon::new(vec![UnitVector::NORTH]).unwrap();
        let b = ConvexPolygon::new(vec![UnitVector::new(1.0, 0.0, 0.0).unwrap()]).unwrap();
        assert!((polygon_distance(&a, &b) - FRAC_PI_2).abs() < 1e-15);
        assert!((max_distance(&a, &b) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(a.diameter(), 0.0);
    }

    #[test]
    fn containment_agrees_with_edge_sides() {
        let p = polar_polygon(1.0, 2.0, 0.4, 9);
        let mut rng = seeded_rng(8, 1);
        for _ in 0..5000 {
            let x = sample_uniform(&mut rng);
            let by_sides = p.edges().all(|(a, b)| x.dot_raw(a.cross(&b)) >= 0.0);
            assert_eq!(p.contains(&x), by_sides);
        }
    }

    #[test]
    fn serde_roundtrip() {
        let p = polar_polygon(0.5, 0.5, 0.2, 6);
        let s = serde_json::to_string(&p).unwrap();
        let back: ConvexPolygon = serde_json::from_str(&s).unwrap();
        assert_eq!(back.vertices(), p.vertices());
    }

    #[test]
    fn hull_of_cloud() {
        let mut rng = seeded_rng(2, 2);
        let c = UnitVector::from_polar(0.7, 1.0);
        let cloud: Vec<_> = std::iter::repeat_with(|| sample_uniform(&mut rng))
            .filter(|p| geodesic_distance(p, &c) < 0.3)
            .take(200)
            .collect();
        let h = ConvexPolygon::hull_of(&cloud).unwrap();
        assert!(cloud.iter().all(|p| h.contains(p)));
        assert!(h.len() < cloud.len());
    }
}
