//! Orthogonality conflicts between cells and polygons.
//!
//! Two closed regions conflict when they contain points `u`, `v` with
//! `u · v = 0`. For θ/φ boxes the range of `u · v` is computed in closed form:
//! with `C = cos Δφ`, the inner product `cos θ₁ cos θ₂ + C sin θ₁ sin θ₂` is
//! monotone in `C`, so the upper end uses the largest achievable `C` and the
//! lower end the smallest. For fixed `C` the extremes over the θ box sit at
//! corners, at edge stationary points, or at (π/2, π/2).
//!
//! Cell φ offsets are handled in integer multiples of `π·2^(−k)` so that
//! quarter turns give exact zeros; otherwise a level-1 equatorial cell would
//! miss its own orthogonal pair by a rounding error.
//!
//! The level-`k` conflict graph is invariant under rotation by one sector, so
//! it is stored as a bit table indexed by `(band₁, band₂, sector offset)`.
//!
//! # Cache format
//!
//! Little-endian throughout:
//!
//! ```text
//! magic      b"OFCG"
//! version    u32 (= 1)
//! level      u32
//! margin     f64
//! checksum   32 bytes, SHA-256 of everything after it
//! n_self     u64, then n_self × u32 self-conflicting ordinals (ascending)
//! n_edges    u64, then n_edges × (u32, u32) pairs a < b (ascending)
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{divisions, CellSet, DyadicCell, Interval, MAX_LEVEL};
use crate::polygon::{distance_at_most, max_distance, max_distance_at_least, polygon_distance, ConvexPolygon};

/// Levels above this need an explicit override.
pub const DEFAULT_MAX_GRAPH_LEVEL: u32 = 7;

const MAGIC: &[u8; 4] = b"OFCG";
const VERSION: u32 = 1;

/// Closed range of inner products between two regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotRange {
    pub lo: f64,
    pub hi: f64,
}

impl DotRange {
    /// Whether `[lo − margin, hi + margin]` contains 0.
    pub fn contains_zero(&self, margin: f64) -> bool {
        self.lo - margin <= 0.0 && 0.0 <= self.hi + margin
    }

    pub fn contains(&self, other: &DotRange) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// A closed region `cos θ ∈ cos_theta`, `φ ∈ phi` (φ may exceed 2π; it is
/// only used through differences).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularBox {
    pub cos_theta: Interval,
    pub phi: Interval,
}

impl AngularBox {
    pub fn from_cell(cell: &DyadicCell) -> Self {
        Self { cos_theta: cell.cos_theta_bounds(), phi: cell.phi_bounds() }
    }
}

/// One side of the θ box, carried as cosines with their angles.
#[derive(Debug, Clone, Copy)]
struct ThetaSpan {
    /// (cos θ, sin θ) at the smaller colatitude.
    near: (f64, f64),
    /// (cos θ, sin θ) at the larger colatitude.
    far: (f64, f64),
    th_lo: f64,
    th_hi: f64,
}

impl ThetaSpan {
    fn new(cos: Interval) -> Self {
        let hi = cos.hi.clamp(-1.0, 1.0);
        let lo = cos.lo.clamp(-1.0, 1.0);
        Self {
            near: (hi, (1.0 - hi * hi).max(0.0).sqrt()),
            far: (lo, (1.0 - lo * lo).max(0.0).sqrt()),
            th_lo: hi.acos(),
            th_hi: lo.acos(),
        }
    }

    fn contains(&self, t: f64) -> bool {
        self.th_lo <= t && t <= self.th_hi
    }
}

/// Min and max of `a₁a₂ + c·s₁s₂` over the θ box for a fixed `c`.
fn theta_extremes(t1: &ThetaSpan, t2: &ThetaSpan, c: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut take = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    for e1 in [t1.near, t1.far] {
        for e2 in [t2.near, t2.far] {
            take(e1.0 * e2.0 + c * e1.1 * e2.1);
        }
    }
    // Along an edge with one angle fixed at (a, s), the other angle sees
    // R·cos(θ − ψ) with ψ = atan2(c·s, a).
    let mut edge = |fixed: (f64, f64), free: &ThetaSpan| {
        let (a, s) = fixed;
        let r = (a * a + c * c * s * s).sqrt();
        let psi = (c * s).atan2(a);
        if free.contains(psi) {
            take(r);
        }
        let opp = if psi < 0.0 { psi + PI } else { psi - PI };
        if free.contains(opp) {
            take(-r);
        }
    };
    for e2 in [t2.near, t2.far] {
        edge(e2, t1);
    }
    for e1 in [t1.near, t1.far] {
        edge(e1, t2);
    }
    if t1.contains(FRAC_PI_2) && t2.contains(FRAC_PI_2) {
        take(c);
    }
    (lo, hi)
}

fn range_from(t1: &ThetaSpan, t2: &ThetaSpan, cmin: f64, cmax: f64) -> DotRange {
    let (_, hi) = theta_extremes(t1, t2, cmax);
    let (lo, _) = theta_extremes(t1, t2, cmin);
    DotRange { lo: lo.clamp(-1.0, 1.0), hi: hi.clamp(-1.0, 1.0) }
}

/// (min cos, max cos) over the closed interval `[lo, hi]` of angle differences.
fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.cos(), hi.cos());
    let cmax = if (hi / TAU).floor() * TAU >= lo { 1.0 } else { a.max(b) };
    let cmin = if ((hi - PI) / TAU).floor() * TAU + PI >= lo { -1.0 } else { a.min(b) };
    (cmin, cmax)
}

/// Cosine of `u·π/2^level`, exact at multiples of π/2.
fn cos_units(u: i64, level: u32) -> f64 {
    let half = 1i64 << level;
    let r = u.rem_euclid(2 * half);
    if r == 0 {
        1.0
    } else if r == half {
        -1.0
    } else if level >= 1 && (r == half / 2 || r == 3 * half / 2) {
        0.0
    } else {
        (r as f64 * PI / half as f64).cos()
    }
}

/// Same as [`cos_range`] for integer angles in units of π/2^level.
fn cos_range_units(lo: i64, hi: i64, level: u32) -> (f64, f64) {
    let half = 1i64 << level;
    let period = 2 * half;
    let (a, b) = (cos_units(lo, level), cos_units(hi, level));
    let cmax = if hi.div_euclid(period) * period >= lo { 1.0 } else { a.max(b) };
    let cmin = if (hi - half).div_euclid(period) * period + half >= lo { -1.0 } else { a.min(b) };
    (cmin, cmax)
}

/// Range of `u · v` over `u ∈ b1`, `v ∈ b2`.
pub fn dot_range_boxes(b1: &AngularBox, b2: &AngularBox) -> DotRange {
    let t1 = ThetaSpan::new(b1.cos_theta);
    let t2 = ThetaSpan::new(b2.cos_theta);
    let (cmin, cmax) = cos_range(b1.phi.lo - b2.phi.hi, b1.phi.hi - b2.phi.lo);
    range_from(&t1, &t2, cmin, cmax)
}

/// Range of `u · v` over the closed cells; levels may differ.
pub fn dot_range_cells(c1: &DyadicCell, c2: &DyadicCell) -> DotRange {
    let level = c1.level.max(c2.level);
    let w1 = 1i64 << (level - c1.level);
    let w2 = 1i64 << (level - c2.level);
    let (p1lo, p1hi) = (c1.sector as i64 * w1, (c1.sector as i64 + 1) * w1);
    let (p2lo, p2hi) = (c2.sector as i64 * w2, (c2.sector as i64 + 1) * w2);
    let (cmin, cmax) = cos_range_units(p1lo - p2hi, p1hi - p2lo, level);
    let t1 = ThetaSpan::new(c1.cos_theta_bounds());
    let t2 = ThetaSpan::new(c2.cos_theta_bounds());
    range_from(&t1, &t2, cmin, cmax)
}

/// Whether the closed cells contain an orthogonal pair, up to `margin` on the dot product.
pub fn cells_conflict(c1: &DyadicCell, c2: &DyadicCell, margin: f64) -> bool {
    dot_range_cells(c1, c2).contains_zero(margin)
}

/// Whether two closed boxes contain an orthogonal pair, up to `margin`.
pub fn boxes_conflict(b1: &AngularBox, b2: &AngularBox, margin: f64) -> bool {
    dot_range_boxes(b1, b2).contains_zero(margin)
}

/// `[cos(max distance), cos(min distance)]` between two polygons.
pub fn dot_range_polygons(p: &ConvexPolygon, q: &ConvexPolygon) -> DotRange {
    DotRange { lo: max_distance(p, q).cos(), hi: polygon_distance(p, q).cos() }
}

/// Whether two closed polygons contain an orthogonal pair. Agrees with
/// `dot_range_polygons(p, q).contains_zero(0.0)` but stops as soon as either
/// side of the test is settled.
pub fn polygons_conflict(p: &ConvexPolygon, q: &ConvexPolygon) -> bool {
    distance_at_most(p, q, FRAC_PI_2) && max_distance_at_least(p, q, FRAC_PI_2)
}

/// Conflict relation of one grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    level: u32,
    margin: f64,
    n: u32,
    /// Bit `(b₁·n + b₂)·n + d` set iff `(b₁, s)` conflicts with `(b₂, s + d)`.
    table: Vec<u64>,
    /// Sorted offsets `d` with the bit set, per `(b₁, b₂)`.
    offsets: Vec<Vec<u32>>,
}

fn check_level(level: u32, max_level: u32) -> Result<()> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidLevel(level as i64));
    }
    if level > max_level {
        return Err(Error::ResourceCap { level, max: max_level });
    }
    Ok(())
}

/// Conflict graph at `level` with the default level cap.
pub fn build_conflict_graph(level: u32, margin: f64) -> Result<ConflictGraph> {
    build_conflict_graph_capped(level, margin, DEFAULT_MAX_GRAPH_LEVEL)
}

/// Conflict graph at `level`, refusing levels above `max_level`.
pub fn build_conflict_graph_capped(level: u32, margin: f64, max_level: u32) -> Result<ConflictGraph> {
    check_level(level, max_level)?;
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Domain(format!("margin must be finite and ≥ 0, got {margin}")));
    }
    let n = divisions(level);
    let rows: Vec<Vec<bool>> = (0..n * n)
        .into_par_iter()
        .map(|row| {
            let (b1, b2) = (row / n, row % n);
            let c1 = DyadicCell { level, band: b1, sector: 0 };
            (0..n)
                .map(|d| cells_conflict(&c1, &DyadicCell { level, band: b2, sector: d }, margin))
                .collect()
        })
        .collect();
    let mut table = vec![0u64; ((n as usize).pow(3)).div_ceil(64)];
    for (row, bits) in rows.iter().enumerate() {
        for (d, &on) in bits.iter().enumerate() {
            if on {
                let i = row * n as usize + d;
                table[i / 64] |= 1 << (i % 64);
            }
        }
    }
    Ok(ConflictGraph::from_table(level, margin, table))
}

impl ConflictGraph {
    fn from_table(level: u32, margin: f64, table: Vec<u64>) -> Self {
        let n = divisions(level);
        let mut g = Self { level, margin, n, table, offsets: Vec::new() };
        g.offsets = (0..n * n)
            .map(|row| (0..n).filter(|&d| g.bit(row / n, row % n, d)).collect())
            .collect();
        g
    }

    fn bit(&self, b1: u32, b2: u32, d: u32) -> bool {
        let i = ((b1 * self.n + b2) * self.n + d) as usize;
        self.table[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn cell_count(&self) -> u32 {
        self.n * self.n
    }

    /// Whether cells with ordinals `a` and `b` conflict (`a == b` asks for a self-conflict).
    pub fn conflicts(&self, a: u32, b: u32) -> bool {
        let n = self.n;
        let (b1, s1, b2, s2) = (a / n, a % n, b / n, b % n);
        self.bit(b1, b2, (s2 + n - s1) % n)
    }

    pub fn is_self_conflicting(&self, a: u32) -> bool {
        self.conflicts(a, a)
    }

    /// Self-conflicting ordinals, ascending.
    pub fn self_conflicts(&self) -> Vec<u32> {
        (0..self.n)
            .filter(|&b| self.bit(b, b, 0))
            .flat_map(|b| (0..self.n).map(move |s| b * self.n + s))
            .collect()
    }

    /// Neighbors of `a` other than `a` itself, ascending.
    pub fn neighbors(&self, a: u32) -> Vec<u32> {
        let n = self.n;
        let (b1, s1) = (a / n, a % n);
        let mut out = Vec::new();
        for b2 in 0..n {
            let start = out.len();
            for &d in &self.offsets[(b1 * n + b2) as usize] {
                let v = b2 * n + (s1 + d) % n;
                if v != a {
                    out.push(v);
                }
            }
            out[start..].sort_unstable();
        }
        out
    }

    pub fn degree(&self, a: u32) -> usize {
        let n = self.n;
        let b1 = a / n;
        let total: usize = (0..n).map(|b2| self.offsets[(b1 * n + b2) as usize].len()).sum();
        total - usize::from(self.bit(b1, b1, 0))
    }

    pub fn edge_count(&self) -> u64 {
        let ordered: u64 = (0..self.n).map(|b| self.degree(b * self.n) as u64 * self.n as u64).sum();
        ordered / 2
    }

    /// Unordered edges `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.cell_count()).flat_map(move |a| {
            self.neighbors(a).into_iter().filter(move |&b| b > a).map(move |b| (a, b))
        })
    }

    /// Conflicting pairs inside `selection` (self-conflicts as `(a, a)`), ascending.
    pub fn violations(&self, selection: &CellSet) -> Result<Vec<(u32, u32)>> {
        if selection.level() != self.level {
            return Err(Error::Domain(format!(
                "selection is at level {}, graph at level {}",
                selection.level(),
                self.level
            )));
        }
        let ords = selection.ordinals();
        let mut out: Vec<(u32, u32)> = ords
            .par_iter()
            .enumerate()
            .flat_map_iter(|(i, &a)| {
                ords[i..].iter().filter(move |&&b| self.conflicts(a, b)).map(move |&b| (a, b))
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Histogram: `(degree, number of cells)` ascending by degree.
    pub fn degree_histogram(&self) -> Vec<(usize, u64)> {
        let mut h = std::collections::BTreeMap::new();
        for b in 0..self.n {
            *h.entry(self.degree(b * self.n)).or_insert(0u64) += self.n as u64;
        }
        h.into_iter().collect()
    }
}

/// Conventional cache file name for a level and margin inside `dir`.
pub fn cache_path(dir: &Path, level: u32, margin: f64) -> PathBuf {
    dir.join(format!("conflicts-L{level}-m{:016x}.bin", margin.to_bits()))
}

pub fn save_graph(g: &ConflictGraph, path: &Path) -> Result<()> {
    let mut payload = Vec::new();
    let selfs = g.self_conflicts();
    payload.extend_from_slice(&(selfs.len() as u64).to_le_bytes());
    for a in &selfs {
        payload.extend_from_slice(&a.to_le_bytes());
    }
    payload.extend_from_slice(&g.edge_count().to_le_bytes());
    for (a, b) in g.edges() {
        payload.extend_from_slice(&a.to_le_bytes());
        payload.extend_from_slice(&b.to_le_bytes());
    }
    let digest = Sha256::digest(&payload);
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&g.level.to_le_bytes())?;
        w.write_all(&g.margin.to_le_bytes())?;
        w.write_all(&digest)?;
        w.write_all(&payload)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        if self.pos + k > self.buf.len() {
            return Err(Error::CorruptCache("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_graph(path: &Path) -> Result<ConflictGraph> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::CorruptCache("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::CorruptCache(format!("unsupported version {version}")));
    }
    let level = c.u32()?;
    let margin = f64::from_bits(c.u64()?);
    let digest = c.take(32)?.to_vec();
    if Sha256::digest(&buf[c.pos..]).as_slice() != digest.as_slice() {
        return Err(Error::CorruptCache("checksum mismatch".into()));
    }
    if level > MAX_LEVEL {
        return Err(Error::CorruptCache(format!("level {level} out of range")));
    }
    let n = divisions(level);
    let cells = n * n;
    let mut table = vec![0u64; ((n as usize).pow(3)).div_ceil(64)];
    let mut set = |b1: u32, b2: u32, d: u32| {
        let i = ((b1 * n + b2) * n + d) as usize;
        table[i / 64] |= 1 << (i % 64);
    };
    let n_self = c.u64()?;
    let mut selfs = Vec::with_capacity(n_self.min(cells as u64) as usize);
    for _ in 0..n_self {
        let a = c.u32()?;
        if a >= cells || selfs.last().is_some_and(|&p| p >= a) {
            return Err(Error::CorruptCache("self-conflict list not ascending or out of range".into()));
        }
        selfs.push(a);
        set(a / n, a / n, 0);
    }
    let n_edges = c.u64()?;
    let mut prev: Option<(u32, u32)> = None;
    for _ in 0..n_edges {
        let (a, b) = (c.u32()?, c.u32()?);
        if a >= b || b >= cells || prev.is_some_and(|p| p >= (a, b)) {
            return Err(Error::CorruptCache("edge list not ascending or out of range".into()));
        }
        prev = Some((a, b));
        let (b1, s1, b2, s2) = (a / n, a % n, b / n, b % n);
        set(b1, b2, (s2 + n - s1) % n);
        set(b2, b1, (s1 + n - s2) % n);
    }
    if c.pos != buf.len() {
        return Err(Error::CorruptCache("trailing bytes".into()));
    }
    let g = ConflictGraph::from_table(level, margin, table);
    // The table form only represents rotation-invariant graphs; make sure
    // nothing was added when expanding the stored lists.
    if g.edge_count() != n_edges || g.self_conflicts() != selfs {
        return Err(Error::CorruptCache("edge list is not invariant under sector rotation".into()));
    }
    Ok(g)
}

/// Loads the graph at `path` if present and matching, otherwise calls `build` and
/// stores the result. Returns the graph and whether the cache was hit.
pub fn load_or_build<F>(path: &Path, level: u32, margin: f64, build: F) -> Result<(ConflictGraph, bool)>
where
    F: FnOnce() -> Result<ConflictGraph>,
{
    if path.exists() {
        let g = load_graph(path)?;
        if g.level == level && g.margin.to_bits() == margin.to_bits() {
            return Ok((g, true));
        }
    }
    let g = build()?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_graph(&g, path)?;
    Ok((g, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::UnitVector;

    fn cell(level: u32, band: u32, sector: u32) -> DyadicCell {
        DyadicCell::new(level, band, sector).unwrap()
    }

    /// Brute-force extremes over a grid in (θ₁, θ₂, φ₁, φ₂).
    fn grid_range(c1: &DyadicCell, c2: &DyadicCell, m: usize) -> (f64, f64) {
        let (t1, p1) = (c1.theta_bounds(), c1.phi_bounds());
        let (t2, p2) = (c2.theta_bounds(), c2.phi_bounds());
        let at = |i: &Interval, k: usize| i.lo + (i.hi - i.lo) * k as f64 / (m - 1) as f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..m {
            for b in 0..m {
                let u = UnitVector::from_polar(at(&t1, a), at(&p1, b));
                for c in 0..m {
                    for d in 0..m {
                        let v = UnitVector::from_polar(at(&t2, c), at(&p2, d));
                        let x = u.dot(&v);
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                }
            }
        }
        (lo, hi)
    }

    #[test]
    fn examples() {
        let r = dot_range_cells(&cell(1, 0, 0), &cell(1, 3, 0));
        assert!((r.lo + 1.0).abs() < 1e-12 && (r.hi - 0.5).abs() < 1e-12, "{r:?}");
        assert!(cells_conflict(&cell(1, 1, 0), &cell(1, 1, 0), 0.0));
        assert!(cells_conflict(&cell(2, 0, 3), &cell(2, 3, 3), 0.0));
        assert!(!cells_conflict(&cell(3, 0, 0), &cell(3, 1, 5), 0.0));
        for level in 0..4 {
            let n = divisions(level);
            for b in 0..n {
                for s in 0..n {
                    assert_eq!(dot_range_cells(&cell(level, b, s), &cell(level, b, s)).hi, 1.0);
                }
            }
        }
    }

    #[test]
    fn point_boxes() {
        let a = AngularBox { cos_theta: Interval::new(1.0, 1.0), phi: Interval::new(0.0, 0.0) };
        let b = AngularBox { cos_theta: Interval::new(0.0, 0.0), phi: Interval::new(0.0, 0.0) };
        let r = dot_range_boxes(&a, &b);
        assert_eq!((r.lo, r.hi), (0.0, 0.0));
    }

    #[test]
    fn agrees_with_grid_on_small_levels() {
        for level in 0..=2 {
            let n = divisions(level);
            for b1 in 0..n {
                for b2 in 0..n {
                    for s2 in 0..n {
                        let (c1, c2) = (cell(level, b1, 0), cell(level, b2, s2));
                        let r = dot_range_cells(&c1, &c2);
                        let (glo, ghi) = grid_range(&c1, &c2, 13);
                        assert!(r.lo <= glo + 1e-12 && ghi <= r.hi + 1e-12, "{c1:?} {c2:?} {r:?} {glo} {ghi}");
                        assert!(glo - r.lo < 0.05 && r.hi - ghi < 0.05, "{c1:?} {c2:?} {r:?} {glo} {ghi}");
                    }
                }
            }
        }
    }

    #[test]
    fn small_level_graphs() {
        let g0 = build_conflict_graph(0, 0.0).unwrap();
        assert_eq!(g0.self_conflicts(), vec![0, 1, 2, 3]);
        assert_eq!(g0.edge_count(), 6);
        let g1 = build_conflict_graph(1, 0.0).unwrap();
        assert_eq!(g1.self_conflicts(), (4..12).collect::<Vec<_>>());
        assert!(matches!(build_conflict_graph(8, 0.0), Err(Error::ResourceCap { .. })));
    }

    #[test]
    fn graph_matches_pairwise_predicate() {
        let g = build_conflict_graph(2, 0.0).unwrap();
        let n = g.cell_count();
        let mut count = 0;
        for a in 0..n {
            for b in a..n {
                let want = cells_conflict(
                    &DyadicCell::from_ordinal(2, a).unwrap(),
                    &DyadicCell::from_ordinal(2, b).unwrap(),
                    0.0,
                );
                assert_eq!(g.conflicts(a, b), want);
                assert_eq!(g.conflicts(b, a), want);
                if want && a != b {
                    count += 1;
                }
            }
        }
        assert_eq!(g.edge_count(), count);
        assert_eq!(g.edges().count() as u64, count);
        assert!(g.edges().zip(g.edges().skip(1)).all(|(x, y)| x < y));
    }

    #[test]
    fn cache_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_conflict_graph(3, 0.0).unwrap();
        let path = cache_path(dir.path(), 3, 0.0);
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);

        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_graph(&path), Err(Error::CorruptCache(_))));
    }

    #[test]
    fn cache_hit_skips_build() {
        let dir = tempfile::tempdir().unwrap();
        let path = cache_path(dir.path(), 2, 0.0);
        let mut builds = 0;
        let (g1, hit1) = load_or_build(&path, 2, 0.0, || {
            builds += 1;
            build_conflict_graph(2, 0.0)
        })
        .unwrap();
        let (g2, hit2) = load_or_build(&path, 2, 0.0, || {
            builds += 1;
            build_conflict_graph(2, 0.0)
        })
        .unwrap();
        assert_eq!((hit1, hit2, builds), (false, true, 1));
        assert_eq!(g1, g2);
    }
}
