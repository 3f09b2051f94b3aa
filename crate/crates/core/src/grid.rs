//! Equal-area dyadic decompositions of the sphere.
//!
//! Level `k` has `2^(k+1)` latitude bands, equally spaced in cos θ, and
//! `2^(k+1)` sectors, equally spaced in φ, for `4·4^k` cells of area
//! `π·4^(−k)` each. Band 0 touches the north pole. Cell `(band, sector)`
//! covers
//!
//! ```text
//! cos θ ∈ [1 − (band+1)·2^(−k), 1 − band·2^(−k)]
//! φ     ∈ [sector·π·2^(−k), (sector+1)·π·2^(−k))
//! ```
//!
//! Level `k+1` refines level `k`: the children of `(band, sector)` are
//! `(2·band + i, 2·sector + j)` for `i, j ∈ {0, 1}`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::UnitVector;

/// Deepest level representable with 32-bit cell ordinals.
pub const MAX_LEVEL: u32 = 14;

/// Number of bands (and sectors) at `level`.
pub fn divisions(level: u32) -> u32 {
    1 << (level + 1)
}

/// Number of cells at `level`: 4·4^level.
pub fn cell_count(level: u32) -> u64 {
    4u64 << (2 * level)
}

/// Area of every cell at `level` in steradians: π·4^(−level).
pub fn cell_area(level: i64) -> Result<f64> {
    if !(0..=MAX_LEVEL as i64).contains(&level) {
        return Err(Error::InvalidLevel(level));
    }
    Ok(PI / (1u64 << (2 * level)) as f64)
}

pub(crate) fn area_at(level: u32) -> f64 {
    PI / (1u64 << (2 * level)) as f64
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCell {
    pub level: u32,
    pub band: u32,
    pub sector: u32,
}

impl DyadicCell {
    pub fn new(level: u32, band: u32, sector: u32) -> Result<Self> {
        let n = if level <= MAX_LEVEL { divisions(level) } else { 0 };
        if level > MAX_LEVEL || band >= n || sector >= n {
            return Err(Error::InvalidCell { level, band, sector });
        }
        Ok(Self { level, band, sector })
    }

    pub fn from_ordinal(level: u32, ordinal: u32) -> Result<Self> {
        let n = divisions(level);
        Self::new(level, ordinal / n, ordinal % n)
    }

    /// Band-major index within the level.
    pub fn ordinal(&self) -> u32 {
        self.band * divisions(self.level) + self.sector
    }

    /// (cos θ interval, φ interval). The φ interval is half-open on the right.
    pub fn bounds(&self) -> (Interval, Interval) {
        (self.cos_theta_bounds(), self.phi_bounds())
    }

    pub fn cos_theta_bounds(&self) -> Interval {
        let h = 1.0 / (1u64 << self.level) as f64;
        Interval::new(1.0 - (self.band + 1) as f64 * h, 1.0 - self.band as f64 * h)
    }

    pub fn phi_bounds(&self) -> Interval {
        let w = PI / (1u64 << self.level) as f64;
        Interval::new(self.sector as f64 * w, (self.sector + 1) as f64 * w)
    }

    /// Colatitude interval [θ_lo, θ_hi].
    pub fn theta_bounds(&self) -> Interval {
        let c = self.cos_theta_bounds();
        Interval::new(c.hi.clamp(-1.0, 1.0).acos(), c.lo.clamp(-1.0, 1.0).acos())
    }

    pub fn area(&self) -> f64 {
        area_at(self.level)
    }

    pub fn contains_point(&self, p: &UnitVector) -> bool {
        let c = self.cos_theta_bounds();
        if !c.contains(p.z()) {
            return false;
        }
        // The pole belongs to every cell of the touching band.
        if (self.band == 0 && p.z() >= 1.0) || (self.band == divisions(self.level) - 1 && p.z() <= -1.0) {
            return true;
        }
        let ph = self.phi_bounds();
        let phi = p.phi();
        ph.contains(phi) || (ph.hi >= 2.0 * PI && phi == 0.0)
    }

    /// The four children at the next level.
    pub fn refine(&self) -> [DyadicCell; 4] {
        let l = self.level + 1;
        let (b, s) = (2 * self.band, 2 * self.sector);
        [
            DyadicCell { level: l, band: b, sector: s },
            DyadicCell { level: l, band: b, sector: s + 1 },
            DyadicCell { level: l, band: b + 1, sector: s },
            DyadicCell { level: l, band: b + 1, sector: s + 1 },
        ]
    }

    pub fn parent(&self) -> Option<DyadicCell> {
        (self.level > 0).then(|| DyadicCell { level: self.level - 1, band: self.band / 2, sector: self.sector / 2 })
    }

    /// Ancestor (or self) at a coarser or equal level.
    pub fn ancestor_at(&self, level: u32) -> Option<DyadicCell> {
        (level <= self.level).then(|| {
            let shift = self.level - level;
            DyadicCell { level, band: self.band >> shift, sector: self.sector >> shift }
        })
    }

    /// Image under the point reflection p ↦ −p.
    pub fn antipode(&self) -> DyadicCell {
        let n = divisions(self.level);
        DyadicCell { level: self.level, band: n - 1 - self.band, sector: (self.sector + n / 2) % n }
    }

    /// Cells at the same level whose closures meet this cell's closure,
    /// including corner contacts and the shared poles of the polar bands.
    pub fn neighbors(&self) -> Vec<DyadicCell> {
        let n = divisions(self.level);
        let last = n - 1;
        let mut out = Vec::new();
        let bands = self.band.saturating_sub(1)..=(self.band + 1).min(last);
        for band in bands {
            let polar = (band == 0 && self.band == 0) || (band == last && self.band == last);
            let mut sectors: Vec<u32> = if polar {
                (0..n).collect()
            } else {
                vec![(self.sector + n - 1) % n, self.sector, (self.sector + 1) % n]
            };
            sectors.sort_unstable();
            sectors.dedup();
            for sector in sectors {
                let other = DyadicCell { level: self.level, band, sector };
                if other != *self {
                    out.push(other);
                }
            }
        }
        out
    }

    /// Closure-intersection test for two cells of the same level.
    pub fn touches(&self, other: &DyadicCell) -> bool {
        debug_assert_eq!(self.level, other.level);
        let n = divisions(self.level);
        let last = n - 1;
        if (self.band == 0 && other.band == 0) || (self.band == last && other.band == last) {
            return true;
        }
        let db = self.band.abs_diff(other.band);
        let ds = self.sector.abs_diff(other.sector);
        db <= 1 && ds.min(n - ds) <= 1
    }

    /// Corner points and `samples_per_edge` points along each latitude edge, in
    /// counterclockwise order seen from outside; consecutive duplicates (poles) removed.
    pub fn boundary_points(&self, samples_per_edge: usize) -> Vec<UnitVector> {
        let c = self.cos_theta_bounds();
        let p = self.phi_bounds();
        let m = samples_per_edge.max(1);
        let mut pts = Vec::with_capacity(2 * m + 2);
        for i in 0..=m {
            let phi = p.lo + p.width() * i as f64 / m as f64;
            pts.push(UnitVector::from_cos_theta(c.lo, phi));
        }
        for i in 0..=m {
            let phi = p.hi - p.width() * i as f64 / m as f64;
            pts.push(UnitVector::from_cos_theta(c.hi, phi));
        }
        pts.dedup_by(|a, b| a == b);
        pts
    }
}

/// Cell containing `p` at `level`; ties on shared boundaries go to the lower
/// band and then the lower sector index.
pub fn locate_point(p: &UnitVector, level: u32) -> DyadicCell {
    let n = divisions(level);
    let scale = (1u64 << level) as f64;
    let t = (1.0 - p.z()) * scale;
    let band = (t.ceil() as i64 - 1).clamp(0, n as i64 - 1) as u32;
    let u = p.phi() * scale / PI;
    let sector = (u.ceil() as i64 - 1).clamp(0, n as i64 - 1) as u32;
    DyadicCell { level, band, sector }
}

/// Derived tables for one level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevel {
    pub level: u32,
    pub cell_count: u64,
    pub cell_area: f64,
    /// cos θ at band boundaries, `divisions + 1` entries from 1 down to −1.
    pub cos_theta_breaks: Vec<f64>,
    /// φ at sector boundaries, `divisions + 1` entries from 0 up to 2π.
    pub phi_breaks: Vec<f64>,
}

impl GridLevel {
    pub fn new(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidLevel(level as i64));
        }
        let n = divisions(level);
        let h = 1.0 / (1u64 << level) as f64;
        let w = PI / (1u64 << level) as f64;
        Ok(Self {
            level,
            cell_count: cell_count(level),
            cell_area: area_at(level),
            cos_theta_breaks: (0..=n).map(|b| 1.0 - b as f64 * h).collect(),
            phi_breaks: (0..=n).map(|s| s as f64 * w).collect(),
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = DyadicCell> + '_ {
        let n = divisions(self.level);
        let level = self.level;
        (0..n).flat_map(move |band| (0..n).map(move |sector| DyadicCell { level, band, sector }))
    }

    /// Σ of the cell areas, with Neumaier compensation.
    pub fn total_area(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for c in self.cells() {
            let x = c.area();
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        sum + comp
    }
}

/// A finite set of cells at one level, kept in canonical band-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellSet {
    level: u32,
    #[serde(rename = "cells")]
    members: Vec<(u32, u32)>,
}

#[derive(Deserialize)]
struct CellSetDoc {
    level: u32,
    cells: Vec<(u32, u32)>,
}

impl<'de> Deserialize<'de> for CellSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = CellSetDoc::deserialize(d)?;
        CellSet::from_pairs(doc.level, doc.cells).map_err(serde::de::Error::custom)
    }
}

impl CellSet {
    pub fn empty(level: u32) -> Self {
        Self { level, members: Vec::new() }
    }

    pub fn from_pairs(level: u32, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut members = Vec::new();
        for (b, s) in pairs {
            DyadicCell::new(level, b, s)?;
            members.push((b, s));
        }
        members.sort_unstable();
        members.dedup();
        Ok(Self { level, members })
    }

    pub fn from_cells(level: u32, cells: impl IntoIterator<Item = DyadicCell>) -> Result<Self> {
        let mut pairs = Vec::new();
        for c in cells {
            if c.level != level {
                return Err(Error::InvalidCell { level: c.level, band: c.band, sector: c.sector });
            }
            pairs.push((c.band, c.sector));
        }
        Self::from_pairs(level, pairs)
    }

    pub fn from_ordinals(level: u32, ordinals: impl IntoIterator<Item = u32>) -> Result<Self> {
        let n = divisions(level);
        Self::from_pairs(level, ordinals.into_iter().map(|o| (o / n, o % n)))
    }

    pub fn all(level: u32) -> Self {
        let n = divisions(level);
        Self { level, members: (0..n).flat_map(|b| (0..n).map(move |s| (b, s))).collect() }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.members
    }

    pub fn cells(&self) -> impl Iterator<Item = DyadicCell> + '_ {
        let level = self.level;
        self.members.iter().map(move |&(band, sector)| DyadicCell { level, band, sector })
    }

    pub fn ordinals(&self) -> Vec<u32> {
        let n = divisions(self.level);
        self.members.iter().map(|&(b, s)| b * n + s).collect()
    }

    pub fn contains(&self, cell: &DyadicCell) -> bool {
        cell.level == self.level && self.members.binary_search(&(cell.band, cell.sector)).is_ok()
    }

    /// Union measure in steradians.
    pub fn measure(&self) -> f64 {
        self.members.len() as f64 * area_at(self.level)
    }

    /// Normalized measure |S|/(4·4^k).
    pub fn fraction(&self) -> f64 {
        self.members.len() as f64 / cell_count(self.level) as f64
    }

    /// The same region expressed at a finer level.
    pub fn refine_to(&self, level: u32) -> Result<CellSet> {
        if level < self.level || level > MAX_LEVEL {
            return Err(Error::InvalidLevel(level as i64));
        }
        let shift = level - self.level;
        let k = 1u32 << shift;
        let mut pairs = Vec::with_capacity(self.members.len() * (k * k) as usize);
        for &(b, s) in &self.members {
            for i in 0..k {
                for j in 0..k {
                    pairs.push(((b << shift) + i, (s << shift) + j));
                }
            }
        }
        Self::from_pairs(level, pairs)
    }

    pub fn antipode(&self) -> CellSet {
        let cells: Vec<_> = self.cells().map(|c| c.antipode()).collect();
        Self::from_cells(self.level, cells).expect("antipodal cells are valid")
    }

    /// Closed-union membership.
    pub fn contains_point(&self, p: &UnitVector) -> bool {
        let c = locate_point(p, self.level);
        if self.contains(&c) {
            return true;
        }
        c.neighbors().iter().any(|nb| self.contains(nb) && nb.contains_point(p))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cell sets always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
