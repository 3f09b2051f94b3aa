//! Density filtering: keep the cells of a level that are almost entirely
//! covered by a measurable set `M`.
//!
//! `M` is described by a [`MembershipOracle`]. Cap-type oracles and grid
//! aligned oracles have exact per-cell densities; polygon sets fall back to
//! Monte Carlo sampling that is uniform in (cos θ, φ) over the cell, which is
//! area-uniform.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conflict::{dot_range_boxes, AngularBox};
use crate::error::{Error, Result};
use crate::grid::{area_at, divisions, CellSet, DyadicCell, Interval, MAX_LEVEL};
use crate::polygon::ConvexPolygon;
use crate::sphere::{seeded_rng, UnitVector, FULL_SPHERE};

/// Upper end of the admissible ε range under the strict policy.
pub const BETA: f64 = 1.0 / 64.0;

/// Deepest sieve that is materialized as a cell set.
pub const MAX_SIEVE_DEPTH: u32 = 10;

/// A measurable set given by exact point membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MembershipOracle {
    /// The whole sphere.
    All,
    /// Open cap `{p : d(p, center) < radius}`, radius in (0, π].
    Cap { center: UnitVector, radius: f64 },
    /// Open caps of equal radius around both poles.
    DoubleCap { radius: f64 },
    /// Union of closed cells.
    CellSet { cells: CellSet },
    /// Union of closed convex polygons.
    PolygonSet { polygons: Vec<ConvexPolygon> },
    /// Grid-aligned sieve: starting from the whole sphere, each retained cell
    /// at level `j − 1` loses its child with odd band and odd sector, for
    /// `j = 1..=depth`. The retained area fraction is `(3/4)^depth`.
    SieveFractal { depth: u32 },
}

/// Estimate of μ(c ∩ M)/μ(c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub density: f64,
    pub stderr: f64,
    /// True when `density` is an exact value rather than a sample mean.
    pub exact: bool,
}

/// Which ε values [`select_dense_cells`] accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// 0 < ε < 1/64.
    #[default]
    Strict,
    /// 0 < ε < 1.
    Relaxed,
}

impl EpsilonPolicy {
    pub fn check(self, epsilon: f64) -> Result<()> {
        let hi = match self {
            EpsilonPolicy::Strict => BETA,
            EpsilonPolicy::Relaxed => 1.0,
        };
        if epsilon > 0.0 && epsilon < hi {
            Ok(())
        } else {
            Err(Error::EpsilonOutOfRange { epsilon, lo: 0.0, hi })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDensity {
    pub band: u32,
    pub sector: u32,
    pub density: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub level: u32,
    pub epsilon: f64,
    pub beta: f64,
    pub policy: EpsilonPolicy,
    pub samples: usize,
    pub seed: u64,
    pub selected: CellSet,
    /// Every cell with nonzero estimated density, band-major.
    pub cells: Vec<CellDensity>,
    /// Σ density·area over the selection, steradians.
    pub captured_measure: f64,
    pub captured_stderr: f64,
    /// μ(M) in steradians: exact when available, else the sum over all cells.
    pub oracle_measure: f64,
    pub oracle_measure_exact: bool,
    /// captured_measure > (1 − ε)·μ(M).
    pub captures_one_minus_epsilon: bool,
}

impl DensityReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["band", "sector", "density", "stderr"])?;
        for c in &self.cells {
            w.serialize((c.band, c.sector, c.density, c.stderr))?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .expect("csv output is UTF-8"))
    }
}

/// Both covering gaps for a selection against `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    /// μ(M ∩ ∪cells).
    pub inside: f64,
    pub inside_stderr: f64,
    /// μ(∪cells), exact.
    pub union: f64,
    /// μ(M).
    pub oracle_measure: f64,
    pub oracle_stderr: f64,
    /// μ(M) − μ(M ∩ ∪cells): the part of M the selection misses.
    pub missed: f64,
    /// μ(∪cells) − μ(M): how far the selection overshoots M.
    pub excess: f64,
}

fn sieve_cells(depth: u32) -> Result<CellSet> {
    if depth > MAX_SIEVE_DEPTH {
        return Err(Error::ResourceCap { level: depth, max: MAX_SIEVE_DEPTH });
    }
    let mut cur = CellSet::all(0);
    for j in 1..=depth {
        let pairs: Vec<(u32, u32)> = cur
            .pairs()
            .iter()
            .flat_map(|&(b, s)| {
                [(0, 0), (0, 1), (1, 0)].into_iter().map(move |(i, k)| (2 * b + i, 2 * s + k))
            })
            .collect();
        cur = CellSet::from_pairs(j, pairs)?;
    }
    Ok(cur)
}

impl MembershipOracle {
    /// Validates parameters; materialized forms are built lazily by callers.
    pub fn validate(&self) -> Result<()> {
        match self {
            MembershipOracle::Cap { radius, .. } if !(*radius > 0.0 && *radius <= PI) => {
                Err(Error::Domain(format!("cap radius must be in (0, π], got {radius}")))
            }
            MembershipOracle::DoubleCap { radius } if !(*radius > 0.0 && *radius <= PI / 2.0) => {
                Err(Error::Domain(format!("double-cap radius must be in (0, π/2], got {radius}")))
            }
            MembershipOracle::SieveFractal { depth } if *depth > MAX_SIEVE_DEPTH => {
                Err(Error::ResourceCap { level: *depth, max: MAX_SIEVE_DEPTH })
            }
            _ => Ok(()),
        }
    }

    /// The sieve as a cell set at its own depth.
    pub fn sieve_set(depth: u32) -> Result<CellSet> {
        sieve_cells(depth)
    }

    pub fn contains(&self, p: &UnitVector) -> bool {
        match self {
            MembershipOracle::All => true,
            MembershipOracle::Cap { center, radius } => center.dot(p) > radius.cos(),
            MembershipOracle::DoubleCap { radius } => p.z().abs() > radius.cos(),
            MembershipOracle::CellSet { cells } => cells.contains_point(p),
            MembershipOracle::PolygonSet { polygons } => polygons.iter().any(|q| q.contains(p)),
            MembershipOracle::SieveFractal { depth } => {
                // Walk down the levels: a point survives unless some ancestor is removed.
                (1..=*depth).all(|j| {
                    let c = crate::grid::locate_point(p, j);
                    !(c.band % 2 == 1 && c.sector % 2 == 1)
                })
            }
        }
    }

    /// μ(M) when known in closed form.
    pub fn exact_measure(&self) -> Option<f64> {
        match self {
            MembershipOracle::All => Some(FULL_SPHERE),
            MembershipOracle::Cap { radius, .. } => Some(TAU * (1.0 - radius.cos())),
            MembershipOracle::DoubleCap { radius } => Some(2.0 * TAU * (1.0 - radius.cos())),
            MembershipOracle::CellSet { cells } => Some(cells.measure()),
            MembershipOracle::SieveFractal { depth } => Some(FULL_SPHERE * 0.75f64.powi(*depth as i32)),
            MembershipOracle::PolygonSet { .. } => None,
        }
    }
}

/// Length of `[lo, hi] ∩ [a, b]`.
fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Total length of `[lo, hi]` covered by the arc `(c − α, c + α)` taken mod 2π.
fn arc_overlap(lo: f64, hi: f64, c: f64, alpha: f64) -> f64 {
    if alpha >= PI {
        return hi - lo;
    }
    let mut total = 0.0;
    for k in -2..=2 {
        let m = c + k as f64 * TAU;
        total += overlap(lo, hi, m - alpha, m + alpha);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // Split into a few panels so that isolated kinks do not fool the first estimate.
    let panels = 8;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            adaptive_simpson(&f, x0, x1, f0, fm, f1, whole, tol / panels as f64, 40)
        })
        .fold(0.0, |a, b| a + b)
}

/// Fraction of the cos θ interval `[lo, hi]` inside `z > t` or `z < −t`.
fn polar_fraction(cos: Interval, above: Option<f64>, below: Option<f64>) -> f64 {
    let mut len = 0.0;
    if let Some(t) = above {
        len += overlap(cos.lo, cos.hi, t, 1.0);
    }
    if let Some(t) = below {
        len += overlap(cos.lo, cos.hi, -1.0, t);
    }
    (len / cos.width()).clamp(0.0, 1.0)
}

fn cap_density(cell: &DyadicCell, center: &UnitVector, radius: f64) -> f64 {
    let cos_r = radius.cos();
    let cos = cell.cos_theta_bounds();
    if center.z() == 1.0 {
        return polar_fraction(cos, Some(cos_r), None);
    }
    if center.z() == -1.0 {
        return polar_fraction(cos, None, Some(-cos_r));
    }
    let point = AngularBox {
        cos_theta: Interval::new(center.z(), center.z()),
        phi: Interval::new(center.phi(), center.phi()),
    };
    let r = dot_range_boxes(&AngularBox::from_cell(cell), &point);
    if r.hi <= cos_r {
        return 0.0;
    }
    if r.lo > cos_r {
        return 1.0;
    }
    let phi = cell.phi_bounds();
    let (zc, sc, pc) = (center.z(), (1.0 - center.z().powi(2)).max(0.0).sqrt(), center.phi());
    let width = |z: f64| {
        let s = (1.0 - z * z).max(0.0).sqrt();
        if s * sc == 0.0 {
            return if z * zc > cos_r { phi.width() } else { 0.0 };
        }
        let kappa = (cos_r - z * zc) / (s * sc);
        if kappa >= 1.0 {
            0.0
        } else if kappa < -1.0 {
            phi.width()
        } else {
            arc_overlap(phi.lo, phi.hi, pc, kappa.acos())
        }
    };
    let area = integrate(width, cos.lo, cos.hi, 1e-13);
    (area / (cos.width() * phi.width())).clamp(0.0, 1.0)
}

/// Fraction of `cell` covered by the level-`set.level()` cells of `set`.
fn cellset_density(cell: &DyadicCell, set: &CellSet) -> f64 {
    let j = set.level();
    if cell.level >= j {
        let anc = cell.ancestor_at(j).expect("coarser level");
        return if set.contains(&anc) { 1.0 } else { 0.0 };
    }
    let shift = j - cell.level;
    let (b0, b1) = (cell.band << shift, (cell.band + 1) << shift);
    let (s0, s1) = (cell.sector << shift, (cell.sector + 1) << shift);
    let pairs = set.pairs();
    let start = pairs.partition_point(|&(b, _)| b < b0);
    let count = pairs[start..]
        .iter()
        .take_while(|&&(b, _)| b < b1)
        .filter(|&&(_, s)| s0 <= s && s < s1)
        .count();
    count as f64 / (1u64 << (2 * shift)) as f64
}

/// Monte Carlo estimate with points uniform in (cos θ, φ) over the cell.
pub fn monte_carlo_density(oracle: &MembershipOracle, cell: &DyadicCell, samples: usize, seed: u64) -> DensityEstimate {
    let mut rng = seeded_rng(seed, cell.ordinal() as u64);
    let (cos, phi) = cell.bounds();
    let mut hits = 0usize;
    for _ in 0..samples {
        let z = rng.gen_range(cos.lo..=cos.hi);
        let f = rng.gen_range(phi.lo..phi.hi);
        if oracle.contains(&UnitVector::from_cos_theta(z, f)) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    DensityEstimate { density: p, stderr: (p * (1.0 - p) / samples as f64).sqrt(), exact: false }
}

fn exact_density(oracle: &MembershipOracle, cell: &DyadicCell, sieve: Option<&CellSet>) -> Option<f64> {
    match oracle {
        MembershipOracle::All => Some(1.0),
        MembershipOracle::Cap { center, radius } => Some(cap_density(cell, center, *radius)),
        MembershipOracle::DoubleCap { radius } => {
            let t = radius.cos();
            Some(polar_fraction(cell.cos_theta_bounds(), Some(t), Some(-t)))
        }
        MembershipOracle::CellSet { cells } => Some(cellset_density(cell, cells)),
        MembershipOracle::SieveFractal { .. } => sieve.map(|s| cellset_density(cell, s)),
        MembershipOracle::PolygonSet { .. } => None,
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 100 {
        return Err(Error::Domain(format!("at least 100 samples per cell are required, got {samples}")));
    }
    Ok(())
}

/// μ(c ∩ M)/μ(c): exact where a closed form exists, else Monte Carlo seeded
/// from `(seed, cell ordinal)`.
pub fn estimate_cell_density(oracle: &MembershipOracle, cell: &DyadicCell, samples: usize, seed: u64) -> Result<DensityEstimate> {
    oracle.validate()?;
    check_samples(samples)?;
    let sieve = match oracle {
        MembershipOracle::SieveFractal { depth } => Some(sieve_cells(*depth)?),
        _ => None,
    };
    Ok(estimate_with(oracle, cell, samples, seed, sieve.as_ref()))
}

fn estimate_with(oracle: &MembershipOracle, cell: &DyadicCell, samples: usize, seed: u64, sieve: Option<&CellSet>) -> DensityEstimate {
    match exact_density(oracle, cell, sieve) {
        Some(d) => DensityEstimate { density: d, stderr: 0.0, exact: true },
        None => monte_carlo_density(oracle, cell, samples, seed),
    }
}

fn all_densities(oracle: &MembershipOracle, level: u32, samples: usize, seed: u64) -> Result<Vec<DensityEstimate>> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidLevel(level as i64));
    }
    oracle.validate()?;
    check_samples(samples)?;
    let sieve = match oracle {
        MembershipOracle::SieveFractal { depth } => Some(sieve_cells(*depth)?),
        _ => None,
    };
    let n = divisions(level);
    Ok((0..n * n)
        .into_par_iter()
        .map(|o| {
            let cell = DyadicCell { level, band: o / n, sector: o % n };
            estimate_with(oracle, &cell, samples, seed, sieve.as_ref())
        })
        .collect())
}

/// Cells of `level` whose density is at least `1 − epsilon`, under the strict ε range.
pub fn select_dense_cells(oracle: &MembershipOracle, level: u32, epsilon: f64, samples: usize, seed: u64) -> Result<DensityReport> {
    select_dense_cells_with(oracle, level, epsilon, samples, seed, EpsilonPolicy::Strict)
}

pub fn select_dense_cells_with(
    oracle: &MembershipOracle,
    level: u32,
    epsilon: f64,
    samples: usize,
    seed: u64,
    policy: EpsilonPolicy,
) -> Result<DensityReport> {
    policy.check(epsilon)?;
    let est = all_densities(oracle, level, samples, seed)?;
    let n = divisions(level);
    let area = area_at(level);
    let mut selected = Vec::new();
    let mut cells = Vec::new();
    let (mut captured, mut var, mut total) = (0.0, 0.0, 0.0);
    for (o, e) in est.iter().enumerate() {
        let (band, sector) = (o as u32 / n, o as u32 % n);
        if e.density > 0.0 {
            cells.push(CellDensity { band, sector, density: e.density, stderr: e.stderr });
        }
        total += e.density * area;
        if e.density >= 1.0 - epsilon {
            selected.push((band, sector));
            captured += e.density * area;
            var += (e.stderr * area).powi(2);
        }
    }
    let (oracle_measure, exact) = match oracle.exact_measure() {
        Some(m) => (m, true),
        None => (total, false),
    };
    Ok(DensityReport {
        level,
        epsilon,
        beta: BETA,
        policy,
        samples,
        seed,
        selected: CellSet::from_pairs(level, selected)?,
        cells,
        captured_measure: captured,
        captured_stderr: var.sqrt(),
        oracle_measure,
        oracle_measure_exact: exact,
        captures_one_minus_epsilon: captured > (1.0 - epsilon) * oracle_measure,
    })
}

/// Measures of M ∩ ∪selection, ∪selection and M, with both covering gaps.
pub fn covering_report(oracle: &MembershipOracle, selection: &CellSet, samples: usize, seed: u64) -> Result<CoveringReport> {
    let level = selection.level();
    let est = all_densities(oracle, level, samples, seed)?;
    let n = divisions(level);
    let area = area_at(level);
    let (mut inside, mut ivar) = (0.0, 0.0);
    for &(b, s) in selection.pairs() {
        let e = est[(b * n + s) as usize];
        inside += e.density * area;
        ivar += (e.stderr * area).powi(2);
    }
    let (oracle_measure, oracle_stderr) = match oracle.exact_measure() {
        Some(m) => (m, 0.0),
        None => (
            est.iter().map(|e| e.density * area).fold(0.0, |a, b| a + b),
            est.iter().map(|e| (e.stderr * area).powi(2)).fold(0.0, |a, b| a + b).sqrt(),
        ),
    };
    let union = selection.measure();
    Ok(CoveringReport {
        inside,
        inside_stderr: ivar.sqrt(),
        union,
        oracle_measure,
        oracle_stderr,
        missed: oracle_measure - inside,
        excess: union - oracle_measure,
    })
}
