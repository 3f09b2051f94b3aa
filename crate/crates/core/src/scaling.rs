//! Inward scaling of a cell selection.
//!
//! Cells near the poles are dropped first, then every remaining cell is
//! replaced by the θ/φ box of points at distance at least
//! `r₁ = ε₁^(1/3)·√μ(c)` from the cell boundary. The θ edges move by `r₁`
//! along meridians; the φ edges move by the lune half-angle
//! `asin(sin r₁ / sin θ)` at the colatitude where that angle is largest.
//! Shrunk boxes of a conflict-free selection are conflict-free, since
//! shrinking a region can only narrow its dot range.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conflict::{boxes_conflict, AngularBox};
use crate::error::{Error, Result};
use crate::grid::{CellSet, DyadicCell, Interval};
use crate::sphere::lune_half_angle;

/// Exponent denominator in `ε₁^(1/N)`.
pub const N: u32 = 3;

/// Both sides of the two feasibility inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub epsilon: f64,
    pub epsilon1: f64,
    pub delta: f64,
    /// (1 − ε₁^(1/3)(3√π + 2/(sin δ·√π)))·(1 − ε₁)·(1 − ε/2).
    pub measure_lhs: f64,
    /// 1 − ε.
    pub measure_rhs: f64,
    /// sin(π/8)·(1 − 16√2/√π·ε₁^(1/3))·ε₁^(2/3).
    pub separation_lhs: f64,
    /// 2ε₁.
    pub separation_rhs: f64,
}

impl Feasibility {
    pub fn evaluate(epsilon: f64, mu_m: f64) -> Self {
        let epsilon1 = epsilon.powi(6);
        let delta = (epsilon * mu_m / (4.0 * PI)).sqrt();
        let root = epsilon1.cbrt();
        let sp = PI.sqrt();
        let measure_lhs = (1.0 - root * loss_coefficient(delta)) * (1.0 - epsilon1) * (1.0 - epsilon / 2.0);
        let separation_lhs =
            (PI / 8.0).sin() * (1.0 - 16.0 * 2f64.sqrt() / sp * root) * root * root;
        Self {
            epsilon,
            epsilon1,
            delta,
            measure_lhs,
            measure_rhs: 1.0 - epsilon,
            separation_lhs,
            separation_rhs: 2.0 * epsilon1,
        }
    }

    pub fn measure_holds(&self) -> bool {
        self.measure_lhs >= self.measure_rhs
    }

    pub fn separation_holds(&self) -> bool {
        self.separation_lhs > self.separation_rhs
    }

    pub fn holds(&self) -> bool {
        self.measure_holds() && self.separation_holds()
    }
}

/// `3√π + 2/(sin δ·√π)`.
fn loss_coefficient(delta: f64) -> f64 {
    let sp = PI.sqrt();
    3.0 * sp + 2.0 / (delta.sin() * sp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstants {
    pub epsilon: f64,
    pub epsilon1: f64,
    pub n: u32,
    pub delta: f64,
    pub mu_m: f64,
    pub feasibility: Feasibility,
}

/// Largest ε in (0, `epsilon`] passing both inequalities, by bisection.
///
/// Starts by halving until a feasible value appears, then bisects between it
/// and the first infeasible value above it.
pub fn largest_feasible_epsilon(epsilon: f64, mu_m: f64) -> Option<f64> {
    if Feasibility::evaluate(epsilon, mu_m).holds() {
        return Some(epsilon);
    }
    let mut hi = epsilon;
    let mut lo = epsilon / 2.0;
    while !Feasibility::evaluate(lo, mu_m).holds() {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if Feasibility::evaluate(mid, mu_m).holds() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Constants for `epsilon` and input measure `mu_m`, or an infeasibility
/// error carrying the largest feasible ε found below it.
pub fn choose_constants(epsilon: f64, mu_m: f64) -> Result<ScaleConstants> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange { epsilon, lo: 0.0, hi: 1.0 });
    }
    if !(mu_m > 0.0 && mu_m.is_finite()) {
        return Err(Error::Domain(format!("input measure must be positive, got {mu_m}")));
    }
    let feasibility = Feasibility::evaluate(epsilon, mu_m);
    if !feasibility.holds() {
        return Err(Error::InfeasibleConstants {
            epsilon,
            largest_feasible: largest_feasible_epsilon(epsilon, mu_m),
        });
    }
    Ok(ScaleConstants {
        epsilon,
        epsilon1: feasibility.epsilon1,
        n: N,
        delta: feasibility.delta,
        mu_m,
        feasibility,
    })
}

impl ScaleConstants {
    /// Shrink distance for a cell: ε₁^(1/3)·√μ(c).
    pub fn shrink_for(&self, cell: &DyadicCell) -> f64 {
        self.epsilon1.cbrt() * cell.area().sqrt()
    }
}

/// Cells whose closure meets neither open polar cap of radius `delta`.
pub fn remove_polar_caps(selection: &CellSet, delta: f64) -> CellSet {
    let t = delta.cos();
    let kept = selection.cells().filter(|c| {
        let z = c.cos_theta_bounds();
        !(z.hi > t || z.lo < -t)
    });
    CellSet::from_cells(selection.level(), kept).expect("subset of a valid set")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledRegion {
    pub parent: DyadicCell,
    pub shrink: f64,
    /// `None` when the shrink leaves nothing.
    pub region: Option<AngularBox>,
}

impl ScaledRegion {
    pub fn area(&self) -> f64 {
        self.region.map_or(0.0, |b| b.cos_theta.width() * b.phi.width())
    }

    pub fn is_empty(&self) -> bool {
        self.region.is_none()
    }
}

/// The box of points of `cell` at distance at least `shrink` from its boundary
/// along θ, and beyond the φ edges' lunes.
pub fn shrink_cell(cell: &DyadicCell, shrink: f64) -> ScaledRegion {
    let empty = ScaledRegion { parent: *cell, shrink, region: None };
    if shrink == 0.0 {
        return ScaledRegion { parent: *cell, shrink, region: Some(AngularBox::from_cell(cell)) };
    }
    if shrink.is_nan() || shrink < 0.0 {
        return empty;
    }
    let th = cell.theta_bounds();
    let (t0, t1) = (th.lo + shrink, th.hi - shrink);
    if t0 > t1 || t0 <= 0.0 || t1 >= PI {
        return empty;
    }
    // sin is concave on [0, π], so its minimum over [t0, t1] is at an end.
    let worst = if t0.sin() <= t1.sin() { t0 } else { t1 };
    let Ok(alpha) = lune_half_angle(shrink, worst) else {
        return empty;
    };
    let phi = cell.phi_bounds();
    let (p0, p1) = (phi.lo + alpha, phi.hi - alpha);
    if p0 > p1 {
        return empty;
    }
    ScaledRegion {
        parent: *cell,
        shrink,
        region: Some(AngularBox { cos_theta: Interval::new(t1.cos(), t0.cos()), phi: Interval::new(p0, p1) }),
    }
}

/// `max(0, (1 − ε₁^(1/3)(3√π + 2/(sin δ·√π)))·μ(c))`.
pub fn scaled_measure_lower_bound(cell: &DyadicCell, constants: &ScaleConstants) -> f64 {
    let f = 1.0 - constants.epsilon1.cbrt() * loss_coefficient(constants.delta);
    (f * cell.area()).max(0.0)
}

/// Optional replacements for the derived shrink and cap radius.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleOverrides {
    pub shrink: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub input_cells: usize,
    pub input_measure: f64,
    pub delta: f64,
    pub polar_cells_removed: usize,
    pub polar_loss: f64,
    /// ε·μ/2, the loss the cap removal is allowed.
    pub polar_budget: f64,
    pub polar_loss_within_budget: bool,
    pub empty_regions: usize,
    /// Exact total area of the shrunk boxes.
    pub region_measure: f64,
    /// Σ of per-cell lower bounds over the kept cells.
    pub lower_bound_total: f64,
    /// (1 − ε)·input measure.
    pub target: f64,
    pub measure_claim_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSet {
    pub constants: ScaleConstants,
    pub overrides: ScaleOverrides,
    pub regions: Vec<ScaledRegion>,
    pub summary: ScaleSummary,
}

pub fn scale_set(selection: &CellSet, constants: &ScaleConstants) -> ScaledSet {
    scale_set_with(selection, constants, ScaleOverrides::default())
}

pub fn scale_set_with(selection: &CellSet, constants: &ScaleConstants, overrides: ScaleOverrides) -> ScaledSet {
    let delta = overrides.delta.unwrap_or(constants.delta);
    let kept = remove_polar_caps(selection, delta);
    let input_measure = selection.measure();
    let polar_loss = input_measure - kept.measure();
    let polar_budget = constants.epsilon * input_measure / 2.0;
    let cells: Vec<DyadicCell> = kept.cells().collect();
    let regions: Vec<ScaledRegion> = cells
        .par_iter()
        .map(|c| shrink_cell(c, overrides.shrink.unwrap_or_else(|| constants.shrink_for(c))))
        .collect();
    let region_measure: f64 = regions.iter().map(ScaledRegion::area).fold(0.0, |a, b| a + b);
    let lower_bound_total: f64 = cells.iter().map(|c| scaled_measure_lower_bound(c, constants)).fold(0.0, |a, b| a + b);
    let target = (1.0 - constants.epsilon) * input_measure;
    let summary = ScaleSummary {
        input_cells: selection.len(),
        input_measure,
        delta,
        polar_cells_removed: selection.len() - kept.len(),
        polar_loss,
        polar_budget,
        polar_loss_within_budget: polar_loss <= polar_budget,
        empty_regions: regions.iter().filter(|r| r.is_empty()).count(),
        region_measure,
        lower_bound_total,
        target,
        measure_claim_holds: region_measure >= target,
    };
    ScaledSet { constants: *constants, overrides, regions, summary }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfCertificate {
    pub regions_checked: usize,
    pub pairs_checked: u64,
    /// Index pairs `(i, j)`, `i ≤ j`, into the region list whose closed dot range contains 0.
    pub violations: Vec<(usize, usize)>,
}

impl OpfCertificate {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every pair of nonempty regions (and each region with itself).
pub fn verify_scaled_opf(regions: &[ScaledRegion]) -> OpfCertificate {
    let boxes: Vec<(usize, AngularBox)> =
        regions.iter().enumerate().filter_map(|(i, r)| r.region.map(|b| (i, b))).collect();
    let mut violations: Vec<(usize, usize)> = boxes
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, (i, a))| {
            boxes[k..]
                .iter()
                .filter(move |(_, b)| boxes_conflict(a, b, 0.0))
                .map(move |(j, _)| (*i, *j))
        })
        .collect();
    violations.sort_unstable();
    let m = boxes.len() as u64;
    OpfCertificate { regions_checked: boxes.len(), pairs_checked: m * (m + 1) / 2, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{seeded_rng, UnitVector};
    use rand::Rng;

    #[test]
    fn half_is_infeasible() {
        let f = Feasibility::evaluate(0.5, PI);
        assert_eq!(f.epsilon1, 0.015625);
        assert!(!f.separation_holds());
        match choose_constants(0.5, PI) {
            Err(Error::InfeasibleConstants { largest_feasible: Some(e), .. }) => {
                assert!(e > 0.0 && e < 0.5);
                assert!(choose_constants(e, PI).is_ok());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constants_shape() {
        let e = largest_feasible_epsilon(0.5, PI).unwrap();
        let c = choose_constants(e * 0.9, PI).unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.epsilon1, c.epsilon.powi(6));
        assert!((c.delta - (c.epsilon * PI / (4.0 * PI)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn polar_removal() {
        let all = CellSet::all(3);
        assert_eq!(remove_polar_caps(&all, 0.0), all);
        let kept = remove_polar_caps(&all, 0.1);
        assert!(kept.cells().all(|c| c.band != 0 && c.band != 15));
        assert_eq!(kept.len(), all.len() - 32);
    }

    #[test]
    fn shrink_basics() {
        let c = DyadicCell::new(3, 7, 2).unwrap();
        let r = shrink_cell(&c, 0.0);
        assert_eq!(r.region, Some(AngularBox::from_cell(&c)));
        assert!(shrink_cell(&c, 1.0).is_empty());

        let r = shrink_cell(&c, 0.01);
        let b = r.region.unwrap();
        let th = c.theta_bounds();
        let worst = (th.lo + 0.01).sin().min((th.hi - 0.01).sin());
        let alpha = (0.01f64.sin() / worst).asin();
        assert!((b.phi.lo - c.phi_bounds().lo - alpha).abs() < 1e-15);

        // Sampled region points keep their distance to the cell boundary.
        let edge = c.boundary_points(400);
        let mut rng = seeded_rng(4, 0);
        for _ in 0..500 {
            let p = UnitVector::from_cos_theta(
                rng.gen_range(b.cos_theta.lo..=b.cos_theta.hi),
                rng.gen_range(b.phi.lo..=b.phi.hi),
            );
            assert!(c.contains_point(&p));
            let d = edge.iter().map(|q| crate::sphere::geodesic_distance(&p, q)).fold(f64::INFINITY, f64::min);
            assert!(d >= 0.01 - 1e-6, "{d}");
        }
    }

    #[test]
    fn lower_bound_clamps() {
        let c = DyadicCell::new(2, 3, 0).unwrap();
        let consts = ScaleConstants {
            epsilon: 0.5,
            epsilon1: 0.5f64.powi(6),
            n: 3,
            delta: 0.1,
            mu_m: PI,
            feasibility: Feasibility::evaluate(0.5, PI),
        };
        assert_eq!(scaled_measure_lower_bound(&c, &consts), 0.0);
    }

    #[test]
    fn verify_flags_constructed_conflict() {
        // Same sector, top band vs an equator band at level 2: pole against equator.
        let a = DyadicCell::new(2, 0, 0).unwrap();
        let b = DyadicCell::new(2, 3, 0).unwrap();
        let regions = vec![shrink_cell(&a, 0.0), shrink_cell(&b, 0.0)];
        let cert = verify_scaled_opf(&regions);
        assert!(cert.violations.contains(&(0, 1)));
        let single = verify_scaled_opf(&regions[..1]);
        assert_eq!(single.pairs_checked, 1);
    }

    #[test]
    fn empty_selection() {
        let e = largest_feasible_epsilon(0.5, PI).unwrap();
        let c = choose_constants(e, PI).unwrap();
        let s = scale_set(&CellSet::empty(4), &c);
        assert!(s.regions.is_empty());
        assert_eq!(s.summary.region_measure, 0.0);
    }
}
