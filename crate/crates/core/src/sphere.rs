//! Points on the unit sphere and the handful of spherical primitives everything
//! else is built from: geodesic distance, caps, lunes, gnomonic charts,
//! polygon areas and area-uniform sampling.
//!
//! Areas are in steradians throughout (the sphere has area 4π); divide by
//! [`FULL_SPHERE`] for the normalized fraction.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total area of the unit sphere in steradians.
pub const FULL_SPHERE: f64 = 4.0 * PI;

/// Tolerance on |v| = 1 after construction.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance for geometric round trips (projection/unprojection, polar angles).
pub const ROUNDTRIP_TOL: f64 = 1e-10;
/// Default slack for geometric predicates.
pub const PREDICATE_TOL: f64 = 1e-9;

/// A point on S².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl TryFrom<[f64; 3]> for UnitVector {
    type Error = Error;

    /// Vectors already unit to within [`CONSTRUCTION_TOL`] are kept bit for bit,
    /// so serialized points round-trip exactly.
    fn try_from(v: [f64; 3]) -> Result<Self> {
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if (n2 - 1.0).abs() <= CONSTRUCTION_TOL {
            return Ok(Self { x: v[0], y: v[1], z: v[2] });
        }
        UnitVector::new(v[0], v[1], v[2])
    }
}

impl From<UnitVector> for [f64; 3] {
    fn from(v: UnitVector) -> Self {
        [v.x, v.y, v.z]
    }
}

impl UnitVector {
    pub const NORTH: UnitVector = UnitVector { x: 0.0, y: 0.0, z: 1.0 };
    pub const SOUTH: UnitVector = UnitVector { x: 0.0, y: 0.0, z: -1.0 };

    /// Normalizes `(x, y, z)`. Fails on zero or non-finite input.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::Domain(format!("cannot normalize ({x}, {y}, {z})")));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    /// Point with colatitude `theta` and longitude `phi`.
    pub fn from_polar(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self { x: st * cp, y: st * sp, z: ct }
    }

    /// Point with the given cos(colatitude) and longitude. Exact at the poles.
    pub fn from_cos_theta(cos_theta: f64, phi: f64) -> Self {
        let z = cos_theta.clamp(-1.0, 1.0);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        Self { x: s * cp, y: s * sp, z }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn polar(&self) -> PolarAngles {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let mut phi = self.y.atan2(self.x);
        if phi < 0.0 {
            phi += TAU;
        }
        if phi >= TAU {
            phi = 0.0;
        }
        PolarAngles { theta, phi }
    }

    /// Longitude in [0, 2π); 0 at the poles.
    pub fn phi(&self) -> f64 {
        self.polar().phi
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn dot_raw(&self, v: [f64; 3]) -> f64 {
        self.x * v[0] + self.y * v[1] + self.z * v[2]
    }

    pub fn cross(&self, other: &UnitVector) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    pub fn antipode(&self) -> UnitVector {
        UnitVector { x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm_error(&self) -> f64 {
        ((self.x * self.x + self.y * self.y + self.z * self.z).sqrt() - 1.0).abs()
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Colatitude in [0, π] and longitude in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarAngles {
    pub theta: f64,
    pub phi: f64,
}

impl PolarAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..TAU).contains(&phi) {
            return Err(Error::Domain(format!("polar angles out of range: ({theta}, {phi})")));
        }
        Ok(Self { theta, phi })
    }

    pub fn to_unit(self) -> UnitVector {
        UnitVector::from_polar(self.theta, self.phi)
    }
}

/// Length of the shorter great-circle arc between `u` and `v`, in [0, π].
///
/// Mathematically `acos(clamp(u·v))`; evaluated as `atan2(|u×v|, u·v)`, which
/// keeps full precision for nearly coincident and nearly antipodal points.
pub fn geodesic_distance(u: &UnitVector, v: &UnitVector) -> f64 {
    let c = u.cross(v);
    norm(c).atan2(u.dot(v).clamp(-1.0, 1.0))
}

/// Inner product of two unit vectors; `v` lies on the polar great circle of `u` iff it is 0.
pub fn polar_dot(u: &UnitVector, v: &UnitVector) -> f64 {
    u.dot(v).clamp(-1.0, 1.0)
}

/// Area of a geodesic disc: 2π(1 − cos r).
pub fn cap_area(radius: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&radius) {
        return Err(Error::Domain(format!("cap radius {radius} outside [0, π]")));
    }
    Ok(TAU * (1.0 - radius.cos()))
}

/// Azimuthal rotation that moves a meridian far enough that every point at
/// `colatitude` ends up at least `shrink` away from the original meridian:
/// asin(sin(shrink) / sin(colatitude)).
pub fn lune_half_angle(shrink: f64, colatitude: f64) -> Result<f64> {
    if !(colatitude > 0.0 && colatitude < PI) || shrink < 0.0 {
        return Err(Error::Domain(format!(
            "lune_half_angle needs 0 < colatitude < π and shrink ≥ 0 (got {shrink}, {colatitude})"
        )));
    }
    let ratio = shrink.sin() / colatitude.sin();
    if ratio > 1.0 + CONSTRUCTION_TOL {
        return Err(Error::InfeasibleShrink { shrink, colatitude });
    }
    Ok(ratio.min(1.0).asin())
}

/// Geodesic disc with radius in (0, π/2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub center: UnitVector,
    pub radius: f64,
}

impl Cap {
    pub fn new(center: UnitVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= FRAC_PI_2) {
            return Err(Error::Domain(format!("cap radius {radius} outside (0, π/2]")));
        }
        Ok(Self { center, radius })
    }

    /// Open disc membership.
    pub fn contains(&self, p: &UnitVector) -> bool {
        geodesic_distance(&self.center, p) < self.radius
    }

    pub fn contains_closed(&self, p: &UnitVector) -> bool {
        geodesic_distance(&self.center, p) <= self.radius
    }

    pub fn area(&self) -> f64 {
        TAU * (1.0 - self.radius.cos())
    }
}

/// Minor great-circle arc between two non-antipodal points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSegment {
    pub a: UnitVector,
    pub b: UnitVector,
}

impl GeodesicSegment {
    pub fn new(a: UnitVector, b: UnitVector) -> Result<Self> {
        if geodesic_distance(&a, &b) >= PI - CONSTRUCTION_TOL {
            return Err(Error::Domain("antipodal endpoints do not define a segment".into()));
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        geodesic_distance(&self.a, &self.b)
    }

    /// Point at fraction `t` ∈ [0, 1] of the arc length.
    pub fn point_at(&self, t: f64) -> UnitVector {
        slerp(&self.a, &self.b, t)
    }

    pub fn distance_to(&self, p: &UnitVector) -> f64 {
        point_arc_distance(p, &self.a, &self.b)
    }
}

pub(crate) fn slerp(a: &UnitVector, b: &UnitVector, t: f64) -> UnitVector {
    let omega = geodesic_distance(a, b);
    if omega < 1e-15 {
        return *a;
    }
    let s = omega.sin();
    let fa = ((1.0 - t) * omega).sin() / s;
    let fb = (t * omega).sin() / s;
    UnitVector::new(fa * a.x + fb * b.x, fa * a.y + fb * b.y, fa * a.z + fb * b.z).unwrap_or(*a)
}

/// Distance from `p` to the minor arc from `a` to `b`.
pub(crate) fn point_arc_distance(p: &UnitVector, a: &UnitVector, b: &UnitVector) -> f64 {
    let n = a.cross(b);
    let nn = norm(n);
    let da = geodesic_distance(p, a);
    let db = geodesic_distance(p, b);
    if nn < 1e-15 {
        return da.min(db);
    }
    let n = [n[0] / nn, n[1] / nn, n[2] / nn];
    let pn = p.dot_raw(n);
    let q = [p.x - pn * n[0], p.y - pn * n[1], p.z - pn * n[2]];
    let qn = norm(q);
    if qn < 1e-15 {
        // p is a pole of the arc's great circle; every arc point is at π/2.
        return FRAC_PI_2;
    }
    // q lies strictly on the arc iff it is on the inner side of both endpoints.
    let on_arc = dot3(cross3(a.to_array(), q), n) >= 0.0 && dot3(cross3(q, b.to_array()), n) >= 0.0;
    if on_arc {
        pn.abs().atan2(qn).min(da).min(db)
    } else {
        da.min(db)
    }
}

/// Tangent-plane chart of the open hemisphere around `center`.
///
/// Great-circle arcs inside the hemisphere map to straight segments. The
/// basis `(e1, e2)` satisfies e1 × e2 = center, so counterclockwise planar
/// order matches counterclockwise order seen from outside the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnomonicFrame {
    pub center: UnitVector,
    e1: [f64; 3],
    e2: [f64; 3],
}

impl GnomonicFrame {
    pub fn new(center: UnitVector) -> Self {
        let c = center.to_array();
        let ax = c[0].abs();
        let ay = c[1].abs();
        let az = c[2].abs();
        let helper = if ax <= ay && ax <= az {
            [1.0, 0.0, 0.0]
        } else if ay <= az {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let e1 = cross3(helper, c);
        let n1 = norm(e1);
        let e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
        let e2 = cross3(c, e1);
        Self { center, e1, e2 }
    }

    pub fn project(&self, p: &UnitVector) -> Result<[f64; 2]> {
        let w = self.center.dot(p);
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::OutOfHemisphere { distance: geodesic_distance(&self.center, p) });
        }
        Ok([p.dot_raw(self.e1) / w, p.dot_raw(self.e2) / w])
    }

    pub fn unproject(&self, q: [f64; 2]) -> UnitVector {
        let c = self.center.to_array();
        let v = [
            c[0] + q[0] * self.e1[0] + q[1] * self.e2[0],
            c[1] + q[0] * self.e1[1] + q[1] * self.e2[1],
            c[2] + q[0] * self.e1[2] + q[1] * self.e2[2],
        ];
        // |v| ≥ 1 because the plane is tangent at a unit vector.
        UnitVector::new(v[0], v[1], v[2]).expect("tangent-plane point has norm ≥ 1")
    }
}

/// Gnomonic image of `p` in the tangent plane at `center`.
pub fn gnomonic_project(center: &UnitVector, p: &UnitVector) -> Result<[f64; 2]> {
    GnomonicFrame::new(*center).project(p)
}

/// Inverse of [`gnomonic_project`].
pub fn gnomonic_unproject(center: &UnitVector, q: [f64; 2]) -> UnitVector {
    GnomonicFrame::new(*center).unproject(q)
}

/// Returns the normalized vertex mean if every vertex lies strictly inside
/// the open hemisphere around it.
pub(crate) fn hemisphere_witness(points: &[UnitVector]) -> Option<UnitVector> {
    let mut s = [0.0; 3];
    for p in points {
        s[0] += p.x;
        s[1] += p.y;
        s[2] += p.z;
    }
    let c = UnitVector::from_array(s).ok()?;
    if points.iter().all(|p| c.dot(p) > 0.0) {
        Some(c)
    } else {
        None
    }
}

/// Area of a convex geodesic polygon (spherical excess).
///
/// Sums the signed excess of the fan triangles `(v₀, vᵢ, vᵢ₊₁)` with
/// `tan(E/2) = a·(b×c) / (1 + a·b + b·c + c·a)`, which stays accurate when
/// interior angles approach π. Either orientation is accepted; degenerate
/// (collinear) vertex lists give 0.
pub fn spherical_polygon_area(vertices: &[UnitVector]) -> Result<f64> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::MalformedPolygon(format!("{n} vertices, need at least 3")));
    }
    if hemisphere_witness(vertices).is_none() {
        return Err(Error::MalformedPolygon("vertices are not contained in one open hemisphere".into()));
    }
    let a = &vertices[0];
    let mut total = 0.0;
    for i in 1..n - 1 {
        let (b, c) = (&vertices[i], &vertices[i + 1]);
        let triple = a.dot_raw(b.cross(c));
        let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
        total += 2.0 * triple.atan2(denom);
    }
    Ok(total.abs())
}

/// Deterministic generator for stream `stream` of the base seed.
pub fn seeded_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

/// Area-uniform point on S² (uniform in cos θ and φ).
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    UnitVector::from_cos_theta(z, phi)
}
