//! Closed-form geometry of the unit sphere in R^3.
//!
//! Distance is the angle `arccos <p, q>`, the exponential map rotates in the
//! plane spanned by the base point and the tangent direction, the log map
//! inverts it away from the antipode, and parallel transport along the
//! minimal geodesic is the Rodrigues rotation
//! `v - (<p, v> + <q, v>) / (1 + <p, q>) (p + q)`. All maps break down at
//! the cut locus (antipodal pairs), which callers must handle explicitly.

use crate::error::{Error, Result};
use crate::tolerances;

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn axpy(acc: &mut Vec3, s: f64, v: &Vec3) {
    acc[0] += s * v[0];
    acc[1] += s * v[1];
    acc[2] += s * v[2];
}

/// A point on the unit sphere; the constructor enforces unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    pub fn new(v: Vec3) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("point norm {n} too far from 1")));
        }
        Ok(SpherePoint(scale(&v, 1.0 / n)))
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere, reporting the
    /// renormalization magnitude `| |v| - 1 |`.
    pub fn project(v: Vec3) -> Result<(Self, f64)> {
        let n = norm(&v);
        if n < 1e-12 || !n.is_finite() {
            return Err(Error::invalid("cannot project a near-zero vector to the sphere"));
        }
        Ok((SpherePoint(scale(&v, 1.0 / n)), (n - 1.0).abs()))
    }

    pub fn north() -> Self {
        SpherePoint([0.0, 0.0, 1.0])
    }

    pub fn coords(&self) -> &Vec3 {
        &self.0
    }

    /// Tangential projection `v - <v, p> p`.
    pub fn project_tangent(&self, v: &Vec3) -> Vec3 {
        let c = dot(v, &self.0);
        sub(v, &scale(&self.0, c))
    }

    /// Deterministic orthonormal tangent basis, stable under small
    /// perturbations of the base point.
    pub fn tangent_basis(&self) -> (Vec3, Vec3) {
        let p = &self.0;
        // Pick the coordinate axis least aligned with p.
        let axis = if p[0].abs() <= p[1].abs() && p[0].abs() <= p[2].abs() {
            [1.0, 0.0, 0.0]
        } else if p[1].abs() <= p[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let mut e1 = self.project_tangent(&axis);
        let n1 = norm(&e1);
        e1 = scale(&e1, 1.0 / n1);
        let e2 = cross(p, &e1);
        (e1, e2)
    }
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Tangent vector at a base point; `<base, vec> = 0` within tolerance.
#[derive(Debug, Clone, Copy)]
pub struct TangentVector {
    pub base: SpherePoint,
    pub vec: Vec3,
}

impl TangentVector {
    pub fn new(base: SpherePoint, vec: Vec3) -> Result<Self> {
        let tangency = dot(&vec, base.coords()).abs();
        if tangency > tolerances::TANGENT_ABS * (1.0 + norm(&vec)) {
            return Err(Error::invalid(format!("vector not tangent (defect {tangency:.3e})")));
        }
        Ok(TangentVector { base, vec })
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }
}

/// Geodesic distance, the angle between the two unit vectors.
///
/// Computed as `atan2(|p x q|, <p, q>)`, which keeps full precision at tiny
/// separations where `arccos <p, q>` cannot resolve below ~1e-8.
pub fn distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    let c = cross(p.coords(), q.coords());
    norm(&c).atan2(dot(p.coords(), q.coords()))
}

/// Exponential map: rotate the base in the plane of `(base, v)` by `|v|`.
pub fn exp_map(v: &TangentVector) -> SpherePoint {
    let theta = v.norm();
    if theta < 1e-300 {
        return v.base;
    }
    let dir = scale(&v.vec, 1.0 / theta);
    let p = v.base.coords();
    let out = add(&scale(p, theta.cos()), &scale(&dir, theta.sin()));
    // Unit by construction up to rounding; renormalize to keep the invariant
    // exact over long runs.
    SpherePoint::project(out).expect("exp_map output is never zero").0
}

/// Log map: the tangent at `p` whose exponential reaches `q`. Fails on
/// antipodal pairs where the minimal geodesic is not unique.
///
/// The tangential projection of `q` has length `sin theta` exactly, so the
/// rescaling factor `theta / sin theta` stays accurate down to coincident
/// points.
pub fn log_map(p: &SpherePoint, q: &SpherePoint) -> Result<TangentVector> {
    let c = dot(p.coords(), q.coords());
    if c < -1.0 + tolerances::CUT_LOCUS_EPS {
        return Err(Error::CutLocus("log map at an antipodal pair".into()));
    }
    let rest = p.project_tangent(q.coords());
    let sin_theta = norm(&rest);
    if sin_theta < 1e-300 {
        return Ok(TangentVector { base: *p, vec: [0.0, 0.0, 0.0] });
    }
    let theta = sin_theta.atan2(c);
    let vec = scale(&rest, theta / sin_theta);
    Ok(TangentVector { base: *p, vec })
}

/// Parallel transport of `v` (tangent at `p`) along the minimal geodesic to
/// `q`; an isometry away from the cut locus.
pub fn transport(p: &SpherePoint, q: &SpherePoint, v: &Vec3) -> Result<Vec3> {
    let c = dot(p.coords(), q.coords());
    if c < -1.0 + tolerances::CUT_LOCUS_EPS {
        return Err(Error::CutLocus("parallel transport at an antipodal pair".into()));
    }
    let pq = add(p.coords(), q.coords());
    let f = (dot(p.coords(), v) + dot(q.coords(), v)) / (1.0 + c);
    Ok(sub(v, &scale(&pq, f)))
}
