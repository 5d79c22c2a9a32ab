//! Intrinsic Langevin dynamics on the sphere.
//!
//! The drift is `b(x, y) = -grad U(y) - grad_y F(rho(x, y))` with `U` a
//! potential in the height variable and `F` an interaction in the geodesic
//! distance with `F'(0) = 0`; the noise is standard Brownian motion on the
//! sphere (identity diffusion on each tangent space). A step draws a 2-D
//! Gaussian in an orthonormal tangent basis and applies the exponential map
//! (geodesic retraction); a projection variant is kept for cross-validation
//! and agrees in law to first order in the step size.

use crate::error::Result;
use crate::rng::NoiseStream;

use super::geometry::{
    axpy, distance, dot, exp_map, log_map, scale, SpherePoint, TangentVector, Vec3,
};

/// Potentials in the height `<y, n>` with closed-form geodesic Hessians.
///
/// Writing `theta` for the polar angle from the axis `n` and `f(theta)` for
/// the profile, the Hessian eigenvalues are `f''(theta)` (radial) and
/// `f'(theta) cot(theta)` (tangential).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePotential {
    Zero,
    /// `U(y) = a (1 - <y, n>)`: profile `a (1 - cos theta)`, isotropic
    /// Hessian `a cos(theta) g`.
    CosineWell { alpha: f64 },
    /// `U(y) = -(a/2) <y, n>^2`: profile `(a/2) sin^2 theta` up to a
    /// constant; radial curvature `a cos(2 theta)`, tangential
    /// `a cos^2 theta`. Strongly convex inside caps below 45 degrees.
    HeightSquared { alpha: f64 },
}

impl SpherePotential {
    /// Axis of symmetry (fixed to the north pole).
    pub fn axis() -> Vec3 {
        [0.0, 0.0, 1.0]
    }

    pub fn value(&self, p: &SpherePoint) -> f64 {
        let hgt = dot(p.coords(), &Self::axis());
        match self {
            SpherePotential::Zero => 0.0,
            SpherePotential::CosineWell { alpha } => alpha * (1.0 - hgt),
            SpherePotential::HeightSquared { alpha } => -0.5 * alpha * hgt * hgt,
        }
    }

    /// Riemannian gradient (tangential projection of the ambient gradient).
    pub fn gradient(&self, p: &SpherePoint) -> Vec3 {
        let n = Self::axis();
        let hgt = dot(p.coords(), &n);
        match self {
            SpherePotential::Zero => [0.0, 0.0, 0.0],
            SpherePotential::CosineWell { alpha } => {
                // ambient grad of a(1 - <y, n>) is -a n
                scale(&p.project_tangent(&n), -alpha)
            }
            SpherePotential::HeightSquared { alpha } => {
                // ambient grad of -(a/2) <y, n>^2 is -a <y, n> n
                scale(&p.project_tangent(&n), -alpha * hgt)
            }
        }
    }

    /// Radial and tangential eigenvalues of the geodesic Hessian at polar
    /// angle `theta`.
    pub fn hessian_eigenvalues(&self, theta: f64) -> (f64, f64) {
        match self {
            SpherePotential::Zero => (0.0, 0.0),
            SpherePotential::CosineWell { alpha } => {
                let v = alpha * theta.cos();
                (v, v)
            }
            SpherePotential::HeightSquared { alpha } => {
                (alpha * (2.0 * theta).cos(), alpha * theta.cos().powi(2))
            }
        }
    }

    pub fn hessian_min_eigenvalue(&self, theta: f64) -> f64 {
        let (r, t) = self.hessian_eigenvalues(theta);
        r.min(t)
    }
}

/// Distance interaction `F(rho) = beta (1 - cos rho)` smoothly cut off to
/// vanish beyond `cutoff_end < pi`, keeping the drift away from the cut
/// locus. The raw profile has full support; the cutoff is the documented
/// deviation that restores compact support.
#[derive(Debug, Clone, Copy)]
pub struct SphereInteraction {
    pub beta: f64,
    pub cutoff_start: f64,
    pub cutoff_end: f64,
}

impl SphereInteraction {
    pub fn new(beta: f64) -> Self {
        SphereInteraction { beta, cutoff_start: 2.5, cutoff_end: 3.0 }
    }

    pub fn zero() -> Self {
        SphereInteraction { beta: 0.0, cutoff_start: 2.5, cutoff_end: 3.0 }
    }

    fn cutoff(&self, rho: f64) -> f64 {
        if rho <= self.cutoff_start {
            1.0
        } else if rho >= self.cutoff_end {
            0.0
        } else {
            let u = (self.cutoff_end - rho) / (self.cutoff_end - self.cutoff_start);
            u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
        }
    }

    pub fn f(&self, rho: f64) -> f64 {
        self.beta * (1.0 - rho.cos()) * self.cutoff(rho)
    }

    /// Derivative of the cut-off profile, via the product rule on the
    /// smoothstep window.
    pub fn f_prime(&self, rho: f64) -> f64 {
        let chi = self.cutoff(rho);
        let dchi = if rho <= self.cutoff_start || rho >= self.cutoff_end {
            0.0
        } else {
            let w = self.cutoff_end - self.cutoff_start;
            let u = (self.cutoff_end - rho) / w;
            -(30.0 * u * u * (1.0 - u) * (1.0 - u)) / w
        };
        self.beta * (rho.sin() * chi + (1.0 - rho.cos()) * dchi)
    }

    /// Drift contribution at `y` from an interaction partner at `x`:
    /// `-grad_y F(rho(x, .)) = F'(rho) log_y(x) / rho`, pointing toward the
    /// partner for attractive `F`.
    pub fn drift(&self, x: &SpherePoint, y: &SpherePoint) -> Vec3 {
        let rho = distance(x, y);
        if rho < 1e-9 || rho >= self.cutoff_end {
            return [0.0, 0.0, 0.0];
        }
        // log_y(x) is safe: rho < cutoff_end < pi keeps us off the cut locus.
        let toward = log_map(y, x).expect("within injectivity radius").vec;
        scale(&toward, self.f_prime(rho) / rho)
    }
}

/// Step realization: geodesic retraction via the exponential map, or ambient
/// update with projection back to the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereStepMode {
    Geodesic,
    Projection,
}

/// One Ito step of the sphere Langevin diffusion.
///
/// `cloud` supplies the interaction partners (empirical measure); an empty
/// slice means no interaction. Returns the new point and the
/// renormalization magnitude of the projection.
pub fn step_sphere_langevin(
    potential: &SpherePotential,
    interaction: &SphereInteraction,
    cloud: &[SpherePoint],
    state: &SpherePoint,
    h: f64,
    dw: &[f64; 2],
    mode: SphereStepMode,
) -> Result<(SpherePoint, f64)> {
    let mut drift = scale(&potential.gradient(state), -1.0);
    if interaction.beta != 0.0 && !cloud.is_empty() {
        let w = 1.0 / cloud.len() as f64;
        for x in cloud {
            let pull = interaction.drift(x, state);
            axpy(&mut drift, w, &pull);
        }
    }
    let (e1, e2) = state.tangent_basis();
    let mut increment = scale(&drift, h);
    axpy(&mut increment, dw[0], &e1);
    axpy(&mut increment, dw[1], &e2);
    match mode {
        SphereStepMode::Geodesic => {
            let v = TangentVector { base: *state, vec: increment };
            Ok((exp_map(&v), 0.0))
        }
        SphereStepMode::Projection => {
            let raw = [
                state.coords()[0] + increment[0],
                state.coords()[1] + increment[1],
                state.coords()[2] + increment[2],
            ];
            let (p, renorm) = SpherePoint::project(raw)?;
            Ok((p, renorm))
        }
    }
}

/// Draws the 2-D tangent increment for one step.
pub fn draw_tangent_increment(stream: &mut NoiseStream, h: f64) -> [f64; 2] {
    let s = h.sqrt();
    [s * stream.normal(), s * stream.normal()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_vanishes_at_the_pole() {
        let north = SpherePoint::north();
        for p in [
            SpherePotential::CosineWell { alpha: 2.0 },
            SpherePotential::HeightSquared { alpha: 3.0 },
        ] {
            let g = p.gradient(&north);
            assert!(g.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn gradient_matches_finite_differences_along_geodesics() {
        let mut stream = NoiseStream::new(3, 3);
        let pots = [
            SpherePotential::CosineWell { alpha: 1.3 },
            SpherePotential::HeightSquared { alpha: 2.1 },
        ];
        for pot in pots {
            for _ in 0..20 {
                let p = SpherePoint::project([
                    stream.normal(),
                    stream.normal(),
                    stream.normal(),
                ])
                .unwrap()
                .0;
                let (e1, e2) = p.tangent_basis();
                let grad = pot.gradient(&p);
                for dir in [e1, e2] {
                    let delta = 1e-6;
                    let fp = pot.value(&exp_map(&TangentVector { base: p, vec: scale(&dir, delta) }));
                    let fm =
                        pot.value(&exp_map(&TangentVector { base: p, vec: scale(&dir, -delta) }));
                    let fd = (fp - fm) / (2.0 * delta);
                    assert_relative_eq!(fd, dot(&grad, &dir), epsilon = 1e-6, max_relative = 1e-5);
                }
            }
        }
    }

    #[test]
    fn hessian_eigenvalues_match_second_differences() {
        let pot = SpherePotential::HeightSquared { alpha: 2.0 };
        // Walk along a meridian: radial direction at polar angle theta.
        for &theta in &[0.3_f64, 0.7, 1.1] {
            let p = SpherePoint::new([theta.sin(), 0.0, theta.cos()]).unwrap();
            let radial = [theta.cos(), 0.0, -theta.sin()]; // increasing theta
            let tangential = [0.0, 1.0, 0.0];
            let (expect_r, expect_t) = pot.hessian_eigenvalues(theta);
            for (dir, expect) in [(radial, expect_r), (tangential, expect_t)] {
                let delta = 1e-4;
                let f0 = pot.value(&p);
                let fp = pot.value(&exp_map(&TangentVector { base: p, vec: scale(&dir, delta) }));
                let fm = pot.value(&exp_map(&TangentVector { base: p, vec: scale(&dir, -delta) }));
                let second = (fp - 2.0 * f0 + fm) / (delta * delta);
                assert_relative_eq!(second, expect, epsilon = 1e-5, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn interaction_drift_matches_finite_difference_of_profile() {
        let inter = SphereInteraction::new(0.7);
        let mut stream = NoiseStream::new(8, 1);
        for _ in 0..20 {
            let x = SpherePoint::project([stream.normal(), stream.normal(), stream.normal()])
                .unwrap()
                .0;
            let y = SpherePoint::project([stream.normal(), stream.normal(), stream.normal()])
                .unwrap()
                .0;
            if distance(&x, &y) > 2.4 || distance(&x, &y) < 0.05 {
                continue;
            }
            let drift = inter.drift(&x, &y);
            let (e1, e2) = y.tangent_basis();
            for dir in [e1, e2] {
                let delta = 1e-6;
                let fp = inter.f(distance(
                    &x,
                    &exp_map(&TangentVector { base: y, vec: scale(&dir, delta) }),
                ));
                let fm = inter.f(distance(
                    &x,
                    &exp_map(&TangentVector { base: y, vec: scale(&dir, -delta) }),
                ));
                let fd = -(fp - fm) / (2.0 * delta);
                assert_relative_eq!(fd, dot(&drift, &dir), epsilon = 1e-5, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn interaction_respects_cutoff_and_origin() {
        let inter = SphereInteraction::new(1.0);
        assert_eq!(inter.f_prime(0.0), 0.0);
        assert_eq!(inter.f(3.1), 0.0);
        assert_eq!(inter.f_prime(3.05), 0.0);
        // continuity at the window edges
        assert_relative_eq!(inter.f(2.5 - 1e-9), inter.f(2.5 + 1e-9), epsilon = 1e-6);
    }

    #[test]
    fn height_potential_drift_at_pole_is_zero_and_steps_stay_unit() {
        let pot = SpherePotential::CosineWell { alpha: 1.0 };
        let inter = SphereInteraction::zero();
        let north = SpherePoint::north();
        let (next, _) = step_sphere_langevin(
            &pot,
            &inter,
            &[],
            &north,
            0.01,
            &[0.0, 0.0],
            SphereStepMode::Geodesic,
        )
        .unwrap();
        assert!(distance(&next, &north) < 1e-14);
    }

    #[test]
    fn geodesic_and_projection_steps_agree_to_first_order() {
        let pot = SpherePotential::HeightSquared { alpha: 1.5 };
        let inter = SphereInteraction::zero();
        let p = SpherePoint::project([0.3, 0.4, 0.87]).unwrap().0;
        let h = 1e-6_f64;
        let dw = [2.0 * h.sqrt(), -1.0 * h.sqrt()];
        let (a, _) =
            step_sphere_langevin(&pot, &inter, &[], &p, h, &dw, SphereStepMode::Geodesic).unwrap();
        let (b, _) =
            step_sphere_langevin(&pot, &inter, &[], &p, h, &dw, SphereStepMode::Projection)
                .unwrap();
        assert!(distance(&a, &b) < 10.0 * h, "modes differ by {}", distance(&a, &b));
    }
}
