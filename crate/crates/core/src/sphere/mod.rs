//! Nonlinear diffusions on the unit sphere.
//!
//! The sphere is the one manifold where every primitive the theory needs —
//! geodesics, parallel transport, Ricci curvature, injectivity radius — is
//! closed-form, which makes the Riemannian statements testable without a
//! geometry engine. The Ricci curvature equals the metric (`kappa = 1` in
//! the normalization used by the index bound), and the flat circle is kept
//! alongside as a degenerate sanity case.

mod circle;
mod coupling;
mod geometry;
mod index;
mod langevin;

pub use circle::{
    circle_distance, circle_exp, circle_log, circle_transport, run_circle_coupled_pair,
    wrap_angle, CirclePoint,
};
pub use coupling::{
    cap_point, estimate_beta, estimate_beta_parts, estimate_sphere_chaos_rate,
    estimate_sphere_rate_a, run_sphere_chaos_sweep, run_sphere_coupled_pair,
    run_sphere_ensemble, uniform_point, SphereChaosSweep, SphereCloudRun, SphereCoupledRun,
};
pub use geometry::{
    cross, distance, dot, exp_map, log_map, norm, transport, SpherePoint, TangentVector, Vec3,
};
pub use index::index_bound;
pub use langevin::{
    draw_tangent_increment, step_sphere_langevin, SphereInteraction, SpherePotential,
    SphereStepMode,
};

/// Ricci lower bound of the unit two-sphere in the metric normalization
/// used throughout (`Ric = g`).
pub const SPHERE_RICCI_LOWER_BOUND: f64 = 1.0;
