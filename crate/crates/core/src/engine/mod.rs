//! Time-stepping engine for every stochastic flow in the lab.
//!
//! The scheme is Euler-Maruyama throughout: strong order 1 for the
//! additive-noise families used by the closed-form checks, and order 1/2 in
//! general. All randomness enters through [`crate::rng::NoiseStream`]
//! substreams keyed by `(seed, replica, particle)`, so replicas and
//! particles can be scheduled in any order without changing a single bit of
//! the output.

mod chaos;
mod eps;
mod flows;
mod particles;
mod source;

pub use chaos::{run_chaos_coupling, ChaosRun};
pub use eps::{run_eps_derivative, EpsDerivativeRun};
pub use flows::{
    mean_diffusion_col, mean_drift, mean_jac_diffusion_y, mean_jac_drift_y, run_coupled_pair,
    run_flow, run_flow_with_jacobian, step_count, step_flow, step_jacobian, CoupledPaths,
    CoupledSources, FlowJacobianRun, FlowRun, FlowScratch, FlowState,
};
pub use particles::{
    mean_field_drifts, run_particle_jacobian, run_particles, sorted_order, ParticleJacobianRun,
    ParticleRun,
};
pub use source::{MeasureFlowSource, MeasureView};
