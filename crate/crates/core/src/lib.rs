//! Simulation and verification laboratory for nonlinear (McKean-Vlasov)
//! diffusions and their mean-field particle approximations.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//!   models  ->  conditions  ->  engine  ->  experiments
//!                 |               |
//!               linalg         oracles / sphere
//! ```
//!
//! * [`linalg`] — dense small-matrix kernels: spectral, Frobenius and
//!   logarithmic norms, symmetric eigensolver, matrix exponential.
//! * [`models`] — the drift/diffusion abstraction with analytic Jacobians and
//!   the three built-in model families (interacting Langevin, linear-Gaussian,
//!   geometric).
//! * [`conditions`] — assembly of the four contraction condition matrices and
//!   sampled estimation of the implied rates.
//! * [`engine`] — Euler-Maruyama time stepping for the nonlinear flow, its
//!   Jacobian flow, synchronous couplings, the interpolation-derivative flow,
//!   the N-particle system and the particle Jacobian flow.
//! * [`oracles`] — closed-form reference flows, Wasserstein-2 distances and
//!   Gibbs-measure references used as ground truth in tests.
//! * [`sphere`] — the same program on the unit sphere: geometry primitives,
//!   intrinsic Langevin stepping, parallel-transport couplings, index bound.
//! * [`exp`] — declarative experiment registry, CSV/SVG emission.
//!
//! All randomness flows through seeded [`rng::NoiseStream`]s so that every
//! run is reproducible bit for bit, independently of the worker schedule.
//! The `parallel` feature (on by default) fans replica and particle loops out
//! to a rayon pool; disabling it selects a sequential fallback with identical
//! results.

pub mod conditions;
pub mod engine;
pub mod error;
pub mod exp;
pub mod linalg;
pub mod models;
pub mod oracles;
pub mod parallel;
pub mod rng;
pub mod sphere;
pub mod tolerances;

pub use error::{Error, Result};
