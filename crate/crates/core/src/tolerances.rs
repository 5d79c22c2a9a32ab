//! Centralized numeric tolerances.
//!
//! Every threshold used by the kernels and the verification suites lives
//! here, so that no module carries its own ad-hoc magic numbers.

/// Absolute tolerance of the symmetric eigensolver (cyclic Jacobi off-norm
/// target). Adequate for dense matrices up to a few hundred rows.
pub const EIGEN_ABS: f64 = 1e-10;

/// Tolerance for matrix-exponential identities (semigroup property, decay of
/// `exp(tS)` for negative-definite `S`).
pub const EXP_IDENTITY: f64 = 1e-8;

/// Maximal allowed asymmetry `max |S - S'|` before the symmetric eigensolver
/// refuses the input.
pub const SYMMETRY_ABS: f64 = 1e-10;

/// Relative tolerance of the finite-difference Jacobian self-test run by
/// every model constructor.
pub const JACOBIAN_SELF_TEST_REL: f64 = 1e-5;

/// Number of random probe points used by the Jacobian self-test.
pub const JACOBIAN_SELF_TEST_PROBES: usize = 20;

/// Eigenvalues above this (negative) floor are accepted as semidefinite;
/// smaller ones reject the matrix.
pub const PSD_FLOOR: f64 = -1e-12;

/// Eigenvalue clamp used when taking symmetric matrix square roots.
pub const SQRT_CLAMP: f64 = 1e-12;

/// Unit-norm drift allowed on sphere points before renormalization.
pub const UNIT_NORM_ABS: f64 = 1e-12;

/// Tangency tolerance for sphere tangent vectors.
pub const TANGENT_ABS: f64 = 1e-12;

/// Width of the decoupling neighbourhood around the sphere cut locus.
pub const CUT_LOCUS_EPS: f64 = 1e-6;

/// Any state coordinate beyond this magnitude aborts the replica as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Hard cap on the dense particle Jacobian and condition matrices
/// (`N * d` rows).
pub const DENSE_BLOCK_CAP: usize = 512;

/// Order of the Gauss-Legendre rule used for interval-averaged gradients;
/// exact for polynomial integrands up to degree `2 * 16 - 1 = 31`.
pub const GAUSS_LEGENDRE_ORDER: usize = 16;

/// Multiplicative slack constant for discrete exponential-contraction checks:
/// a simulated ratio may exceed its continuous bound by `1 + c * h * t`.
pub const DISCRETE_SLACK_RATE: f64 = 10.0;
