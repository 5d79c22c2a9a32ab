//! Drift/diffusion models with analytic Jacobians.
//!
//! A [`McKeanVlasovModel`] packages the pair drift `b_t(x, y)` and diffusion
//! columns `s_{k,t}(x, y)` together with all four block Jacobians
//! (`d/dx b`, `d/dy b`, `d/dx s_k`, `d/dy s_k`). The first argument slot is
//! the interaction coordinate that gets averaged over the current law; the
//! second is the state of the diffusing particle.
//!
//! Jacobians use the standard layout: entry `(i, j)` is the derivative of
//! output component `i` with respect to input component `j`. Every
//! constructor runs a finite-difference self-test of all supplied Jacobians
//! before returning the model.

pub mod potentials;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::rng::NoiseStream;
use crate::tolerances;

pub use potentials::{Parity, Potential};

/// Confinement/interaction pair driving the Langevin family.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    pub confinement: Potential,
    pub interaction: Potential,
    pub sigma0: f64,
}

impl PotentialPair {
    pub fn new(confinement: Potential, interaction: Potential, sigma0: f64) -> Result<Self> {
        if confinement.dim != interaction.dim {
            return Err(Error::invalid("confinement and interaction dimensions differ"));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::invalid("sigma0 must be positive"));
        }
        let pair = PotentialPair { confinement, interaction, sigma0 };
        pair.check_parity()?;
        Ok(pair)
    }

    pub fn dim(&self) -> usize {
        self.confinement.dim
    }

    /// Spot-checks the declared parity of the interaction at fixed probes.
    fn check_parity(&self) -> Result<()> {
        let d = self.dim();
        let mut stream = NoiseStream::new(0x5ca1e, 0);
        for _ in 0..8 {
            let z: Vec<f64> = (0..d).map(|_| stream.uniform(-1.7, 1.7)).collect();
            let neg: Vec<f64> = z.iter().map(|v| -v).collect();
            let v = self.interaction.value(&z);
            let w = self.interaction.value(&neg);
            let tol = 1e-10 * (1.0 + v.abs());
            match self.interaction.parity {
                Parity::Even if (v - w).abs() > tol => {
                    return Err(Error::invalid("interaction declared even but V(-z) != V(z)"))
                }
                Parity::Odd if (v + w).abs() > tol => {
                    return Err(Error::invalid("interaction declared odd but V(-z) != -V(z)"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Identifies the closed-form family a model belongs to, so exact measure
/// sources can refuse mismatched models.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Langevin,
    LinearGaussian { a1: SquareMatrix, a2: SquareMatrix, noise_cov: SquareMatrix },
    Geometric { a1: f64, a2: f64, sigma0: f64 },
    Custom,
}

type DriftFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
type DiffusionFn = Arc<dyn Fn(f64, &[f64], &[f64], usize, &mut [f64]) + Send + Sync>;
type JacFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut SquareMatrix) + Send + Sync>;
type JacColFn = Arc<dyn Fn(f64, &[f64], &[f64], usize, &mut SquareMatrix) + Send + Sync>;

/// A McKean-Vlasov model: pair drift, diffusion columns, and their Jacobians.
#[derive(Clone)]
pub struct McKeanVlasovModel {
    dim: usize,
    noise_dim: usize,
    kind: ModelKind,
    drift: DriftFn,
    diffusion_col: DiffusionFn,
    jac_drift_x: JacFn,
    jac_drift_y: JacFn,
    jac_diffusion_x: JacColFn,
    jac_diffusion_y: JacColFn,
    /// Diffusion independent of both arguments (columns may be hoisted).
    constant_diffusion: bool,
    /// All diffusion Jacobians vanish identically; enables the almost-sure
    /// branch of the gradient estimates.
    zero_diffusion_jacobian: bool,
    /// Lower clamp applied after each step (geometric model state space).
    state_floor: Option<f64>,
    /// Probe box for the Jacobian self-test.
    probe_range: (f64, f64),
    label: String,
}

impl fmt::Debug for McKeanVlasovModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "McKeanVlasovModel({}, d={}, r={})", self.label, self.dim, self.noise_dim)
    }
}

impl McKeanVlasovModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn constant_diffusion(&self) -> bool {
        self.constant_diffusion
    }

    pub fn zero_diffusion_jacobian(&self) -> bool {
        self.zero_diffusion_jacobian
    }

    pub fn state_floor(&self) -> Option<f64> {
        self.state_floor
    }

    #[inline]
    pub fn drift(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, y, out)
    }

    #[inline]
    pub fn diffusion_col(&self, t: f64, x: &[f64], y: &[f64], k: usize, out: &mut [f64]) {
        (self.diffusion_col)(t, x, y, k, out)
    }

    #[inline]
    pub fn jac_drift_x(&self, t: f64, x: &[f64], y: &[f64], out: &mut SquareMatrix) {
        (self.jac_drift_x)(t, x, y, out)
    }

    #[inline]
    pub fn jac_drift_y(&self, t: f64, x: &[f64], y: &[f64], out: &mut SquareMatrix) {
        (self.jac_drift_y)(t, x, y, out)
    }

    #[inline]
    pub fn jac_diffusion_x(&self, t: f64, x: &[f64], y: &[f64], k: usize, out: &mut SquareMatrix) {
        (self.jac_diffusion_x)(t, x, y, k, out)
    }

    #[inline]
    pub fn jac_diffusion_y(&self, t: f64, x: &[f64], y: &[f64], k: usize, out: &mut SquareMatrix) {
        (self.jac_diffusion_y)(t, x, y, k, out)
    }

    pub fn drift_vec(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift(t, x, y, &mut out);
        out
    }
}

// Reusable per-thread buffers for the Langevin closures; these sit in the
// innermost loops of every particle sweep, so per-call allocation is not an
// option.
thread_local! {
    static LANGEVIN_SCRATCH: std::cell::RefCell<LangevinScratch> =
        std::cell::RefCell::new(LangevinScratch { diff: Vec::new(), grad: Vec::new(), hess: SquareMatrix::zeros(1) });
}

struct LangevinScratch {
    diff: Vec<f64>,
    grad: Vec<f64>,
    hess: SquareMatrix,
}

impl LangevinScratch {
    fn ensure_dim(&mut self, d: usize) {
        if self.diff.len() != d {
            self.diff = vec![0.0; d];
            self.grad = vec![0.0; d];
            self.hess = SquareMatrix::zeros(d);
        }
    }
}

/// Interacting Langevin model: `s(x, y) = sigma0 I` and
/// `b(x, y) = -grad U(y) - grad V(y - x)`.
pub fn make_langevin(pair: PotentialPair) -> Result<McKeanVlasovModel> {
    let d = pair.dim();
    let sigma0 = pair.sigma0;
    let u = pair.confinement.clone();
    let v = pair.interaction.clone();
    let label = format!("langevin[U={}, V={}, sigma0={}]", u.name(), v.name(), sigma0);

    let (u1, v1) = (u.clone(), v.clone());
    let drift: DriftFn = Arc::new(move |_t, x, y, out| {
        LANGEVIN_SCRATCH.with(|cell| {
            let scratch = &mut *cell.borrow_mut();
            scratch.ensure_dim(y.len());
            for i in 0..y.len() {
                scratch.diff[i] = y[i] - x[i];
            }
            u1.gradient(y, out);
            v1.gradient(&scratch.diff, &mut scratch.grad);
            for i in 0..y.len() {
                out[i] = -out[i] - scratch.grad[i];
            }
        })
    });

    let diffusion_col: DiffusionFn = Arc::new(move |_t, _x, _y, k, out| {
        out.fill(0.0);
        out[k] = sigma0;
    });

    let v2 = v.clone();
    let jac_drift_x: JacFn = Arc::new(move |_t, x, y, out| {
        LANGEVIN_SCRATCH.with(|cell| {
            let scratch = &mut *cell.borrow_mut();
            scratch.ensure_dim(y.len());
            for i in 0..y.len() {
                scratch.diff[i] = y[i] - x[i];
            }
            v2.hessian(&scratch.diff, out);
        })
    });

    let (u3, v3) = (u.clone(), v.clone());
    let jac_drift_y: JacFn = Arc::new(move |_t, x, y, out| {
        LANGEVIN_SCRATCH.with(|cell| {
            let scratch = &mut *cell.borrow_mut();
            scratch.ensure_dim(y.len());
            for i in 0..y.len() {
                scratch.diff[i] = y[i] - x[i];
            }
            u3.hessian(y, out);
            v3.hessian(&scratch.diff, &mut scratch.hess);
            for i in 0..y.len() {
                for j in 0..y.len() {
                    out.set(i, j, -out.get(i, j) - scratch.hess.get(i, j));
                }
            }
        })
    });

    let zero_jac: JacColFn = Arc::new(|_t, _x, _y, _k, out| {
        let n = out.dim();
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, 0.0);
            }
        }
    });

    let model = McKeanVlasovModel {
        dim: d,
        noise_dim: d,
        kind: ModelKind::Langevin,
        drift,
        diffusion_col,
        jac_drift_x,
        jac_drift_y,
        jac_diffusion_x: zero_jac.clone(),
        jac_diffusion_y: zero_jac,
        constant_diffusion: true,
        zero_diffusion_jacobian: true,
        state_floor: None,
        probe_range: (-2.0, 2.0),
        label,
    };
    validate_jacobians(&model)?;
    Ok(model)
}

/// Linear-Gaussian model: `b_t(x, y) = A1 x + A2 y`, `s_t(x, y) = R^(1/2)`.
pub fn make_linear_gaussian(
    a1: SquareMatrix,
    a2: SquareMatrix,
    noise_cov: SquareMatrix,
) -> Result<McKeanVlasovModel> {
    let d = a1.dim();
    if a2.dim() != d || noise_cov.dim() != d {
        return Err(Error::invalid("A1, A2 and R must share one dimension"));
    }
    if noise_cov.max_abs_asymmetry() > tolerances::SYMMETRY_ABS * noise_cov.max_abs().max(1.0) {
        return Err(Error::invalid("noise covariance R must be symmetric"));
    }
    let sqrt_r = linalg::sym_sqrt(&noise_cov)
        .map_err(|_| Error::invalid("noise covariance R must be positive semidefinite"))?;

    let label = "linear_gaussian".to_string();
    let (a1c, a2c) = (a1.clone(), a2.clone());
    let drift: DriftFn = Arc::new(move |_t, x, y, out| {
        for i in 0..out.len() {
            let mut acc = 0.0;
            for j in 0..x.len() {
                acc += a1c.get(i, j) * x[j] + a2c.get(i, j) * y[j];
            }
            out[i] = acc;
        }
    });

    let sq = sqrt_r.clone();
    let diffusion_col: DiffusionFn = Arc::new(move |_t, _x, _y, k, out| {
        for i in 0..out.len() {
            out[i] = sq.get(i, k);
        }
    });

    let a1j = a1.clone();
    let jac_drift_x: JacFn = Arc::new(move |_t, _x, _y, out| copy_into(&a1j, out));
    let a2j = a2.clone();
    let jac_drift_y: JacFn = Arc::new(move |_t, _x, _y, out| copy_into(&a2j, out));

    let zero_jac: JacColFn = Arc::new(|_t, _x, _y, _k, out| {
        let n = out.dim();
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, 0.0);
            }
        }
    });

    let model = McKeanVlasovModel {
        dim: d,
        noise_dim: d,
        kind: ModelKind::LinearGaussian { a1, a2, noise_cov },
        drift,
        diffusion_col,
        jac_drift_x,
        jac_drift_y,
        jac_diffusion_x: zero_jac.clone(),
        jac_diffusion_y: zero_jac,
        constant_diffusion: true,
        zero_diffusion_jacobian: true,
        state_floor: None,
        probe_range: (-2.0, 2.0),
        label,
    };
    validate_jacobians(&model)?;
    Ok(model)
}

/// Geometric diffusion on `[0, inf)`: `b_t(x, y) = (a1 - a2 x) y`,
/// `s_t(x, y) = sigma0 y`, scalar state and noise.
///
/// The exact flow preserves positivity but the discrete scheme may not, so
/// states are clamped at zero after each step and clamp events are counted by
/// the engine.
pub fn make_geometric(a1: f64, a2: f64, sigma0: f64) -> Result<McKeanVlasovModel> {
    if !(a2 > 0.0) || !(sigma0 > 0.0) {
        return Err(Error::invalid("geometric model requires a2 > 0 and sigma0 > 0"));
    }
    let label = format!("geometric[a1={a1}, a2={a2}, sigma0={sigma0}]");
    let drift: DriftFn = Arc::new(move |_t, x, y, out| out[0] = (a1 - a2 * x[0]) * y[0]);
    let diffusion_col: DiffusionFn = Arc::new(move |_t, _x, y, _k, out| out[0] = sigma0 * y[0]);
    let jac_drift_x: JacFn = Arc::new(move |_t, _x, y, out| out.set(0, 0, -a2 * y[0]));
    let jac_drift_y: JacFn = Arc::new(move |_t, x, _y, out| out.set(0, 0, a1 - a2 * x[0]));
    let jac_diffusion_x: JacColFn = Arc::new(|_t, _x, _y, _k, out| out.set(0, 0, 0.0));
    let jac_diffusion_y: JacColFn = Arc::new(move |_t, _x, _y, _k, out| out.set(0, 0, sigma0));

    let model = McKeanVlasovModel {
        dim: 1,
        noise_dim: 1,
        kind: ModelKind::Geometric { a1, a2, sigma0 },
        drift,
        diffusion_col,
        jac_drift_x,
        jac_drift_y,
        jac_diffusion_x,
        jac_diffusion_y,
        constant_diffusion: false,
        zero_diffusion_jacobian: false,
        state_floor: Some(0.0),
        probe_range: (0.1, 2.0),
        label,
    };
    validate_jacobians(&model)?;
    Ok(model)
}

/// Finite-difference self-test of all four Jacobian blocks.
///
/// Mandatory for every registered model: central differences of the drift and
/// each diffusion column must match the analytic Jacobians to
/// [`tolerances::JACOBIAN_SELF_TEST_REL`] at randomly sampled `(t, x, y)`.
pub fn validate_jacobians(model: &McKeanVlasovModel) -> Result<()> {
    let d = model.dim();
    let r = model.noise_dim();
    let (lo, hi) = model.probe_range;
    let mut stream = NoiseStream::new(0x7ace5, 1);
    let delta = 1e-5;
    let tol = tolerances::JACOBIAN_SELF_TEST_REL;

    let mut jac = SquareMatrix::zeros(d);
    for _ in 0..tolerances::JACOBIAN_SELF_TEST_PROBES {
        let t = stream.uniform(0.0, 2.0);
        let x: Vec<f64> = (0..d).map(|_| stream.uniform(lo, hi)).collect();
        let y: Vec<f64> = (0..d).map(|_| stream.uniform(lo, hi)).collect();

        for arg in 0..2 {
            // arg 0: differentiate in x; arg 1: in y.
            model_jac(model, arg, t, &x, &y, None, &mut jac);
            for j in 0..d {
                let (mut xp, mut yp) = (x.clone(), y.clone());
                let (mut xm, mut ym) = (x.clone(), y.clone());
                if arg == 0 {
                    xp[j] += delta;
                    xm[j] -= delta;
                } else {
                    yp[j] += delta;
                    ym[j] -= delta;
                }
                let fp = model.drift_vec(t, &xp, &yp);
                let fm = model.drift_vec(t, &xm, &ym);
                for i in 0..d {
                    let fd = (fp[i] - fm[i]) / (2.0 * delta);
                    let reference = jac.get(i, j);
                    if (fd - reference).abs() > tol * reference.abs().max(1.0) {
                        return Err(Error::invalid(format!(
                            "drift Jacobian self-test failed for {} (arg {arg}, entry {i},{j}: fd {fd} vs analytic {reference})",
                            model.label()
                        )));
                    }
                }
            }
            for k in 0..r {
                model_jac(model, arg, t, &x, &y, Some(k), &mut jac);
                for j in 0..d {
                    let (mut xp, mut yp) = (x.clone(), y.clone());
                    let (mut xm, mut ym) = (x.clone(), y.clone());
                    if arg == 0 {
                        xp[j] += delta;
                        xm[j] -= delta;
                    } else {
                        yp[j] += delta;
                        ym[j] -= delta;
                    }
                    let mut fp = vec![0.0; d];
                    let mut fm = vec![0.0; d];
                    model.diffusion_col(t, &xp, &yp, k, &mut fp);
                    model.diffusion_col(t, &xm, &ym, k, &mut fm);
                    for i in 0..d {
                        let fd = (fp[i] - fm[i]) / (2.0 * delta);
                        let reference = jac.get(i, j);
                        if (fd - reference).abs() > tol * reference.abs().max(1.0) {
                            return Err(Error::invalid(format!(
                                "diffusion Jacobian self-test failed for {} (col {k})",
                                model.label()
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn model_jac(
    model: &McKeanVlasovModel,
    arg: usize,
    t: f64,
    x: &[f64],
    y: &[f64],
    col: Option<usize>,
    out: &mut SquareMatrix,
) {
    match (arg, col) {
        (0, None) => model.jac_drift_x(t, x, y, out),
        (1, None) => model.jac_drift_y(t, x, y, out),
        (0, Some(k)) => model.jac_diffusion_x(t, x, y, k, out),
        (1, Some(k)) => model.jac_diffusion_y(t, x, y, k, out),
        _ => unreachable!(),
    }
}

fn copy_into(src: &SquareMatrix, out: &mut SquareMatrix) {
    for i in 0..src.dim() {
        for j in 0..src.dim() {
            out.set(i, j, src.get(i, j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn langevin_quadratic_confinement_drift() {
        // U = (l/2)|y|^2, V = 0  =>  b(x, y) = -l y.
        let pair = PotentialPair::new(Potential::quadratic(2, 1.5), Potential::zero(2), 1.0).unwrap();
        let m = make_langevin(pair).unwrap();
        let b = m.drift_vec(0.0, &[0.3, -0.4], &[1.0, 2.0]);
        assert_relative_eq!(b[0], -1.5, epsilon = 1e-14);
        assert_relative_eq!(b[1], -3.0, epsilon = 1e-14);
    }

    #[test]
    fn langevin_pure_interaction_drift() {
        // U = 0, V = (k/2)|z|^2  =>  b(x, y) = -k (y - x).
        let pair =
            PotentialPair::new(Potential::zero(1), Potential::quadratic_interaction(1, 2.0), 0.5)
                .unwrap();
        let m = make_langevin(pair).unwrap();
        let b = m.drift_vec(0.0, &[1.0], &[4.0]);
        assert_relative_eq!(b[0], -6.0, epsilon = 1e-14);
    }

    #[test]
    fn langevin_quartic_confinement_by_hand() {
        // U(y) = y^4/4 in d = 1: at y = 2 the confinement force is -8.
        let pair = PotentialPair::new(
            Potential::quartic_plus_quadratic(1, 1.0, 0.0),
            Potential::quadratic_interaction(1, 0.7),
            1.0,
        )
        .unwrap();
        let m = make_langevin(pair).unwrap();
        let x = [0.5];
        let b = m.drift_vec(0.0, &x, &[2.0]);
        // -8 - V'(2 - 0.5) = -8 - 0.7 * 1.5
        assert_relative_eq!(b[0], -8.0 - 0.7 * 1.5, epsilon = 1e-12);
    }

    #[test]
    fn langevin_reports_zero_diffusion_jacobian() {
        let pair = PotentialPair::new(Potential::quadratic(2, 1.0), Potential::zero(2), 1.0).unwrap();
        let m = make_langevin(pair).unwrap();
        assert!(m.zero_diffusion_jacobian());
        let mut jac = SquareMatrix::zeros(2);
        m.jac_diffusion_x(0.0, &[0.1, 0.2], &[0.3, 0.4], 1, &mut jac);
        assert_eq!(jac.max_abs(), 0.0);
        m.jac_diffusion_y(0.0, &[0.1, 0.2], &[0.3, 0.4], 0, &mut jac);
        assert_eq!(jac.max_abs(), 0.0);
    }

    #[test]
    fn langevin_even_interaction_self_consistency() {
        // For even V the assembled drift satisfies b(x, x) = -grad U(x).
        let pair = PotentialPair::new(
            Potential::quartic_plus_quadratic(2, 0.3, 1.0),
            Potential::cosine_well(2, 0.5),
            1.0,
        )
        .unwrap();
        let u = pair.confinement.clone();
        let m = make_langevin(pair).unwrap();
        let x = [0.7, -1.1];
        let b = m.drift_vec(0.0, &x, &x);
        let gu = u.gradient_vec(&x);
        for i in 0..2 {
            assert_relative_eq!(b[i], -gu[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_gaussian_ou_case() {
        // A1 = 0, A2 = -I, R = I: the Ornstein-Uhlenbeck model.
        let d = 2;
        let m = make_linear_gaussian(
            SquareMatrix::zeros(d),
            SquareMatrix::identity(d).scale(-1.0),
            SquareMatrix::identity(d),
        )
        .unwrap();
        let b = m.drift_vec(0.0, &[9.0, 9.0], &[1.0, -2.0]);
        assert_relative_eq!(b[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-14);
        let mut col = vec![0.0; d];
        m.diffusion_col(0.0, &[0.0, 0.0], &[0.0, 0.0], 0, &mut col);
        assert_relative_eq!(col[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_gaussian_rejects_indefinite_noise() {
        let d = 2;
        let r = SquareMatrix::diagonal(&[1.0, -0.2]);
        assert!(make_linear_gaussian(SquareMatrix::zeros(d), SquareMatrix::zeros(d), r).is_err());
    }

    #[test]
    fn linear_gaussian_generic_self_test_passes() {
        let a1 = SquareMatrix::from_rows(&[&[0.1, -0.2], &[0.3, 0.0]]).unwrap();
        let a2 = SquareMatrix::from_rows(&[&[-1.0, 0.4], &[-0.4, -0.8]]).unwrap();
        let r = SquareMatrix::from_rows(&[&[0.5, 0.1], &[0.1, 0.3]]).unwrap();
        assert!(make_linear_gaussian(a1, a2, r).is_ok());
    }

    #[test]
    fn geometric_model_basics() {
        let m = make_geometric(-1.0, 1.0, 0.5).unwrap();
        // At the absorbing boundary y = 0 both drift and diffusion vanish.
        let b = m.drift_vec(0.0, &[0.4], &[0.0]);
        assert_eq!(b[0], 0.0);
        let mut col = vec![0.0];
        m.diffusion_col(0.0, &[0.4], &[0.0], 0, &mut col);
        assert_eq!(col[0], 0.0);
        assert_eq!(m.state_floor(), Some(0.0));
        assert!(make_geometric(-1.0, 0.0, 0.5).is_err());
        assert!(make_geometric(-1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn parity_validation_rejects_mislabeled_potentials() {
        // quadratic declared odd is a contradiction
        let mut v = Potential::quadratic(1, 1.0);
        v.parity = Parity::Odd;
        assert!(PotentialPair::new(Potential::quadratic(1, 1.0), v, 1.0).is_err());
    }
}
