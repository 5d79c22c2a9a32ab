//! Assembly of the four contraction condition matrices and sampled
//! estimation of the implied rates.
//!
//! Each condition asserts uniform negative definiteness of a symmetrized
//! drift/diffusion-gradient matrix; the eigenvalue bound translates into an
//! exponential contraction rate for the matching flow:
//!
//! * `H_A`     — single-flow matrix `J_y b + J_y b' + sum_k G_k' G_k <= -2 l I`
//!   (with `G_k` the state Jacobian of the k-th diffusion column); governs the
//!   Jacobian flow of one diffusion.
//! * `H_C`     — paired `2d x 2d` matrix governing the interpolation
//!   derivative flow and the Wasserstein contraction of the nonlinear
//!   semigroup; `<= -l I`.
//! * `H_cal_A` — the `Nd x Nd` analogue for the interacting particle system;
//!   `<= -2 l I`.
//! * `H_cal_C` — the `2d x 2d` chaos matrix built from interval-averaged
//!   gradients; governs the mean-square gap between one particle and its
//!   independent nonlinear copy; `<= -l I`.
//!
//! Rate estimates returned by [`estimate_lambda`] are sampled infima over a
//! box, not certified global bounds; reports carry the sampling domain so
//! that verification suites can pick boxes with analytically known
//! minimizers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::models::McKeanVlasovModel;
use crate::parallel;
use crate::rng::{self, NoiseStream};
use crate::tolerances;

/// Which condition matrix to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    FlowA,
    PairC,
    ParticleA { n_particles: usize },
    ChaosC { n_particles: usize },
}

impl ConditionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConditionKind::FlowA => "H_A",
            ConditionKind::PairC => "H_C",
            ConditionKind::ParticleA { .. } => "H_cal_A",
            ConditionKind::ChaosC { .. } => "H_cal_C",
        }
    }

    /// The definition of `H_A`/`H_cal_A` normalizes by `-2 lambda`, the two
    /// `C`-type conditions by `-lambda`.
    fn eig_to_lambda(&self, max_eig: f64) -> f64 {
        match self {
            ConditionKind::FlowA | ConditionKind::ParticleA { .. } => -max_eig / 2.0,
            ConditionKind::PairC | ConditionKind::ChaosC { .. } => -max_eig,
        }
    }
}

/// Single-flow condition matrix
/// `A_t(x, y) = J_y b + (J_y b)' + sum_k (J_y s_k)' (J_y s_k)`.
pub fn assemble_a(model: &McKeanVlasovModel, t: f64, x: &[f64], y: &[f64]) -> SquareMatrix {
    let d = model.dim();
    let mut jac = SquareMatrix::zeros(d);
    model.jac_drift_y(t, x, y, &mut jac);
    let mut out = jac.add(&jac.transpose());
    if !model.zero_diffusion_jacobian() {
        let mut g = SquareMatrix::zeros(d);
        for k in 0..model.noise_dim() {
            model.jac_diffusion_y(t, x, y, k, &mut g);
            out = out.add(&g.gram());
        }
    }
    out
}

/// Paired condition matrix `C_t(z1, z2)`: symmetrized drift block matrix plus
/// the diffusion-gradient Gram term, all evaluated with standard Jacobians.
pub fn assemble_c(model: &McKeanVlasovModel, t: f64, z1: &[f64], z2: &[f64]) -> SquareMatrix {
    let d = model.dim();
    let mut b = SquareMatrix::zeros(2 * d);
    let mut jac = SquareMatrix::zeros(d);

    // Block layout: [ J_y b(z2, z1)  J_x b(z1, z2) ]
    //               [ J_x b(z2, z1)  J_y b(z1, z2) ]
    model.jac_drift_y(t, z2, z1, &mut jac);
    copy_block(&mut b, &jac, 0, 0);
    model.jac_drift_x(t, z1, z2, &mut jac);
    copy_block(&mut b, &jac, 0, d);
    model.jac_drift_x(t, z2, z1, &mut jac);
    copy_block(&mut b, &jac, d, 0);
    model.jac_drift_y(t, z1, z2, &mut jac);
    copy_block(&mut b, &jac, d, d);

    let mut out = b.symmetric_part(); // (B + B') / 2
    if !model.zero_diffusion_jacobian() {
        // D = sum_k H_k' H_k with H_k = [J_x s_k | J_y s_k] at (z1, z2).
        let mut h = SquareMatrix::zeros(2 * d);
        let mut g = SquareMatrix::zeros(d);
        for k in 0..model.noise_dim() {
            zero_matrix(&mut h);
            model.jac_diffusion_x(t, z1, z2, k, &mut g);
            copy_rect(&mut h, &g, 0, 0, d);
            model.jac_diffusion_y(t, z1, z2, k, &mut g);
            copy_rect(&mut h, &g, 0, d, d);
            out = out.add(&h.gram());
        }
    }
    out
}

/// Interacting-system condition matrix on `(R^d)^N`:
/// `cal_A_t(z) = J_F + J_F' + sum_a K_a' K_a` where `J_F` is the full
/// standard Jacobian of the mean-field drift and `K_a` of the a-th diffusion
/// channel.
pub fn assemble_particle_a(
    model: &McKeanVlasovModel,
    t: f64,
    z: &[Vec<f64>],
) -> Result<SquareMatrix> {
    let d = model.dim();
    let n = z.len();
    if n == 0 {
        return Err(Error::invalid("empty particle configuration"));
    }
    let rows = n * d;
    if rows > tolerances::DENSE_BLOCK_CAP {
        return Err(Error::ResourceLimit(format!(
            "dense particle condition matrix needs {rows} rows (cap {})",
            tolerances::DENSE_BLOCK_CAP
        )));
    }
    let jac_f = particle_drift_jacobian(model, t, z);
    let mut out = jac_f.add(&jac_f.transpose());
    if !model.zero_diffusion_jacobian() {
        for alpha in 0..model.noise_dim() {
            let k = particle_diffusion_jacobian(model, t, z, alpha);
            out = out.add(&k.gram());
        }
    }
    Ok(out)
}

/// Full standard Jacobian of the mean-field drift
/// `F^j(z) = (1/N) sum_n b(z_n, z_j)`: block `(j, i)` is
/// `(1/N) J_x b(z_i, z_j)` plus, on the diagonal, the measure-averaged
/// `(1/N) sum_n J_y b(z_n, z_j)`.
pub fn particle_drift_jacobian(model: &McKeanVlasovModel, t: f64, z: &[Vec<f64>]) -> SquareMatrix {
    let d = model.dim();
    let n = z.len();
    let scale = 1.0 / n as f64;
    let mut out = SquareMatrix::zeros(n * d);
    let mut jac = SquareMatrix::zeros(d);
    for j in 0..n {
        for i in 0..n {
            model.jac_drift_x(t, &z[i], &z[j], &mut jac);
            for a in 0..d {
                for bb in 0..d {
                    out.add_to(j * d + a, i * d + bb, scale * jac.get(a, bb));
                }
            }
        }
        // Diagonal block: derivative through the particle's own state slot.
        for nn in 0..n {
            model.jac_drift_y(t, &z[nn], &z[j], &mut jac);
            for a in 0..d {
                for bb in 0..d {
                    out.add_to(j * d + a, j * d + bb, scale * jac.get(a, bb));
                }
            }
        }
    }
    out
}

/// Standard Jacobian of the a-th mean-field diffusion channel
/// `G_a^j(z) = (1/N) sum_n s_a(z_n, z_j)`.
pub fn particle_diffusion_jacobian(
    model: &McKeanVlasovModel,
    t: f64,
    z: &[Vec<f64>],
    alpha: usize,
) -> SquareMatrix {
    let d = model.dim();
    let n = z.len();
    let scale = 1.0 / n as f64;
    let mut out = SquareMatrix::zeros(n * d);
    let mut jac = SquareMatrix::zeros(d);
    for j in 0..n {
        for i in 0..n {
            model.jac_diffusion_x(t, &z[i], &z[j], alpha, &mut jac);
            for a in 0..d {
                for bb in 0..d {
                    out.add_to(j * d + a, i * d + bb, scale * jac.get(a, bb));
                }
            }
        }
        for nn in 0..n {
            model.jac_diffusion_y(t, &z[nn], &z[j], alpha, &mut jac);
            for a in 0..d {
                for bb in 0..d {
                    out.add_to(j * d + a, j * d + bb, scale * jac.get(a, bb));
                }
            }
        }
    }
    out
}

/// Chaos condition matrix `cal_C_t(z, zbar)` for an `N`-particle system;
/// `z` and `zbar` are points of `R^(2d)`.
pub fn assemble_chaos_c(
    model: &McKeanVlasovModel,
    t: f64,
    z: &[f64],
    zbar: &[f64],
    n_particles: usize,
) -> Result<SquareMatrix> {
    if n_particles == 0 {
        return Err(Error::invalid("chaos matrix needs at least one particle"));
    }
    assemble_chaos_c_weighted(model, t, z, zbar, 1.0 / n_particles as f64)
}

/// Chaos matrix with an explicit diagonal weight `w = 1/N`; `w = 0` is the
/// many-particle limit, `w = 1` the single-particle reduction.
pub fn assemble_chaos_c_weighted(
    model: &McKeanVlasovModel,
    t: f64,
    z: &[f64],
    zbar: &[f64],
    w: f64,
) -> Result<SquareMatrix> {
    let d = model.dim();
    if z.len() != 2 * d || zbar.len() != 2 * d {
        return Err(Error::invalid("chaos matrix arguments must lie in R^(2d)"));
    }
    let (x, y) = z.split_at(d);
    let (xb, yb) = zbar.split_at(d);

    // Off-diagonal family: interval-averaged Jacobians along the segment from
    // zbar to z, in the block layout of the paired condition matrix.
    let mut b0 = SquareMatrix::zeros(2 * d);
    let swapped = [y, x].concat();
    let swapped_b = [yb, xb].concat();
    let jac = avg_jac(model, t, &swapped, &swapped_b, JacSlot::DriftY);
    copy_block(&mut b0, &jac, 0, 0);
    let jac = avg_jac(model, t, &swapped, &swapped_b, JacSlot::DriftX);
    copy_block(&mut b0, &jac, 0, d);
    let jac = avg_jac(model, t, z, zbar, JacSlot::DriftX);
    copy_block(&mut b0, &jac, d, 0);
    let jac = avg_jac(model, t, z, zbar, JacSlot::DriftY);
    copy_block(&mut b0, &jac, d, d);

    // Diagonal family: gradients of the drift composed with x -> (x, x),
    // averaged along each coordinate segment.
    let mut b1 = SquareMatrix::zeros(2 * d);
    let jac = avg_diag_jac(model, t, x, xb, None);
    copy_block(&mut b1, &jac, 0, 0);
    let jac = avg_diag_jac(model, t, y, yb, None);
    copy_block(&mut b1, &jac, d, d);

    let b = b1.scale(w).add(&b0.scale(1.0 - w));
    let mut out = b.symmetric_part();

    if !model.zero_diffusion_jacobian() {
        let mut d0 = SquareMatrix::zeros(2 * d);
        let mut d1 = SquareMatrix::zeros(2 * d);
        for k in 0..model.noise_dim() {
            // D0: 2 H' H with H = [avg J_x s_k | avg J_y s_k] along the
            // 2d-segment.
            let mut h = SquareMatrix::zeros(2 * d);
            let gx = avg_jac(model, t, z, zbar, JacSlot::DiffusionX(k));
            copy_rect(&mut h, &gx, 0, 0, d);
            let gy = avg_jac(model, t, z, zbar, JacSlot::DiffusionY(k));
            copy_rect(&mut h, &gy, 0, d, d);
            d0 = d0.add(&h.gram().scale(2.0));

            // D1: diagonal Gram blocks of the diagonal-composed gradients.
            let sx = avg_diag_jac(model, t, x, xb, Some(k));
            let sy = avg_diag_jac(model, t, y, yb, Some(k));
            let mut blk = SquareMatrix::zeros(2 * d);
            copy_block(&mut blk, &sx.gram(), 0, 0);
            copy_block(&mut blk, &sy.gram(), d, d);
            d1 = d1.add(&blk);
        }
        out = out.add(&d1.scale(w)).add(&d0.scale(1.0 - w));
    }
    Ok(out)
}

enum JacSlot {
    DriftX,
    DriftY,
    DiffusionX(usize),
    DiffusionY(usize),
}

/// `int_0^1 J(zbar + e (z - zbar)) de` by 16-point Gauss-Legendre; the two
/// argument slots move along the segment together.
fn avg_jac(
    model: &McKeanVlasovModel,
    t: f64,
    z: &[f64],
    zbar: &[f64],
    slot: JacSlot,
) -> SquareMatrix {
    let d = model.dim();
    let mut acc = SquareMatrix::zeros(d);
    let mut jac = SquareMatrix::zeros(d);
    let mut xe = vec![0.0; d];
    let mut ye = vec![0.0; d];
    for &(node, weight) in linalg::gauss_legendre_unit() {
        for i in 0..d {
            xe[i] = zbar[i] + node * (z[i] - zbar[i]);
            ye[i] = zbar[d + i] + node * (z[d + i] - zbar[d + i]);
        }
        match slot {
            JacSlot::DriftX => model.jac_drift_x(t, &xe, &ye, &mut jac),
            JacSlot::DriftY => model.jac_drift_y(t, &xe, &ye, &mut jac),
            JacSlot::DiffusionX(k) => model.jac_diffusion_x(t, &xe, &ye, k, &mut jac),
            JacSlot::DiffusionY(k) => model.jac_diffusion_y(t, &xe, &ye, k, &mut jac),
        }
        for i in 0..d {
            for j in 0..d {
                acc.add_to(i, j, weight * jac.get(i, j));
            }
        }
    }
    acc
}

/// Interval average of `(J_x + J_y)` of the drift (or diffusion column `k`)
/// composed with the diagonal embedding `x -> (x, x)`.
fn avg_diag_jac(
    model: &McKeanVlasovModel,
    t: f64,
    x: &[f64],
    xbar: &[f64],
    col: Option<usize>,
) -> SquareMatrix {
    let d = model.dim();
    let mut acc = SquareMatrix::zeros(d);
    let mut jx = SquareMatrix::zeros(d);
    let mut jy = SquareMatrix::zeros(d);
    let mut w = vec![0.0; d];
    for &(node, weight) in linalg::gauss_legendre_unit() {
        for i in 0..d {
            w[i] = xbar[i] + node * (x[i] - xbar[i]);
        }
        match col {
            None => {
                model.jac_drift_x(t, &w, &w, &mut jx);
                model.jac_drift_y(t, &w, &w, &mut jy);
            }
            Some(k) => {
                model.jac_diffusion_x(t, &w, &w, k, &mut jx);
                model.jac_diffusion_y(t, &w, &w, k, &mut jy);
            }
        }
        for i in 0..d {
            for j in 0..d {
                acc.add_to(i, j, weight * (jx.get(i, j) + jy.get(i, j)));
            }
        }
    }
    acc
}

/// Uniform sampling box, one interval per state coordinate.
#[derive(Debug, Clone, Serialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        SampleBox { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn sample(&self, stream: &mut NoiseStream) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| stream.uniform(lo, hi))
            .collect()
    }

    fn describe(&self) -> String {
        format!("box lo={:?} hi={:?}", self.lo, self.hi)
    }
}

/// Sampled spectral statistics of a condition matrix.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition_name: String,
    pub n_samples: usize,
    pub max_eig_samples: Vec<f64>,
    /// Implied contraction rate under the condition's own normalization
    /// (factor 2 for the `A`-type conditions).
    pub lambda_estimate: f64,
    pub sample_domain: String,
}

impl ConditionReport {
    /// One CSV row per sample plus the implied rate column.
    pub fn csv_rows(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let header = vec!["sample".to_string(), "max_eig".to_string()];
        let rows = self
            .max_eig_samples
            .iter()
            .enumerate()
            .map(|(i, &e)| vec![i as f64, e])
            .collect();
        (header, rows)
    }

    pub fn json_summary(&self) -> String {
        serde_json::json!({
            "condition_name": self.condition_name,
            "n_samples": self.n_samples,
            "lambda_estimate": self.lambda_estimate,
            "max_eig_sup": self.max_eig_samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            "sample_domain": self.sample_domain,
        })
        .to_string()
    }
}

/// Samples the chosen condition matrix `n` times over `domain` and reports
/// the implied rate, `lambda = -(sup of max eigenvalues) / normalization`.
///
/// Sampling is parallelized by splitting the seed into one substream per
/// sample, so the estimate does not depend on the worker schedule, and the
/// sample prefix (hence the monotone estimate) is stable as `n` grows.
pub fn estimate_lambda(
    model: &McKeanVlasovModel,
    kind: ConditionKind,
    domain: &SampleBox,
    n: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let d = model.dim();
    if domain.dim() != d {
        return Err(Error::invalid("sampling box dimension does not match the model"));
    }
    if let ConditionKind::ParticleA { n_particles } | ConditionKind::ChaosC { n_particles } = kind {
        if n_particles == 0 {
            return Err(Error::invalid("particle conditions need n_particles >= 1"));
        }
        if n_particles * d > tolerances::DENSE_BLOCK_CAP {
            return Err(Error::ResourceLimit(format!(
                "N * d = {} exceeds the dense cap {}",
                n_particles * d,
                tolerances::DENSE_BLOCK_CAP
            )));
        }
    }

    let samples: Vec<Result<f64>> = parallel::map_indexed(n, |i| {
        let mut stream = NoiseStream::new(seed, rng::substream_id(rng::role::SAMPLER, 0, i as u64));
        let t = 0.0;
        let m = match kind {
            ConditionKind::FlowA => {
                let x = domain.sample(&mut stream);
                let y = domain.sample(&mut stream);
                assemble_a(model, t, &x, &y)
            }
            ConditionKind::PairC => {
                let z1 = domain.sample(&mut stream);
                let z2 = domain.sample(&mut stream);
                assemble_c(model, t, &z1, &z2)
            }
            ConditionKind::ParticleA { n_particles } => {
                let z: Vec<Vec<f64>> =
                    (0..n_particles).map(|_| domain.sample(&mut stream)).collect();
                assemble_particle_a(model, t, &z)?
            }
            ConditionKind::ChaosC { n_particles } => {
                let mut z = domain.sample(&mut stream);
                z.extend(domain.sample(&mut stream));
                let mut zbar = domain.sample(&mut stream);
                zbar.extend(domain.sample(&mut stream));
                assemble_chaos_c(model, t, &z, &zbar, n_particles)?
            }
        };
        linalg::sym_eig_max(&m)
    });

    let mut max_eig_samples = Vec::with_capacity(n);
    for s in samples {
        max_eig_samples.push(s?);
    }
    let sup = max_eig_samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConditionReport {
        condition_name: kind.name().to_string(),
        n_samples: n,
        lambda_estimate: kind.eig_to_lambda(sup),
        max_eig_samples,
        sample_domain: domain.describe(),
    })
}

fn copy_block(out: &mut SquareMatrix, block: &SquareMatrix, row0: usize, col0: usize) {
    let d = block.dim();
    for i in 0..d {
        for j in 0..d {
            out.set(row0 + i, col0 + j, block.get(i, j));
        }
    }
}

/// Copies a `d x d` block into a wider matrix without assuming it is square
/// in the destination indexing.
fn copy_rect(out: &mut SquareMatrix, block: &SquareMatrix, row0: usize, col0: usize, d: usize) {
    for i in 0..d {
        for j in 0..d {
            out.set(row0 + i, col0 + j, block.get(i, j));
        }
    }
}

fn zero_matrix(m: &mut SquareMatrix) {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        make_geometric, make_langevin, McKeanVlasovModel, Potential, PotentialPair,
    };
    use approx::assert_relative_eq;

    fn quadratic_langevin(d: usize, l: f64, k: f64) -> McKeanVlasovModel {
        let pair = PotentialPair::new(
            Potential::quadratic(d, l),
            Potential::quadratic_interaction(d, k),
            1.0,
        )
        .unwrap();
        make_langevin(pair).unwrap()
    }

    #[test]
    fn flow_matrix_quadratic_confinement() {
        // U = (l/2)|y|^2, V = 0: A = -2 l I.
        let m = quadratic_langevin(3, 1.25, 0.0);
        let a = assemble_a(&m, 0.0, &[0.1, 0.2, 0.3], &[0.4, -0.5, 0.6]);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { -2.5 } else { 0.0 };
                assert_relative_eq!(a.get(i, j), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flow_matrix_equals_hessian_eigenvalues() {
        // For Langevin models the eigenvalues of A are -2 times those of
        // the combined Hessian of U and V.
        let pair = PotentialPair::new(
            Potential::quartic_plus_quadratic(2, 0.3, 0.8),
            Potential::cosine_well(2, 0.4),
            1.0,
        )
        .unwrap();
        let u = pair.confinement.clone();
        let v = pair.interaction.clone();
        let m = make_langevin(pair).unwrap();
        let x = [0.2, -0.7];
        let y = [0.9, 0.4];
        let diff = [y[0] - x[0], y[1] - x[1]];
        let hess = u.hessian_mat(&y).add(&v.hessian_mat(&diff));
        let a = assemble_a(&m, 0.0, &x, &y);
        let (mut ae, _) = linalg::sym_eig(&a).unwrap();
        let (mut he, _) = linalg::sym_eig(&hess).unwrap();
        ae.sort_by(|p, q| p.partial_cmp(q).unwrap());
        he.sort_by(|p, q| p.partial_cmp(q).unwrap());
        he.reverse();
        for (av, hv) in ae.iter().zip(he.iter()) {
            assert_relative_eq!(*av, -2.0 * hv, epsilon = 1e-10);
        }
    }

    #[test]
    fn flow_matrix_geometric_closed_form() {
        // A(x, y) = 2 (a1 - a2 x) + sigma0^2, independent of y.
        let m = make_geometric(-1.0, 1.0, 0.5).unwrap();
        let a = assemble_a(&m, 0.0, &[0.3], &[1.7]);
        assert_relative_eq!(a.get(0, 0), 2.0 * (-1.0 - 0.3) + 0.25, epsilon = 1e-12);
    }

    #[test]
    fn pair_matrix_quadratic_langevin() {
        // Even convex V: the slow mode of C sits at -l regardless of k.
        let m = quadratic_langevin(2, 1.0, 0.5);
        let c = assemble_c(&m, 0.0, &[0.3, -0.2], &[1.0, 0.7]);
        assert!(c.max_abs_asymmetry() < 1e-12);
        let top = linalg::sym_eig_max(&c).unwrap();
        assert_relative_eq!(top, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn pair_matrix_no_interaction_is_block_diagonal() {
        let m = quadratic_langevin(2, 0.8, 0.0);
        let z1 = [0.4, 0.1];
        let z2 = [-0.3, 0.9];
        let c = assemble_c(&m, 0.0, &z1, &z2);
        // Off-diagonal blocks vanish; diagonal blocks are A/2 at swapped
        // argument order.
        for i in 0..2 {
            for j in 2..4 {
                assert_relative_eq!(c.get(i, j), 0.0, epsilon = 1e-12);
            }
        }
        let a_upper = assemble_a(&m, 0.0, &z2, &z1).scale(0.5);
        let a_lower = assemble_a(&m, 0.0, &z1, &z2).scale(0.5);
        let top = linalg::sym_eig_max(&c).unwrap();
        let expect = linalg::sym_eig_max(&a_upper)
            .unwrap()
            .max(linalg::sym_eig_max(&a_lower).unwrap());
        assert_relative_eq!(top, expect, epsilon = 1e-10);
    }

    #[test]
    fn particle_matrix_single_particle_reduces_to_flow_matrix() {
        // With N = 1 and an interaction whose Hessian vanishes at 0 the
        // ensemble matrix equals the single-flow matrix at (z, z).
        let m = quadratic_langevin(2, 1.0, 0.0);
        let z = vec![vec![0.5, -0.5]];
        let a = assemble_particle_a(&m, 0.0, &z).unwrap();
        let single = assemble_a(&m, 0.0, &z[0], &z[0]);
        assert!(a.sub(&single).max_abs() < 1e-12);
    }

    #[test]
    fn particle_matrix_even_interaction_dominated_by_confinement() {
        // Even convex V contributes a positive-semidefinite correction, so
        // the ensemble rate is at least the confinement curvature.
        let m = quadratic_langevin(1, 1.0, 0.7);
        let mut stream = NoiseStream::new(5, 0);
        for _ in 0..10 {
            let z: Vec<Vec<f64>> = (0..6).map(|_| vec![stream.uniform(-2.0, 2.0)]).collect();
            let a = assemble_particle_a(&m, 0.0, &z).unwrap();
            let top = linalg::sym_eig_max(&a).unwrap();
            assert!(top <= -2.0 + 1e-10, "max eig {top}");
            // The center-of-mass mode pins the bound: equality holds.
            assert_relative_eq!(top, -2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn particle_matrix_resource_cap() {
        let m = quadratic_langevin(3, 1.0, 0.0);
        let z: Vec<Vec<f64>> = (0..200).map(|_| vec![0.0; 3]).collect();
        assert!(matches!(
            assemble_particle_a(&m, 0.0, &z),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn chaos_matrix_on_diagonal_matches_decomposition() {
        // cal_C(z, z) = (1 - 1/N) C(z) + (1/N) C1(z) where C1 contains the
        // diagonal-composed gradients; for quadratic potentials everything is
        // constant and the identity is exact.
        let m = quadratic_langevin(1, 1.0, 0.5);
        let z = [0.4, -0.8];
        let n = 4;
        let chaos = assemble_chaos_c(&m, 0.0, &z, &z, n).unwrap();
        let c = assemble_c(&m, 0.0, &z[..1], &z[1..]);
        // C1 for the Langevin family: diag of -(Hess U) at each slot.
        let c1 = SquareMatrix::diagonal(&[-1.0, -1.0]);
        let w = 1.0 / n as f64;
        let expect = c.scale(1.0 - w).add(&c1.scale(w));
        assert!(chaos.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn chaos_matrix_weight_limits() {
        let m = quadratic_langevin(1, 1.0, 0.5);
        let z = [0.2, 0.9];
        let zbar = [-0.5, 0.3];
        let w0 = assemble_chaos_c_weighted(&m, 0.0, &z, &zbar, 0.0).unwrap();
        let w1 = assemble_chaos_c_weighted(&m, 0.0, &z, &zbar, 1.0).unwrap();
        // w = 0 keeps only the pair family, w = 1 only the diagonal family.
        let top0 = linalg::sym_eig_max(&w0).unwrap();
        let top1 = linalg::sym_eig_max(&w1).unwrap();
        assert_relative_eq!(top1, -1.0, epsilon = 1e-10); // diag(-Hess U) exactly
        assert!(top0 <= -1.0 + 1e-10);
    }

    #[test]
    fn chaos_quadrature_matches_riemann_sum() {
        // Quartic confinement makes the segment average nontrivial; compare
        // the Gauss-Legendre average against a brute-force Riemann sum.
        let pair = PotentialPair::new(
            Potential::quartic_plus_quadratic(1, 1.0, 0.0),
            Potential::quadratic_interaction(1, 0.3),
            1.0,
        )
        .unwrap();
        let m = make_langevin(pair).unwrap();
        let z = [0.7, -0.2];
        let zbar = [-0.4, 0.5];
        let fine = {
            // Riemann sum of J_y b along the segment, 10^5 panels.
            let steps = 100_000;
            let mut acc = 0.0;
            let mut jac = SquareMatrix::zeros(1);
            for s in 0..steps {
                let e = (s as f64 + 0.5) / steps as f64;
                let xe = [zbar[0] + e * (z[0] - zbar[0])];
                let ye = [zbar[1] + e * (z[1] - zbar[1])];
                m.jac_drift_y(0.0, &xe, &ye, &mut jac);
                acc += jac.get(0, 0);
            }
            acc / steps as f64
        };
        let gl = avg_jac(&m, 0.0, &z, &zbar, JacSlot::DriftY);
        assert_relative_eq!(gl.get(0, 0), fine, epsilon = 1e-8);
    }

    #[test]
    fn estimate_lambda_quadratic_is_exact_on_every_sample() {
        let m = quadratic_langevin(1, 1.0, 0.0);
        let report = estimate_lambda(&m, ConditionKind::FlowA, &SampleBox::cube(1, -3.0, 3.0), 50, 9)
            .unwrap();
        assert_eq!(report.condition_name, "H_A");
        for e in &report.max_eig_samples {
            assert_relative_eq!(*e, -2.0, epsilon = 1e-12);
        }
        assert_relative_eq!(report.lambda_estimate, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn estimate_lambda_double_well_box_minimum() {
        // Hessian 3z^2 - 1 on [-2, 2] has infimum -1 at z = 0, so the rate
        // estimate converges to -1 from above.
        let pair =
            PotentialPair::new(Potential::double_well(1.0), Potential::zero(1), 1.0).unwrap();
        let m = make_langevin(pair).unwrap();
        let report =
            estimate_lambda(&m, ConditionKind::FlowA, &SampleBox::cube(1, -2.0, 2.0), 4000, 3)
                .unwrap();
        assert!((report.lambda_estimate - (-1.0)).abs() < 0.02, "{}", report.lambda_estimate);
        assert!(report.lambda_estimate <= -0.9);
    }

    #[test]
    fn estimate_lambda_geometric_boundary() {
        // A(x) = 2(a1 - a2 x) + sigma0^2 is maximized as x -> 0, giving
        // lambda = |a1| - sigma0^2/2 for negative a1.
        let m = make_geometric(-1.0, 1.0, 0.5).unwrap();
        let report =
            estimate_lambda(&m, ConditionKind::FlowA, &SampleBox::cube(1, 0.0, 10.0), 4000, 21)
                .unwrap();
        let expect = 1.0 - 0.125;
        assert!((report.lambda_estimate - expect).abs() < 0.02, "{}", report.lambda_estimate);
        assert!(report.lambda_estimate >= expect - 1e-9);
    }

    #[test]
    fn estimate_lambda_is_monotone_in_sample_count() {
        let pair =
            PotentialPair::new(Potential::double_well(1.0), Potential::zero(1), 1.0).unwrap();
        let m = make_langevin(pair).unwrap();
        let domain = SampleBox::cube(1, -2.0, 2.0);
        let mut last = f64::INFINITY;
        for n in [10, 50, 200, 800] {
            let report = estimate_lambda(&m, ConditionKind::FlowA, &domain, n, 77).unwrap();
            assert!(report.lambda_estimate <= last + 1e-15);
            last = report.lambda_estimate;
        }
    }

    #[test]
    fn assembled_matrices_are_symmetric() {
        let m = quadratic_langevin(2, 1.0, 0.4);
        let geo = make_geometric(-1.0, 0.5, 0.3).unwrap();
        let a = assemble_a(&geo, 0.0, &[0.5], &[1.0]);
        assert_eq!(a.max_abs_asymmetry(), 0.0);
        let c = assemble_c(&geo, 0.0, &[0.5], &[1.0]);
        assert!(c.max_abs_asymmetry() < 1e-14);
        let z: Vec<Vec<f64>> = vec![vec![0.1, 0.2], vec![-0.4, 0.6], vec![0.8, -0.9]];
        let pa = assemble_particle_a(&m, 0.0, &z).unwrap();
        assert!(pa.max_abs_asymmetry() < 1e-14);
        let cc = assemble_chaos_c(&m, 0.0, &[0.1, 0.2, 0.3, 0.4], &[0.0, 0.1, -0.2, 0.6], 8).unwrap();
        assert!(cc.max_abs_asymmetry() < 1e-14);
    }

    #[test]
    fn single_particle_reduction_vs_pair_estimate_ordering() {
        // With the diagonal matrix family nonpositive on the sampled set, the
        // pair rate cannot exceed (1 - 1/N)^{-1} times the diagonal chaos
        // rate; quadratic potentials attain equality of the two raw rates.
        let m = quadratic_langevin(1, 1.0, 0.5);
        let domain = SampleBox::cube(1, -2.0, 2.0);
        let n = 8;
        let pair = estimate_lambda(&m, ConditionKind::PairC, &domain, 200, 5).unwrap();
        let chaos = estimate_lambda(&m, ConditionKind::ChaosC { n_particles: n }, &domain, 200, 5)
            .unwrap();
        let w = 1.0 / n as f64;
        assert!(pair.lambda_estimate <= chaos.lambda_estimate / (1.0 - w) + 1e-10);
        assert_relative_eq!(pair.lambda_estimate, chaos.lambda_estimate, epsilon = 1e-10);
    }
}
