//! Parallel-transport couplings on the sphere and their rate estimates.
//!
//! Noise is realized in the tangent frame of one process and carried to the
//! other along the minimal connecting geodesic. On the distance process the
//! martingale parts then cancel, leaving a finite-variation drift made of
//! the potential's geodesic convexity and the curvature's index term, so
//! the coupled gap contracts pathwise rather than merely in law.
//!
//! Near the cut locus the transport degrades; within a distance
//! `pi - CUT_LOCUS_EPS` of the antipode the noise is injected independently
//! for that step (the decoupling construction) and the event is counted.

use crate::error::Result;
use crate::rng::{self, NoiseStream};
use crate::tolerances;

use super::geometry::{add, axpy, distance, exp_map, scale, transport, SpherePoint, TangentVector, Vec3};
use super::langevin::{
    draw_tangent_increment, step_sphere_langevin, SphereInteraction, SpherePotential,
    SphereStepMode,
};

/// Uniform sample on the sphere via normalized Gaussians.
pub fn uniform_point(stream: &mut NoiseStream) -> SpherePoint {
    loop {
        let v = [stream.normal(), stream.normal(), stream.normal()];
        if let Ok((p, _)) = SpherePoint::project(v) {
            return p;
        }
    }
}

/// Uniform sample in the polar cap `theta <= cap` around the north pole.
pub fn cap_point(stream: &mut NoiseStream, cap: f64) -> SpherePoint {
    // Height is uniform on [cos(cap), 1] for the uniform measure on the cap.
    let zmin = cap.cos();
    let z = stream.uniform(zmin, 1.0);
    let phi = stream.uniform(0.0, 2.0 * std::f64::consts::PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    SpherePoint::new([r * phi.cos(), r * phi.sin(), z]).expect("unit by construction")
}

/// Trajectory statistics of a Brownian cloud on the sphere.
#[derive(Debug, Clone)]
pub struct SphereCloudRun {
    pub mean: [f64; 3],
    pub second_moment: [[f64; 3]; 3],
    pub max_renormalization: f64,
}

/// Advances `n_paths` independent sphere diffusions to `t_end` and returns
/// the ensemble first and second moments at the endpoint.
pub fn run_sphere_ensemble(
    potential: &SpherePotential,
    n_paths: usize,
    t_end: f64,
    h: f64,
    seed: u64,
    mode: SphereStepMode,
) -> Result<SphereCloudRun> {
    let steps = crate::engine::step_count(0.0, t_end, h)?;
    let interaction = SphereInteraction::zero();
    let results: Vec<Result<([f64; 3], f64)>> = crate::parallel::map_indexed(n_paths, |i| {
        let mut stream =
            NoiseStream::new(seed, rng::substream_id(rng::role::FLOW, 0, i as u64));
        let mut p = uniform_point(&mut stream);
        let mut worst = 0.0_f64;
        for _ in 0..steps {
            let dw = draw_tangent_increment(&mut stream, h);
            let (next, renorm) = step_sphere_langevin(potential, &interaction, &[], &p, h, &dw, mode)?;
            p = next;
            worst = worst.max(renorm);
        }
        Ok((*p.coords(), worst))
    });

    let mut mean = [0.0; 3];
    let mut second = [[0.0; 3]; 3];
    let mut worst = 0.0_f64;
    let n = results.len() as f64;
    for r in results {
        let (p, renorm) = r?;
        worst = worst.max(renorm);
        for i in 0..3 {
            mean[i] += p[i] / n;
            for j in 0..3 {
                second[i][j] += p[i] * p[j] / n;
            }
        }
    }
    Ok(SphereCloudRun { mean, second_moment: second, max_renormalization: worst })
}

/// Distance trajectory of two coupled single diffusions.
#[derive(Debug, Clone)]
pub struct SphereCoupledRun {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub cut_locus_events: u64,
}

/// Parallel-transport coupling of two diffusions under the same potential:
/// the increment is drawn in the first process's frame and transported to
/// the second.
pub fn run_sphere_coupled_pair(
    potential: &SpherePotential,
    x0: SpherePoint,
    y0: SpherePoint,
    t_end: f64,
    h: f64,
    seed: u64,
    replica: u64,
    record_every: usize,
) -> Result<SphereCoupledRun> {
    let steps = crate::engine::step_count(0.0, t_end, h)?;
    let mut stream = NoiseStream::new(seed, rng::substream_id(rng::role::FLOW, replica, 0));
    let mut decoupled =
        NoiseStream::new(seed, rng::substream_id(rng::role::DECOUPLED, replica, 0));
    let mut x = x0;
    let mut y = y0;
    let mut out = SphereCoupledRun {
        times: vec![0.0],
        distances: vec![distance(&x0, &y0)],
        cut_locus_events: 0,
    };
    for step in 0..steps {
        let dw = draw_tangent_increment(&mut stream, h);
        let (e1, e2) = x.tangent_basis();
        let mut kick = scale(&e1, dw[0]);
        axpy(&mut kick, dw[1], &e2);

        let drift_x = scale(&potential.gradient(&x), -1.0);
        let vx = TangentVector { base: x, vec: add(&scale(&drift_x, h), &kick) };

        let transported = if distance(&x, &y) > std::f64::consts::PI - tolerances::CUT_LOCUS_EPS {
            out.cut_locus_events += 1;
            let dw_ind = draw_tangent_increment(&mut decoupled, h);
            let (f1, f2) = y.tangent_basis();
            let mut k = scale(&f1, dw_ind[0]);
            axpy(&mut k, dw_ind[1], &f2);
            k
        } else {
            transport(&x, &y, &kick)?
        };
        let drift_y = scale(&potential.gradient(&y), -1.0);
        let vy = TangentVector { base: y, vec: add(&scale(&drift_y, h), &transported) };

        x = exp_map(&vx);
        y = exp_map(&vy);
        if (step + 1) % record_every.max(1) == 0 || step + 1 == steps {
            out.times.push((step + 1) as f64 * h);
            out.distances.push(distance(&x, &y));
        }
    }
    Ok(out)
}

/// Mean-square geodesic gap of the particle-vs-nonlinear coupling, one
/// trajectory per system size.
#[derive(Debug, Clone)]
pub struct SphereChaosSweep {
    pub times: Vec<f64>,
    pub n_list: Vec<usize>,
    /// Per system size: `(1/N) sum_i rho^2(zeta_i, xi_i)` at each recorded
    /// time.
    pub mean_sq_rho: Vec<Vec<f64>>,
    /// Interaction-fluctuation parts `(own, cross)` estimated from the
    /// reference cloud at each recorded time; the `N`-particle parameter is
    /// `own / N + (1 - 1/N) cross`.
    pub beta_parts: Vec<(f64, f64)>,
    pub cut_locus_events: u64,
}

/// Runs interacting systems of every requested size against independent
/// nonlinear copies, all driven by one shared reference cloud.
///
/// The reference cloud (`m_ref` particles, its own streams) stands in for
/// the true law; copy `zeta_i` is driven by it, and the interacting particle
/// `xi_i` of each system receives the same increment transported from
/// `zeta_i`. Initial states and streams are shared across system sizes
/// (system `N` uses the first `N`), which couples the curves within a
/// replica without biasing any of their means.
#[allow(clippy::too_many_arguments)]
pub fn run_sphere_chaos_sweep(
    potential: &SpherePotential,
    interaction: &SphereInteraction,
    n_list: &[usize],
    m_ref: usize,
    cap: f64,
    t_end: f64,
    h: f64,
    seed: u64,
    replica: u64,
    record_every: usize,
) -> Result<SphereChaosSweep> {
    let steps = crate::engine::step_count(0.0, t_end, h)?;
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    if n_max == 0 {
        return Err(crate::error::Error::invalid("empty system-size list"));
    }
    let mut init_stream = NoiseStream::new(seed, rng::substream_id(rng::role::INIT, replica, 0));
    let reference_init: Vec<SpherePoint> =
        (0..m_ref).map(|_| cap_point(&mut init_stream, cap)).collect();
    let copies_init: Vec<SpherePoint> =
        (0..n_max).map(|_| cap_point(&mut init_stream, cap)).collect();

    let mut reference = reference_init;
    let mut ref_streams: Vec<NoiseStream> = (0..m_ref)
        .map(|j| NoiseStream::new(seed, rng::substream_id(rng::role::REFERENCE, replica, j as u64)))
        .collect();
    let mut zeta = copies_init.clone();
    let mut streams: Vec<NoiseStream> = (0..n_max)
        .map(|i| NoiseStream::new(seed, rng::substream_id(rng::role::PARTICLE, replica, i as u64)))
        .collect();
    let mut decoupled: Vec<NoiseStream> = (0..n_max)
        .map(|i| NoiseStream::new(seed, rng::substream_id(rng::role::DECOUPLED, replica, i as u64)))
        .collect();
    // One interacting system per requested size.
    let mut systems: Vec<Vec<SpherePoint>> =
        n_list.iter().map(|&n| copies_init[..n].to_vec()).collect();

    let mut out = SphereChaosSweep {
        times: vec![0.0],
        n_list: n_list.to_vec(),
        mean_sq_rho: vec![vec![0.0]; n_list.len()],
        beta_parts: vec![estimate_beta_parts(interaction, &reference)],
        cut_locus_events: 0,
    };

    let mut ref_scratch = reference.clone();
    let mut kicks: Vec<Vec3> = vec![[0.0; 3]; n_max];
    for step in 0..steps {
        // Reference cloud: plain mean-field system.
        for (j, slot) in ref_scratch.iter_mut().enumerate() {
            let dw = draw_tangent_increment(&mut ref_streams[j], h);
            let (next, _) = step_sphere_langevin(
                potential,
                interaction,
                &reference,
                &reference[j],
                h,
                &dw,
                SphereStepMode::Geodesic,
            )?;
            *slot = next;
        }

        // Nonlinear copies driven by the reference cloud; remember each
        // copy's raw tangent increment for the transported injections.
        let mut new_zeta = zeta.clone();
        for i in 0..n_max {
            let dw = draw_tangent_increment(&mut streams[i], h);
            let (e1, e2) = zeta[i].tangent_basis();
            let mut kick = scale(&e1, dw[0]);
            axpy(&mut kick, dw[1], &e2);
            kicks[i] = kick;
            let (next, _) = step_sphere_langevin(
                potential,
                interaction,
                &reference,
                &zeta[i],
                h,
                &dw,
                SphereStepMode::Geodesic,
            )?;
            new_zeta[i] = next;
        }

        // Interacting systems: drift against their own empirical measure,
        // noise transported from the matching copy.
        for xi in systems.iter_mut() {
            let n = xi.len();
            let mut new_xi = xi.clone();
            for i in 0..n {
                let transported = if distance(&zeta[i], &xi[i])
                    > std::f64::consts::PI - tolerances::CUT_LOCUS_EPS
                {
                    out.cut_locus_events += 1;
                    let dw_ind = draw_tangent_increment(&mut decoupled[i], h);
                    let (f1, f2) = xi[i].tangent_basis();
                    let mut k = scale(&f1, dw_ind[0]);
                    axpy(&mut k, dw_ind[1], &f2);
                    k
                } else {
                    transport(&zeta[i], &xi[i], &kicks[i])?
                };
                let mut drift = scale(&potential.gradient(&xi[i]), -1.0);
                if interaction.beta != 0.0 {
                    let w = 1.0 / n as f64;
                    for x in xi.iter() {
                        let pull = interaction.drift(x, &xi[i]);
                        axpy(&mut drift, w, &pull);
                    }
                }
                let v = TangentVector { base: xi[i], vec: add(&scale(&drift, h), &transported) };
                new_xi[i] = exp_map(&v);
            }
            *xi = new_xi;
        }
        std::mem::swap(&mut reference, &mut ref_scratch);
        zeta = new_zeta;

        if (step + 1) % record_every.max(1) == 0 || step + 1 == steps {
            out.times.push((step + 1) as f64 * h);
            for (slot, xi) in systems.iter().enumerate() {
                let msr = xi
                    .iter()
                    .enumerate()
                    .map(|(i, p)| distance(&zeta[i], p).powi(2))
                    .sum::<f64>()
                    / xi.len() as f64;
                out.mean_sq_rho[slot].push(msr);
            }
            out.beta_parts.push(estimate_beta_parts(interaction, &reference));
        }
    }
    Ok(out)
}

/// Size-independent pieces of the drift-fluctuation parameter, estimated on
/// a cloud standing in for the law. With `g(x, y)` the interaction part of
/// the drift (the potential part cancels in every difference):
///
/// * `own`   — `E_x |g(x,x) - gbar(x)|^2`, which reduces to the mean squared
///   norm of the averaged drift since `g(x, x) = 0`;
/// * `cross` — `E_{x,y} |g(x,y) - gbar(y)|^2` over independent pairs.
///
/// The envelope parameter for an `N`-particle system is
/// `beta = own / N + (1 - 1/N) cross`.
pub fn estimate_beta_parts(interaction: &SphereInteraction, cloud: &[SpherePoint]) -> (f64, f64) {
    let m = cloud.len();
    if m == 0 || interaction.beta == 0.0 {
        return (0.0, 0.0);
    }
    // gbar(y) = (1/M) sum_x g(x, y)
    let mut avg: Vec<[f64; 3]> = Vec::with_capacity(m);
    for y in cloud {
        let mut acc = [0.0; 3];
        for x in cloud {
            let g = interaction.drift(x, y);
            axpy(&mut acc, 1.0 / m as f64, &g);
        }
        avg.push(acc);
    }
    let own: f64 = avg
        .iter()
        .map(|a| a.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / m as f64;
    let mut cross = 0.0;
    for (yi, y) in cloud.iter().enumerate() {
        for x in cloud.iter() {
            let g = interaction.drift(x, y);
            let diff = [g[0] - avg[yi][0], g[1] - avg[yi][1], g[2] - avg[yi][2]];
            cross += diff.iter().map(|v| v * v).sum::<f64>();
        }
    }
    cross /= (m * m) as f64;
    (own, cross)
}

/// Weighted drift-fluctuation parameter for an `N`-particle system.
pub fn estimate_beta(interaction: &SphereInteraction, cloud: &[SpherePoint], n: usize) -> f64 {
    let (own, cross) = estimate_beta_parts(interaction, cloud);
    let w = 1.0 / n as f64;
    w * own + (1.0 - w) * cross
}

/// Sampled contraction rate for the single-flow condition on the sphere:
/// `min over the cap of [min-eig Hess U + Ric/2]` with `Ric = g` on the unit
/// sphere.
pub fn estimate_sphere_rate_a(
    potential: &SpherePotential,
    cap: f64,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let mut stream = NoiseStream::new(seed, rng::substream_id(rng::role::SAMPLER, 0, 0));
    let mut lambda = f64::INFINITY;
    for _ in 0..n_samples.max(1) {
        let theta = stream.uniform(0.0, cap);
        lambda = lambda.min(potential.hessian_min_eigenvalue(theta) + 0.5);
    }
    lambda
}

/// Sampled chaos-condition rate on the sphere: the minimal eigenvalue over
/// cap point pairs of the quadratic form
/// `Hess U(x)(u) + Hess U(y)(v) + (1 - 1/N) Hess (F o rho)(x, y)((u, v))`
/// on the product tangent space, assembled in orthonormal bases from second
/// geodesic differences of the interaction profile.
pub fn estimate_sphere_chaos_rate(
    potential: &SpherePotential,
    interaction: &SphereInteraction,
    n_particles: usize,
    cap: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    use crate::linalg::SquareMatrix;
    let mut stream = NoiseStream::new(seed, rng::substream_id(rng::role::SAMPLER, 1, 0));
    let weight = 1.0 - 1.0 / n_particles.max(1) as f64;
    let mut lambda = f64::INFINITY;
    for _ in 0..n_samples.max(1) {
        let x = cap_point(&mut stream, cap);
        let y = cap_point(&mut stream, cap);
        let (ex1, ex2) = x.tangent_basis();
        let (ey1, ey2) = y.tangent_basis();
        let basis: [(usize, [f64; 3]); 4] =
            [(0, ex1), (0, ex2), (1, ey1), (1, ey2)];

        // Quadratic form along a product geodesic with directions (u, v).
        let form = |u: &[f64; 3], v: &[f64; 3]| -> f64 {
            let qx = sphere_hessian_form(potential, &x, u);
            let qy = sphere_hessian_form(potential, &y, v);
            let qf = if interaction.beta == 0.0 {
                0.0
            } else {
                let delta = 1e-4;
                let at = |s: f64| -> f64 {
                    let px = exp_map(&TangentVector { base: x, vec: scale(u, s) });
                    let py = exp_map(&TangentVector { base: y, vec: scale(v, s) });
                    interaction.f(distance(&px, &py))
                };
                (at(delta) - 2.0 * at(0.0) + at(-delta)) / (delta * delta)
            };
            qx + qy + weight * qf
        };

        let zero = [0.0, 0.0, 0.0];
        let eval = |idx: usize| -> f64 {
            let (slot, dir) = &basis[idx];
            if *slot == 0 {
                form(dir, &zero)
            } else {
                form(&zero, dir)
            }
        };
        let mut q = SquareMatrix::zeros(4);
        let diag: Vec<f64> = (0..4).map(eval).collect();
        for (i, d) in diag.iter().enumerate() {
            q.set(i, i, *d);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (si, di) = &basis[i];
                let (sj, dj) = &basis[j];
                let combined = if si == sj {
                    let dir = add(di, dj);
                    if *si == 0 {
                        form(&dir, &zero)
                    } else {
                        form(&zero, &dir)
                    }
                } else {
                    form(di, dj)
                };
                let off = 0.5 * (combined - diag[i] - diag[j]);
                q.set(i, j, off);
                q.set(j, i, off);
            }
        }
        let top = crate::linalg::sym_eig_max(&q.scale(-1.0))?;
        lambda = lambda.min(-top);
    }
    Ok(lambda)
}

/// Geodesic Hessian quadratic form of a height potential at `p` applied to a
/// tangent direction `u` (not necessarily unit).
fn sphere_hessian_form(potential: &SpherePotential, p: &SpherePoint, u: &[f64; 3]) -> f64 {
    use super::geometry::{dot, norm};
    let nn = norm(u);
    if nn == 0.0 {
        return 0.0;
    }
    let axis = SpherePotential::axis();
    let theta = dot(p.coords(), &axis).clamp(-1.0, 1.0).acos();
    let (radial_eig, tangential_eig) = potential.hessian_eigenvalues(theta);
    if theta < 1e-8 {
        // Isotropic limit at the pole.
        return radial_eig * nn * nn;
    }
    let toward_pole = p.project_tangent(&axis);
    let tp_norm = norm(&toward_pole);
    let radial_dir = scale(&toward_pole, -1.0 / tp_norm); // increasing theta
    let radial_component = dot(u, &radial_dir);
    let tangential_sq = (nn * nn - radial_component * radial_component).max(0.0);
    radial_eig * radial_component * radial_component + tangential_eig * tangential_sq
}
