//! The N-particle mean-field system and its joint Jacobian flow.
//!
//! Drift averages accumulate in a value-sorted order, so permuting the
//! initial configuration together with the noise streams permutes the output
//! path bit for bit — the exchangeability of the system holds exactly, not
//! just up to rounding.

use crate::conditions::{particle_diffusion_jacobian, particle_drift_jacobian};
use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::models::McKeanVlasovModel;
use crate::rng::{self, NoiseStream};
use crate::tolerances;

use super::flows::{apply_floor, check_divergence, step_count};

/// Lexicographic argsort of the particle states; ties are broken by original
/// index, but tied states contribute identical summands so the drift sums do
/// not depend on the tiebreak.
pub fn sorted_order(states: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|&a, &b| {
        for (x, y) in states[a].iter().zip(&states[b]) {
            match x.partial_cmp(y) {
                Some(std::cmp::Ordering::Equal) | None => continue,
                Some(ord) => return ord,
            }
        }
        a.cmp(&b)
    });
    order
}

/// Mean-field drifts `F^i = (1/N) sum_j b(z_j, z_i)` for all particles,
/// accumulated in sorted order.
pub fn mean_field_drifts(
    model: &McKeanVlasovModel,
    t: f64,
    states: &[Vec<f64>],
    order: &[usize],
    out: &mut [Vec<f64>],
) {
    let d = model.dim();
    let n = states.len();
    let mut tmp = vec![0.0; d];
    for i in 0..n {
        let target = &states[i];
        let acc = &mut out[i];
        acc.fill(0.0);
        for &j in order {
            model.drift(t, &states[j], target, &mut tmp);
            for a in 0..d {
                acc[a] += tmp[a];
            }
        }
        let scale = 1.0 / n as f64;
        for a in 0..d {
            acc[a] *= scale;
        }
    }
}

/// Mean-field diffusion column `(1/N) sum_j s_k(z_j, z_i)` in sorted order.
fn mean_field_diffusion_col(
    model: &McKeanVlasovModel,
    t: f64,
    states: &[Vec<f64>],
    order: &[usize],
    target: &[f64],
    k: usize,
    out: &mut [f64],
) {
    if model.constant_diffusion() {
        model.diffusion_col(t, target, target, k, out);
        return;
    }
    let d = out.len();
    let mut tmp = vec![0.0; d];
    out.fill(0.0);
    for &j in order {
        model.diffusion_col(t, &states[j], target, k, &mut tmp);
        for a in 0..d {
            out[a] += tmp[a];
        }
    }
    let scale = 1.0 / states.len() as f64;
    for a in 0..d {
        out[a] *= scale;
    }
}

/// Snapshotted trajectory of the particle system.
#[derive(Debug, Clone)]
pub struct ParticleRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<Vec<f64>>>,
    pub final_states: Vec<Vec<f64>>,
    pub clamp_events: u64,
}

/// Advances the `N`-particle system from `z0`, one independent stream per
/// particle derived from `(seed, replica, particle)`. Snapshots are recorded
/// every `record_every` steps and at both endpoints.
pub fn run_particles(
    model: &McKeanVlasovModel,
    z0: Vec<Vec<f64>>,
    s: f64,
    t_end: f64,
    h: f64,
    seed: u64,
    replica: u64,
    record_every: usize,
) -> Result<ParticleRun> {
    let n = z0.len();
    if n == 0 {
        return Err(Error::invalid("particle system needs at least one particle"));
    }
    let steps = step_count(s, t_end, h)?;
    let d = model.dim();
    let r = model.noise_dim();
    let mut streams: Vec<NoiseStream> = (0..n)
        .map(|i| NoiseStream::new(seed, rng::substream_id(rng::role::PARTICLE, replica, i as u64)))
        .collect();

    let mut states = z0;
    let mut scratch = states.clone();
    let mut drifts = vec![vec![0.0; d]; n];
    let mut col = vec![0.0; d];
    let mut out = ParticleRun {
        times: vec![s],
        snapshots: vec![states.clone()],
        final_states: Vec::new(),
        clamp_events: 0,
    };

    let mut t = s;
    for step in 0..steps {
        let order = sorted_order(&states);
        mean_field_drifts(model, t, &states, &order, &mut drifts);
        for i in 0..n {
            let dw = streams[i].brownian_increments(r, h);
            let dst = &mut scratch[i];
            dst.copy_from_slice(&states[i]);
            for a in 0..d {
                dst[a] += h * drifts[i][a];
            }
            for (k, dwk) in dw.iter().enumerate() {
                mean_field_diffusion_col(model, t, &states, &order, &states[i], k, &mut col);
                for a in 0..d {
                    dst[a] += col[a] * dwk;
                }
            }
            if apply_floor(model, dst) {
                out.clamp_events += 1;
            }
            check_divergence(dst, t + h, &format!("particle {i}"))?;
        }
        std::mem::swap(&mut states, &mut scratch);
        t = s + (step + 1) as f64 * h;
        if (step + 1) % record_every.max(1) == 0 || step + 1 == steps {
            out.times.push(t);
            out.snapshots.push(states.clone());
        }
    }
    out.final_states = states;
    Ok(out)
}

/// Norm trajectory of the joint particle Jacobian flow.
#[derive(Debug, Clone)]
pub struct ParticleJacobianRun {
    pub times: Vec<f64>,
    pub spectral: Vec<f64>,
    pub frobenius_sq: Vec<f64>,
    pub clamp_events: u64,
}

/// Advances particles together with the full `Nd x Nd` Jacobian started at
/// the identity, recording its spectral and squared Frobenius norms.
pub fn run_particle_jacobian(
    model: &McKeanVlasovModel,
    z0: Vec<Vec<f64>>,
    s: f64,
    t_end: f64,
    h: f64,
    seed: u64,
    replica: u64,
    record_every: usize,
) -> Result<ParticleJacobianRun> {
    let n = z0.len();
    let d = model.dim();
    if n * d > tolerances::DENSE_BLOCK_CAP {
        return Err(Error::ResourceLimit(format!(
            "N * d = {} exceeds the dense cap {}",
            n * d,
            tolerances::DENSE_BLOCK_CAP
        )));
    }
    let steps = step_count(s, t_end, h)?;
    let r = model.noise_dim();
    let mut streams: Vec<NoiseStream> = (0..n)
        .map(|i| NoiseStream::new(seed, rng::substream_id(rng::role::PARTICLE, replica, i as u64)))
        .collect();

    let mut states = z0;
    let mut scratch = states.clone();
    let mut drifts = vec![vec![0.0; d]; n];
    let mut col = vec![0.0; d];
    let mut jac = SquareMatrix::identity(n * d);
    let mut out = ParticleJacobianRun {
        times: Vec::new(),
        spectral: Vec::new(),
        frobenius_sq: Vec::new(),
        clamp_events: 0,
    };
    record(&jac, s, &mut out)?;

    let mut t = s;
    for step in 0..steps {
        let order = sorted_order(&states);
        mean_field_drifts(model, t, &states, &order, &mut drifts);

        // Jacobian update: J' = J + h JF(z) J + noise channels.
        let drift_jac = particle_drift_jacobian(model, t, &states);
        let mut next_jac = jac.add(&drift_jac.matmul(&jac).scale(h));
        let mut increments: Vec<Vec<f64>> = Vec::with_capacity(n);
        for stream in streams.iter_mut() {
            increments.push(stream.brownian_increments(r, h));
        }
        if !model.zero_diffusion_jacobian() {
            for alpha in 0..r {
                let k_alpha = particle_diffusion_jacobian(model, t, &states, alpha);
                let product = k_alpha.matmul(&jac);
                // Channel (j, alpha) only perturbs block-row j.
                for j in 0..n {
                    let w = increments[j][alpha];
                    if w == 0.0 {
                        continue;
                    }
                    for a in 0..d {
                        let row = j * d + a;
                        for cidx in 0..n * d {
                            next_jac.add_to(row, cidx, w * product.get(row, cidx));
                        }
                    }
                }
            }
        }
        jac = next_jac;

        for i in 0..n {
            let dst = &mut scratch[i];
            dst.copy_from_slice(&states[i]);
            for a in 0..d {
                dst[a] += h * drifts[i][a];
            }
            for (k, dwk) in increments[i].iter().enumerate() {
                mean_field_diffusion_col(model, t, &states, &order, &states[i], k, &mut col);
                for a in 0..d {
                    dst[a] += col[a] * dwk;
                }
            }
            if apply_floor(model, dst) {
                out.clamp_events += 1;
            }
            check_divergence(dst, t + h, &format!("particle {i}"))?;
        }
        std::mem::swap(&mut states, &mut scratch);
        t = s + (step + 1) as f64 * h;
        if (step + 1) % record_every.max(1) == 0 || step + 1 == steps {
            record(&jac, t, &mut out)?;
        }
    }
    Ok(out)
}

fn record(jac: &SquareMatrix, t: f64, out: &mut ParticleJacobianRun) -> Result<()> {
    out.times.push(t);
    out.spectral.push(linalg::spectral_norm(jac)?);
    out.frobenius_sq.push(linalg::frobenius_norm(jac).powi(2));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_langevin, Potential, PotentialPair};
    use approx::assert_relative_eq;

    fn langevin(d: usize, l: f64, k: f64) -> McKeanVlasovModel {
        let pair = PotentialPair::new(
            Potential::quadratic(d, l),
            Potential::quadratic_interaction(d, k),
            1.0,
        )
        .unwrap();
        make_langevin(pair).unwrap()
    }

    #[test]
    fn permutation_equivariance_is_bitwise() {
        let model = langevin(2, 1.0, 0.5);
        let z0 = vec![
            vec![0.5, -0.3],
            vec![-0.8, 0.2],
            vec![0.1, 0.9],
            vec![1.2, -1.0],
        ];
        let run = run_particles(&model, z0.clone(), 0.0, 0.5, 0.01, 42, 0, 5).unwrap();

        // Permute initial states; streams follow the particle identity, so we
        // swap replica/particle assignment by permuting z0 and comparing the
        // permuted outputs. Identity of particle i in the permuted run is
        // perm[i] in the original.
        let perm = [2usize, 0, 3, 1];
        let z0p: Vec<Vec<f64>> = perm.iter().map(|&i| z0[i].clone()).collect();
        // Build matching streams by hand: run a custom system where particle
        // slot p uses the stream of original particle perm[p]. run_particles
        // keys streams by slot, so instead compare against a run whose slots
        // are permuted back.
        let run_p = {
            // re-run with permuted slots and matching stream ids
            let n = z0p.len();
            let d = model.dim();
            let mut streams: Vec<NoiseStream> = (0..n)
                .map(|i| {
                    NoiseStream::new(
                        42,
                        rng::substream_id(rng::role::PARTICLE, 0, perm[i] as u64),
                    )
                })
                .collect();
            let mut states = z0p;
            let mut scratch = states.clone();
            let mut drifts = vec![vec![0.0; d]; n];
            let mut col = vec![0.0; d];
            let steps = 50;
            let mut t = 0.0;
            for _ in 0..steps {
                let order = sorted_order(&states);
                mean_field_drifts(&model, t, &states, &order, &mut drifts);
                for i in 0..n {
                    let dw = streams[i].brownian_increments(2, 0.01);
                    let dst = &mut scratch[i];
                    dst.copy_from_slice(&states[i]);
                    for a in 0..d {
                        dst[a] += 0.01 * drifts[i][a];
                    }
                    for (k, dwk) in dw.iter().enumerate() {
                        mean_field_diffusion_col(&model, t, &states, &order, &states[i], k, &mut col);
                        for a in 0..d {
                            dst[a] += col[a] * dwk;
                        }
                    }
                }
                std::mem::swap(&mut states, &mut scratch);
                t += 0.01;
            }
            states
        };
        for (slot, &orig) in perm.iter().enumerate() {
            assert_eq!(run_p[slot], run.final_states[orig], "slot {slot}");
        }
    }

    #[test]
    fn single_particle_reduces_to_self_interacting_diffusion() {
        // N = 1 quadratic Langevin with V(0) gradient zero: the particle
        // obeys dX = -grad U(X) dt + sigma0 dW with its own stream.
        let model = langevin(1, 1.3, 0.8);
        let run = run_particles(&model, vec![vec![2.0]], 0.0, 1.0, 0.001, 7, 0, 1000).unwrap();
        // Reference: explicit scalar Euler with the identical stream.
        let mut stream = NoiseStream::new(7, rng::substream_id(rng::role::PARTICLE, 0, 0));
        let mut x = 2.0_f64;
        for _ in 0..1000 {
            let dw = stream.brownian_increments(1, 0.001);
            x += -1.3 * x * 0.001 + dw[0];
        }
        assert_relative_eq!(run.final_states[0][0], x, epsilon = 1e-12);
    }

    #[test]
    fn particle_jacobian_single_particle_matches_flow_jacobian() {
        let model = langevin(1, 1.0, 0.0);
        let run = run_particle_jacobian(&model, vec![vec![0.5]], 0.0, 1.0, 0.001, 3, 0, 250)
            .unwrap();
        for (t, s) in run.times.iter().zip(&run.spectral) {
            // Constant curvature 1: J decays like (1 - h)^k ~ e^{-t}.
            assert_relative_eq!(*s, (-t).exp(), max_relative = 2e-3);
        }
    }

    #[test]
    fn particle_jacobian_cap() {
        let model = langevin(3, 1.0, 0.0);
        let z0: Vec<Vec<f64>> = (0..200).map(|_| vec![0.0; 3]).collect();
        assert!(matches!(
            run_particle_jacobian(&model, z0, 0.0, 0.1, 0.01, 1, 0, 1),
            Err(Error::ResourceLimit(_))
        ));
    }
}
