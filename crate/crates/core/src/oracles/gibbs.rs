//! Stationary Gibbs reference for the interacting Langevin system.
//!
//! With unit diffusion the N-particle Langevin system is a plain gradient
//! diffusion for the ensemble potential
//!
//! ```text
//!   V_N(z) = (1/N) sum_{i<j} (V(z_i - z_j) + V(z_j - z_i)) / 2 + sum_i U(z_i)
//! ```
//!
//! and its stationary law is `nu(dz) ~ exp(-2 V_N(z) / sigma0^2) dz`. The
//! construction needs `grad V(0) = 0` (automatic for even interactions).
//! For quadratic `U`, `V` the law is Gaussian with a closed-form covariance.

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::models::PotentialPair;

/// Evaluator for the ensemble potential plus closed-form moments where they
/// exist.
pub struct GibbsReference {
    pair: PotentialPair,
    n: usize,
    /// Spatial covariance across particles (per state coordinate) when both
    /// potentials are quadratic.
    pub gaussian_covariance: Option<SquareMatrix>,
}

/// Builds the Gibbs reference for an `n`-particle system.
///
/// Fails when the interaction gradient does not vanish at the origin, since
/// the ensemble potential is then inconsistent with the particle drift.
pub fn gibbs_reference(pair: &PotentialPair, n: usize) -> Result<GibbsReference> {
    if n == 0 {
        return Err(Error::invalid("gibbs reference needs n >= 1"));
    }
    let d = pair.dim();
    let g0 = pair.interaction.gradient_vec(&vec![0.0; d]);
    if g0.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-12 {
        return Err(Error::invalid(
            "interaction gradient must vanish at the origin (holds for even V)",
        ));
    }
    let gaussian_covariance = quadratic_covariance(pair, n);
    Ok(GibbsReference { pair: pair.clone(), n, gaussian_covariance })
}

impl GibbsReference {
    pub fn n_particles(&self) -> usize {
        self.n
    }

    /// Ensemble potential `V_N(z)`.
    pub fn potential(&self, z: &[Vec<f64>]) -> f64 {
        assert_eq!(z.len(), self.n);
        let d = self.pair.dim();
        let mut total = 0.0;
        let mut diff = vec![0.0; d];
        for i in 0..self.n {
            total += self.pair.confinement.value(&z[i]);
            for j in (i + 1)..self.n {
                for k in 0..d {
                    diff[k] = z[i][k] - z[j][k];
                }
                let forward = self.pair.interaction.value(&diff);
                for k in 0..d {
                    diff[k] = -diff[k];
                }
                let backward = self.pair.interaction.value(&diff);
                total += 0.5 * (forward + backward) / self.n as f64;
            }
        }
        total
    }

    /// Gradient block of `V_N` with respect to particle `i`:
    /// `(1/(2N)) sum_j [grad V(z_i - z_j) - grad V(z_j - z_i)] + grad U(z_i)`,
    /// which collapses to `(1/N) sum_j grad V(z_i - z_j) + grad U(z_i)` for
    /// even interactions.
    pub fn gradient(&self, z: &[Vec<f64>], i: usize) -> Vec<f64> {
        let d = self.pair.dim();
        let mut out = self.pair.confinement.gradient_vec(&z[i]);
        let mut diff = vec![0.0; d];
        let mut g = vec![0.0; d];
        for j in 0..self.n {
            if j == i {
                continue;
            }
            for k in 0..d {
                diff[k] = z[i][k] - z[j][k];
            }
            self.pair.interaction.gradient(&diff, &mut g);
            for k in 0..d {
                out[k] += 0.5 * g[k] / self.n as f64;
            }
            for k in 0..d {
                diff[k] = -diff[k];
            }
            self.pair.interaction.gradient(&diff, &mut g);
            for k in 0..d {
                out[k] -= 0.5 * g[k] / self.n as f64;
            }
        }
        out
    }

    /// Per-coordinate stationary variance in the quadratic case.
    pub fn per_coordinate_variance(&self) -> Option<f64> {
        self.gaussian_covariance.as_ref().map(|c| c.get(0, 0))
    }

    /// Draws one spatial sample per coordinate dimension from the Gaussian
    /// stationary law (quadratic case only).
    pub fn sample(&self, stream: &mut crate::rng::NoiseStream) -> Result<Vec<Vec<f64>>> {
        let cov = self
            .gaussian_covariance
            .as_ref()
            .ok_or_else(|| Error::invalid("closed-form sampling needs quadratic potentials"))?;
        let root = crate::linalg::sym_sqrt(cov)?;
        let d = self.pair.dim();
        let mut out = vec![vec![0.0; d]; self.n];
        let mut z = vec![0.0; self.n];
        for k in 0..d {
            stream.fill_normal(&mut z);
            let kicked = root.matvec(&z);
            for i in 0..self.n {
                out[i][k] = kicked[i];
            }
        }
        Ok(out)
    }
}

/// For `U = (l/2)|z|^2` and `V = (k/2)|z|^2` the exponent is the quadratic
/// form `z' (l I + k (I - J/N)) z` per coordinate (with `J` the all-ones
/// matrix), so the stationary covariance is
/// `sigma0^2 / 2 * (l I + k (I - J/N))^{-1}`: eigenvalue `1/l` on the
/// center-of-mass mode and `1/(l + k)` on the mean-zero modes.
fn quadratic_covariance(pair: &PotentialPair, n: usize) -> Option<SquareMatrix> {
    let l = quadratic_coefficient(pair.confinement.name())?;
    let k = quadratic_coefficient(pair.interaction.name())?;
    if l <= 0.0 || l + k <= 0.0 {
        return None;
    }
    let s = pair.sigma0 * pair.sigma0 / 2.0;
    let mut cov = SquareMatrix::zeros(n);
    let com = s / l; // center-of-mass eigenvalue
    let rel = s / (l + k); // relative modes
    let nf = n as f64;
    for i in 0..n {
        for j in 0..n {
            let projector = 1.0 / nf; // J/N entries
            let v = com * projector + rel * (if i == j { 1.0 } else { 0.0 } - projector);
            cov.set(i, j, v);
        }
    }
    Some(cov)
}

fn quadratic_coefficient(name: &str) -> Option<f64> {
    if name == "zero" {
        return Some(0.0);
    }
    let inner = name
        .strip_prefix("quadratic_interaction(")
        .or_else(|| name.strip_prefix("quadratic("))?
        .strip_suffix(')')?;
    inner.parse::<f64>().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Potential;
    use approx::assert_relative_eq;

    #[test]
    fn single_particle_reduces_to_confinement() {
        let pair = PotentialPair::new(
            Potential::quadratic(1, 1.2),
            Potential::quadratic_interaction(1, 0.5),
            1.0,
        )
        .unwrap();
        let reference = gibbs_reference(&pair, 1).unwrap();
        let z = vec![vec![0.8]];
        assert_relative_eq!(reference.potential(&z), 0.5 * 1.2 * 0.64, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_variance_closed_form() {
        // U = (l/2) z^2, V = 0: product Gaussian with variance 1/(2 l).
        let pair =
            PotentialPair::new(Potential::quadratic(1, 2.0), Potential::zero(1), 1.0).unwrap();
        let reference = gibbs_reference(&pair, 4).unwrap();
        let v = reference.per_coordinate_variance().unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * 2.0), epsilon = 1e-12);
    }

    #[test]
    fn quadratic_interacting_variance() {
        let (l, k, n) = (1.0, 0.5, 16.0);
        let pair = PotentialPair::new(
            Potential::quadratic(1, l),
            Potential::quadratic_interaction(1, k),
            1.0,
        )
        .unwrap();
        let reference = gibbs_reference(&pair, 16).unwrap();
        let v = reference.per_coordinate_variance().unwrap();
        let expect = 0.5 * (1.0 / (n * l) + (1.0 - 1.0 / n) / (l + k));
        assert_relative_eq!(v, expect, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_mean_field_drift_for_even_interaction() {
        let pair = PotentialPair::new(
            Potential::quadratic(2, 0.7),
            Potential::cosine_well(2, 0.4),
            1.0,
        )
        .unwrap();
        let reference = gibbs_reference(&pair, 3).unwrap();
        let z = vec![vec![0.1, -0.2], vec![0.5, 0.9], vec![-0.7, 0.3]];
        for i in 0..3 {
            let grad = reference.gradient(&z, i);
            // (1/N) sum_j grad V(z_i - z_j) + grad U(z_i)
            let mut expect = pair.confinement.gradient_vec(&z[i]);
            for j in 0..3 {
                let diff = [z[i][0] - z[j][0], z[i][1] - z[j][1]];
                let g = pair.interaction.gradient_vec(&diff);
                expect[0] += g[0] / 3.0;
                expect[1] += g[1] / 3.0;
            }
            assert_relative_eq!(grad[0], expect[0], epsilon = 1e-12);
            assert_relative_eq!(grad[1], expect[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_difference_of_potential() {
        let pair = PotentialPair::new(
            Potential::quartic_plus_quadratic(1, 0.2, 1.0),
            Potential::cosine_well(1, 0.3),
            1.0,
        )
        .unwrap();
        let reference = gibbs_reference(&pair, 4).unwrap();
        let z = vec![vec![0.4], vec![-0.8], vec![1.1], vec![0.0]];
        let delta = 1e-6;
        for i in 0..4 {
            let grad = reference.gradient(&z, i);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i][0] += delta;
            zm[i][0] -= delta;
            let fd = (reference.potential(&zp) - reference.potential(&zm)) / (2.0 * delta);
            assert_relative_eq!(grad[0], fd, epsilon = 1e-6, max_relative = 1e-5);
        }
    }

    #[test]
    fn rejects_nonvanishing_interaction_gradient() {
        // V(z) = z is odd with grad V(0) = 1 != 0, which breaks the ensemble
        // potential construction.
        let linear = Potential::custom(
            1,
            crate::models::Parity::Odd,
            "linear",
            |z| z[0],
            |_, out| out[0] = 1.0,
            |_, out| out.set(0, 0, 0.0),
        );
        let pair = PotentialPair::new(Potential::quadratic(1, 1.0), linear, 1.0).unwrap();
        assert!(gibbs_reference(&pair, 2).is_err());
    }
}
