//! Shared builders turning configs into models and initial data.

use crate::error::Result;
use crate::linalg::SquareMatrix;
use crate::models::{make_langevin, McKeanVlasovModel, Potential, PotentialPair};
use crate::oracles::GaussianMeasure;
use crate::rng::NoiseStream;

use super::config::ExperimentConfig;

/// Langevin model from the `potential_u` / `potential_v` / `sigma0` / `dim`
/// knobs.
pub fn langevin_from_config(
    cfg: &ExperimentConfig,
    default_u: &str,
    default_v: &str,
) -> Result<(McKeanVlasovModel, PotentialPair)> {
    langevin_from_config_dim(cfg, default_u, default_v, 1)
}

/// Same, with an experiment-specific default dimension.
pub fn langevin_from_config_dim(
    cfg: &ExperimentConfig,
    default_u: &str,
    default_v: &str,
    default_dim: usize,
) -> Result<(McKeanVlasovModel, PotentialPair)> {
    let dim = cfg.get_usize("dim", default_dim)?.max(1);
    let u = Potential::from_spec(&cfg.get_str("potential_u", default_u), dim)?;
    let v = Potential::from_spec(&cfg.get_str("potential_v", default_v), dim)?;
    let sigma0 = cfg.require_positive("sigma0", cfg.get_f64("sigma0", 1.0)?)?;
    let pair = PotentialPair::new(u, v, sigma0)?;
    let model = make_langevin(pair.clone())?;
    Ok((model, pair))
}

/// Default two-dimensional linear-Gaussian test system: a mild interaction
/// rotation, a damped/rotating state matrix, and a correlated noise
/// covariance.
pub fn default_linear_gaussian_matrices() -> (SquareMatrix, SquareMatrix, SquareMatrix) {
    let a1 = SquareMatrix::from_rows(&[&[0.0, 0.1], &[-0.1, 0.0]]).unwrap();
    let a2 = SquareMatrix::from_rows(&[&[-1.0, 0.3], &[-0.3, -1.0]]).unwrap();
    let r = SquareMatrix::from_rows(&[&[0.5, 0.1], &[0.1, 0.4]]).unwrap();
    (a1, a2, r)
}

pub fn default_linear_gaussian_mu0() -> GaussianMeasure {
    GaussianMeasure::new(vec![0.5, -0.2], SquareMatrix::identity(2).scale(0.3)).unwrap()
}

/// I.i.d. standard normal cloud in `d` dimensions.
pub fn gaussian_cloud(d: usize, m: usize, stream: &mut NoiseStream) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            let mut x = vec![0.0; d];
            stream.fill_normal(&mut x);
            x
        })
        .collect()
}
