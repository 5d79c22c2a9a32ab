//! Ground-truth machinery: closed-form flows for the two solvable models,
//! exact and near-exact Wasserstein-2 distances, and Gibbs-measure
//! references.
//!
//! Everything in this module is independent of the time-stepping engine, so
//! oracle-vs-simulation comparisons test the scheme rather than themselves.

mod exact_flows;
mod gibbs;
mod wasserstein;

pub use exact_flows::{
    geometric_exact_flow, geometric_mean_map, linear_gaussian_exact_flow,
    linear_gaussian_law, LinearGaussianEndpoint,
};
pub use gibbs::{gibbs_reference, GibbsReference};
pub use wasserstein::{w2_1d, w2_gaussian, w2_matching, w2_sliced};

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::tolerances;

/// Gaussian law on R^d.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    pub mean: Vec<f64>,
    pub cov: SquareMatrix,
}

impl GaussianMeasure {
    pub fn new(mean: Vec<f64>, cov: SquareMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::invalid("mean and covariance dimensions differ"));
        }
        let (eigs, _) = linalg::sym_eig(&cov)?;
        let floor = tolerances::PSD_FLOOR * cov.max_abs().max(1.0);
        if eigs.iter().any(|&l| l < floor) {
            return Err(Error::invalid(format!(
                "covariance is not positive semidefinite (min eigenvalue {:.3e})",
                eigs.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(GaussianMeasure { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn isotropic(dim: usize, mean: f64, var: f64) -> Result<Self> {
        GaussianMeasure::new(
            vec![mean; dim],
            SquareMatrix::identity(dim).scale(var),
        )
    }

    /// Draws one sample using the symmetric square root of the covariance.
    pub fn sample(&self, stream: &mut crate::rng::NoiseStream) -> Result<Vec<f64>> {
        let root = linalg::sym_sqrt(&self.cov)?;
        let d = self.dim();
        let mut z = vec![0.0; d];
        stream.fill_normal(&mut z);
        let mut out = root.matvec(&z);
        for i in 0..d {
            out[i] += self.mean[i];
        }
        Ok(out)
    }
}

/// Equal-weight empirical measure.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    points: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        let d = points[0].len();
        for p in &points {
            if p.len() != d {
                return Err(Error::invalid("inconsistent point dimensions"));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite point in empirical measure"));
            }
        }
        Ok(EmpiricalMeasure { points })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        EmpiricalMeasure::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for p in &self.points {
            for i in 0..d {
                out[i] += p[i];
            }
        }
        let n = self.len() as f64;
        for v in out.iter_mut() {
            *v /= n;
        }
        out
    }

    pub fn covariance(&self) -> SquareMatrix {
        let d = self.dim();
        let mean = self.mean();
        let mut cov = SquareMatrix::zeros(d);
        for p in &self.points {
            for i in 0..d {
                for j in 0..d {
                    cov.add_to(i, j, (p[i] - mean[i]) * (p[j] - mean[j]));
                }
            }
        }
        cov.scale(1.0 / self.len() as f64)
    }
}
