//! Closed-form bound on the index (second-variation) term in the distance
//! evolution of coupled manifold diffusions, under a Ricci lower bound
//! `kappa`.

use crate::error::{Error, Result};

/// Constant-curvature comparison value of the index term for two points at
/// distance `rho` on a `d`-dimensional manifold with `Ric >= kappa`:
///
/// ```text
///   kappa > 0:  -2 sqrt((d-1) kappa) tan( (rho/2) sqrt(kappa/(d-1)) )
///   kappa = 0:   0
///   kappa < 0:   2 sqrt((d-1)(-kappa)) tanh( (rho/2) sqrt(-kappa/(d-1)) )
/// ```
///
/// In every case the bound is dominated by `-kappa rho`.
pub fn index_bound(rho: f64, kappa: f64, dim: usize) -> Result<f64> {
    if rho < 0.0 {
        return Err(Error::invalid("distance must be nonnegative"));
    }
    if dim < 2 {
        return Err(Error::invalid("index bound needs dimension >= 2"));
    }
    let dm1 = (dim - 1) as f64;
    if kappa > 0.0 {
        let arg = 0.5 * rho * (kappa / dm1).sqrt();
        if arg >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Range(format!(
                "tan argument {arg:.6} reaches the pole at pi/2"
            )));
        }
        Ok(-2.0 * (dm1 * kappa).sqrt() * arg.tan())
    } else if kappa == 0.0 {
        Ok(0.0)
    } else {
        let arg = 0.5 * rho * (-kappa / dm1).sqrt();
        Ok(2.0 * (dm1 * -kappa).sqrt() * arg.tanh())
    }
}
