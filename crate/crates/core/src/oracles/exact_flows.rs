//! Closed-form flows for the linear-Gaussian and geometric models.

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::oracles::GaussianMeasure;

/// Pathwise endpoint plus the exact law at the endpoint time.
#[derive(Debug, Clone)]
pub struct LinearGaussianEndpoint {
    pub endpoint: Vec<f64>,
    pub law: GaussianMeasure,
}

/// Exact linear-Gaussian flow
/// `X_t = e^{A2 (t-s)} (x - m0) + e^{(A1+A2)(t-s)} m0 + conv`,
/// where `conv` is the stochastic convolution of the supplied increments,
/// evaluated by left-point quadrature on the same grid that drives the
/// comparison simulation, so residuals isolate scheme error.
///
/// `increments[k]` is the Brownian increment over `[s + k h, s + (k+1) h)`.
/// Also returns the exact Gaussian law of `X_t` when `X_s ~ mu0`.
pub fn linear_gaussian_exact_flow(
    a1: &SquareMatrix,
    a2: &SquareMatrix,
    noise_cov: &SquareMatrix,
    mu0: &GaussianMeasure,
    x0: &[f64],
    s: f64,
    t: f64,
    h: f64,
    increments: &[Vec<f64>],
) -> Result<LinearGaussianEndpoint> {
    let d = a1.dim();
    if x0.len() != d || mu0.dim() != d {
        return Err(Error::invalid("dimension mismatch in linear-Gaussian oracle"));
    }
    let tau = t - s;
    if tau < 0.0 {
        return Err(Error::invalid("t must not precede s"));
    }
    let n_steps = (tau / h).round() as usize;
    if ((n_steps as f64) * h - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "horizon {tau} is not an integer multiple of h = {h}"
        )));
    }
    if increments.len() != n_steps {
        return Err(Error::GridMismatch(format!(
            "expected {n_steps} increments, got {}",
            increments.len()
        )));
    }

    let sqrt_r = linalg::sym_sqrt(noise_cov)?;
    let prop_state = linalg::matrix_exp(a2, h)?;
    let m0 = &mu0.mean;

    // conv = sum_k e^{A2 (t - u_k)} R^(1/2) dW_k with u_k the left endpoint.
    let mut conv = vec![0.0; d];
    for dw in increments {
        if dw.len() != d {
            return Err(Error::GridMismatch("increment dimension mismatch".into()));
        }
        let kicked = sqrt_r.matvec(dw);
        for i in 0..d {
            conv[i] += kicked[i];
        }
        conv = prop_state.matvec(&conv);
    }

    let e2 = linalg::matrix_exp(a2, tau)?;
    let e12 = linalg::matrix_exp(&a1.add(a2), tau)?;
    let centered: Vec<f64> = x0.iter().zip(m0).map(|(x, m)| x - m).collect();
    let mut endpoint = e2.matvec(&centered);
    let drifted = e12.matvec(m0);
    for i in 0..d {
        endpoint[i] += drifted[i] + conv[i];
    }

    let law = linear_gaussian_law(a1, a2, noise_cov, mu0, tau)?;
    Ok(LinearGaussianEndpoint { endpoint, law })
}

/// Exact Gaussian law of the flow at horizon `tau` when started from `mu0`:
/// mean `e^{(A1+A2) tau} m0`, covariance
/// `e^{A2 tau} S0 e^{A2 tau}' + int_0^tau e^{A2 u} R e^{A2 u}' du`,
/// the integral evaluated by composite Gauss-Legendre quadrature.
pub fn linear_gaussian_law(
    a1: &SquareMatrix,
    a2: &SquareMatrix,
    noise_cov: &SquareMatrix,
    mu0: &GaussianMeasure,
    tau: f64,
) -> Result<GaussianMeasure> {
    let d = a1.dim();
    let e2 = linalg::matrix_exp(a2, tau)?;
    let e12 = linalg::matrix_exp(&a1.add(a2), tau)?;
    let mean = e12.matvec(&mu0.mean);

    let mut cov = e2.matmul(&mu0.cov).matmul(&e2.transpose());
    // Composite panels keep each Gauss-Legendre node within the rule's
    // comfort zone regardless of |A2| tau.
    let panels = (tau * (a2.norm_one() + 1.0)).ceil().max(1.0) as usize;
    let width = tau / panels as f64;
    for p in 0..panels {
        let left = p as f64 * width;
        for &(node, weight) in linalg::gauss_legendre_unit() {
            let u = left + node * width;
            let eu = linalg::matrix_exp(a2, u)?;
            let term = eu.matmul(noise_cov).matmul(&eu.transpose());
            cov = cov.add(&term.scale(weight * width));
        }
    }
    let mut sym = cov.symmetric_part();
    if d == 1 && sym.get(0, 0) < 0.0 {
        sym.set(0, 0, 0.0);
    }
    GaussianMeasure::new(mean, sym)
}

/// One step of the geometric mean map: the exact law of the geometric model
/// has mean `m_{s+t} = psi_t(m_s) m_s` with
/// `psi_t(m) = 1 / (e^{-a1 t} + a2 m theta_{a1}(t))` and
/// `theta_{a1}(t) = (1 - e^{-a1 t}) / a1`, `theta_0(t) = t`.
pub fn geometric_mean_map(a1: f64, a2: f64, mean: f64, tau: f64) -> f64 {
    let theta = if a1 == 0.0 { tau } else { (1.0 - (-a1 * tau).exp()) / a1 };
    let psi = 1.0 / ((-a1 * tau).exp() + a2 * mean * theta);
    psi * mean
}

/// Exact geometric flow endpoint
/// `X_t = psi_{t-s}(mu) exp[sigma0 (W_t - W_s) - sigma0^2 (t-s)/2] x0`,
/// driven by the total Brownian increment over `[s, t]`.
pub fn geometric_exact_flow(
    a1: f64,
    a2: f64,
    sigma0: f64,
    mu0_mean: f64,
    x0: f64,
    s: f64,
    t: f64,
    brownian_increment: f64,
) -> Result<f64> {
    if x0 < 0.0 || mu0_mean < 0.0 {
        return Err(Error::invalid("geometric flow requires nonnegative x0 and mean"));
    }
    let tau = t - s;
    if tau < 0.0 {
        return Err(Error::invalid("t must not precede s"));
    }
    let theta = if a1 == 0.0 { tau } else { (1.0 - (-a1 * tau).exp()) / a1 };
    let psi = 1.0 / ((-a1 * tau).exp() + a2 * mu0_mean * theta);
    let exponential = (sigma0 * brownian_increment - 0.5 * sigma0 * sigma0 * tau).exp();
    Ok(psi * exponential * x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn deterministic_linear_flow() {
        // R = 0, A1 = 0: X_t = e^{A2 t} x0 regardless of mu0.
        let d = 2;
        let a1 = SquareMatrix::zeros(d);
        let a2 = SquareMatrix::diagonal(&[-1.0, -2.0]);
        let r = SquareMatrix::zeros(d);
        let mu0 = GaussianMeasure::isotropic(d, 0.7, 0.5).unwrap();
        let h = 0.1;
        let increments: Vec<Vec<f64>> = (0..10).map(|_| vec![0.0, 0.0]).collect();
        let out =
            linear_gaussian_exact_flow(&a1, &a2, &r, &mu0, &[1.0, 1.0], 0.0, 1.0, h, &increments)
                .unwrap();
        assert_relative_eq!(out.endpoint[0], (-1.0f64).exp(), epsilon = 1e-10);
        assert_relative_eq!(out.endpoint[1], (-2.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn scalar_stationary_variance() {
        // d = 1, A2 = -1, R = 1: the Lyapunov fixed point is 1/2.
        let a1 = SquareMatrix::zeros(1);
        let a2 = SquareMatrix::diagonal(&[-1.0]);
        let r = SquareMatrix::identity(1);
        let mu0 = GaussianMeasure::isotropic(1, 0.0, 0.0).unwrap();
        let law = linear_gaussian_law(&a1, &a2, &r, &mu0, 20.0).unwrap();
        assert_relative_eq!(law.cov.get(0, 0), 0.5, epsilon = 1e-8);
    }

    #[test]
    fn law_quadrature_matches_exact_scalar_formula() {
        // Scalar case: variance e^{2 a tau} v0 + (e^{2 a tau} - 1)/(2a) R.
        let a = -0.7;
        let a1 = SquareMatrix::zeros(1);
        let a2 = SquareMatrix::diagonal(&[a]);
        let r = SquareMatrix::diagonal(&[0.9]);
        let mu0 = GaussianMeasure::isotropic(1, 0.3, 0.4).unwrap();
        for &tau in &[0.3, 1.0, 2.5] {
            let law = linear_gaussian_law(&a1, &a2, &r, &mu0, tau).unwrap();
            let exact = (2.0 * a * tau).exp() * 0.4 + 0.9 * ((2.0 * a * tau).exp() - 1.0) / (2.0 * a);
            assert_relative_eq!(law.cov.get(0, 0), exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn geometric_zero_start_stays_zero() {
        let x = geometric_exact_flow(-1.0, 1.0, 0.5, 1.0, 0.0, 0.0, 3.0, 0.4).unwrap();
        assert_eq!(x, 0.0);
    }

    #[test]
    fn geometric_noiseless_small_interaction_limit() {
        // sigma0 -> 0 and a2 -> 0 recovers the exponential x e^{a1 t}.
        let x = geometric_exact_flow(-1.0, 1e-12, 1e-12, 1.0, 2.0, 0.0, 1.5, 0.0).unwrap();
        assert_relative_eq!(x, 2.0 * (-1.5f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn geometric_mean_map_semigroup() {
        // psi composition: advancing by tau twice equals advancing by 2 tau.
        let (a1, a2) = (-0.8, 0.6);
        let m0 = 1.3;
        let two_steps = geometric_mean_map(a1, a2, geometric_mean_map(a1, a2, m0, 0.4), 0.4);
        let one_step = geometric_mean_map(a1, a2, m0, 0.8);
        assert_relative_eq!(two_steps, one_step, epsilon = 1e-12);
    }

    #[test]
    fn geometric_rejects_negative_inputs() {
        assert!(geometric_exact_flow(-1.0, 1.0, 0.5, -0.1, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(geometric_exact_flow(-1.0, 1.0, 0.5, 1.0, -1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a1 = SquareMatrix::zeros(1);
        let a2 = SquareMatrix::diagonal(&[-1.0]);
        let r = SquareMatrix::identity(1);
        let mu0 = GaussianMeasure::isotropic(1, 0.0, 1.0).unwrap();
        let increments = vec![vec![0.0]; 7];
        assert!(matches!(
            linear_gaussian_exact_flow(&a1, &a2, &r, &mu0, &[0.0], 0.0, 1.0, 0.1, &increments),
            Err(Error::GridMismatch(_))
        ));
    }
}
