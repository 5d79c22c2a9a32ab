//! Built-in potential functions with analytic gradients and Hessians.
//!
//! The condition checkers need Hessians pointwise and exactly, so potentials
//! are supplied as closures rather than derived by automatic differentiation.
//! Selectable by name in experiment configs:
//!
//! * `quadratic(l)`                 —  U(z) = l/2 |z|^2
//! * `quartic_plus_quadratic(a,b)`  —  U(z) = a/4 |z|^4 + b/2 |z|^2
//! * `quadratic_interaction(k)`     —  V(z) = k/2 |z|^2
//! * `cosine_well(a)`               —  V(z) = a (1 - cos |z|), bounded Hessian
//! * `double_well(a)`               —  U(z) = a (|z|^4/4 - |z|^2/2), scalar only
//! * `zero`                         —  identically 0

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// Parity of a potential, used to select the matching contraction condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64], &mut SquareMatrix) + Send + Sync>;

/// A scalar potential on R^d with analytic gradient and Hessian.
#[derive(Clone)]
pub struct Potential {
    pub dim: usize,
    pub parity: Parity,
    /// Uniform bound on the spectral norm of the Hessian, when one exists.
    pub hessian_sup: Option<f64>,
    name: String,
    value: ValueFn,
    gradient: GradFn,
    hessian: HessFn,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential({}, dim={})", self.name, self.dim)
    }
}

impl Potential {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        (self.value)(z)
    }

    pub fn gradient(&self, z: &[f64], out: &mut [f64]) {
        (self.gradient)(z, out)
    }

    pub fn gradient_vec(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.gradient(z, &mut out);
        out
    }

    pub fn hessian(&self, z: &[f64], out: &mut SquareMatrix) {
        (self.hessian)(z, out)
    }

    pub fn hessian_mat(&self, z: &[f64]) -> SquareMatrix {
        let mut out = SquareMatrix::zeros(self.dim);
        self.hessian(z, &mut out);
        out
    }

    /// Wraps user-supplied callables as a potential. The condition checkers
    /// rely on the Hessian being exact, not a finite-difference stand-in.
    pub fn custom(
        dim: usize,
        parity: Parity,
        name: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hessian: impl Fn(&[f64], &mut SquareMatrix) + Send + Sync + 'static,
    ) -> Self {
        Potential {
            dim,
            parity,
            hessian_sup: None,
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Potential {
            dim,
            parity: Parity::Even,
            hessian_sup: Some(0.0),
            name: "zero".into(),
            value: Arc::new(|_| 0.0),
            gradient: Arc::new(|_, out| out.fill(0.0)),
            hessian: Arc::new(|_, out| {
                for i in 0..out.dim() {
                    for j in 0..out.dim() {
                        out.set(i, j, 0.0);
                    }
                }
            }),
        }
    }

    /// `U(z) = l/2 |z|^2`; Hessian `l I`.
    pub fn quadratic(dim: usize, l: f64) -> Self {
        Potential {
            dim,
            parity: Parity::Even,
            hessian_sup: Some(l.abs()),
            name: format!("quadratic({l})"),
            value: Arc::new(move |z| 0.5 * l * sq_norm(z)),
            gradient: Arc::new(move |z, out| {
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = l * zi;
                }
            }),
            hessian: Arc::new(move |_, out| set_scaled_identity(out, l)),
        }
    }

    /// Alias used for interaction slots in configs; same functional form as
    /// [`Potential::quadratic`].
    pub fn quadratic_interaction(dim: usize, k: f64) -> Self {
        let mut p = Potential::quadratic(dim, k);
        p.name = format!("quadratic_interaction({k})");
        p
    }

    /// `U(z) = a/4 |z|^4 + b/2 |z|^2`.
    ///
    /// Gradient `(a |z|^2 + b) z`, Hessian `(a |z|^2 + b) I + 2 a z z'`;
    /// for `a, b >= 0` this dominates `b I` everywhere.
    pub fn quartic_plus_quadratic(dim: usize, a: f64, b: f64) -> Self {
        Potential {
            dim,
            parity: Parity::Even,
            hessian_sup: None,
            name: format!("quartic_plus_quadratic({a},{b})"),
            value: Arc::new(move |z| {
                let s = sq_norm(z);
                0.25 * a * s * s + 0.5 * b * s
            }),
            gradient: Arc::new(move |z, out| {
                let c = a * sq_norm(z) + b;
                for (o, zi) in out.iter_mut().zip(z) {
                    *o = c * zi;
                }
            }),
            hessian: Arc::new(move |z, out| {
                let c = a * sq_norm(z) + b;
                set_scaled_identity(out, c);
                for i in 0..z.len() {
                    for j in 0..z.len() {
                        out.add_to(i, j, 2.0 * a * z[i] * z[j]);
                    }
                }
            }),
        }
    }

    /// `U(z) = a (|z|^4/4 - |z|^2/2)`, the scalar double well. Restricted to
    /// `dim = 1` where its Hessian `a (3 z^2 - 1)` has the analytic minimum
    /// `-a` at the origin.
    pub fn double_well(a: f64) -> Self {
        Potential {
            dim: 1,
            parity: Parity::Even,
            hessian_sup: None,
            name: format!("double_well({a})"),
            value: Arc::new(move |z| a * (0.25 * z[0].powi(4) - 0.5 * z[0] * z[0])),
            gradient: Arc::new(move |z, out| out[0] = a * (z[0].powi(3) - z[0])),
            hessian: Arc::new(move |z, out| out.set(0, 0, a * (3.0 * z[0] * z[0] - 1.0))),
        }
    }

    /// `V(z) = a (1 - cos |z|)`: even, vanishing gradient at the origin and
    /// uniformly bounded Hessian — the smooth stand-in for a quadratic
    /// interaction wherever a uniform `|∇_x b|` bound is required.
    ///
    /// Gradient `a sin(r) z/r`; Hessian
    /// `a [ cos(r) P + (sin(r)/r) (I - P) ]` with `P = z z' / r^2`, extended
    /// by `a I` at `z = 0`.
    pub fn cosine_well(dim: usize, a: f64) -> Self {
        Potential {
            dim,
            parity: Parity::Even,
            hessian_sup: Some(a.abs()),
            name: format!("cosine_well({a})"),
            value: Arc::new(move |z| a * (1.0 - sq_norm(z).sqrt().cos())),
            gradient: Arc::new(move |z, out| {
                let r = sq_norm(z).sqrt();
                if r < 1e-12 {
                    // sin(r)/r -> 1
                    for (o, zi) in out.iter_mut().zip(z) {
                        *o = a * zi;
                    }
                } else {
                    let c = a * r.sin() / r;
                    for (o, zi) in out.iter_mut().zip(z) {
                        *o = c * zi;
                    }
                }
            }),
            hessian: Arc::new(move |z, out| {
                let r = sq_norm(z).sqrt();
                if r < 1e-8 {
                    set_scaled_identity(out, a);
                    return;
                }
                let radial = a * r.cos();
                let tangential = a * r.sin() / r;
                set_scaled_identity(out, tangential);
                let scale = (radial - tangential) / (r * r);
                for i in 0..z.len() {
                    for j in 0..z.len() {
                        out.add_to(i, j, scale * z[i] * z[j]);
                    }
                }
            }),
        }
    }

    /// Parses a potential from its config spelling, e.g. `quadratic(1.5)`.
    pub fn from_spec(spec: &str, dim: usize) -> Result<Potential> {
        let spec = spec.trim();
        if spec == "zero" || spec.is_empty() {
            return Ok(Potential::zero(dim));
        }
        let (name, args) = parse_call(spec)?;
        match (name.as_str(), args.as_slice()) {
            ("quadratic", [l]) => Ok(Potential::quadratic(dim, *l)),
            ("quadratic_interaction", [k]) => Ok(Potential::quadratic_interaction(dim, *k)),
            ("quartic_plus_quadratic", [a, b]) => Ok(Potential::quartic_plus_quadratic(dim, *a, *b)),
            ("cosine_well", [a]) => Ok(Potential::cosine_well(dim, *a)),
            ("double_well", [a]) => {
                if dim != 1 {
                    return Err(Error::invalid("double_well is one-dimensional"));
                }
                Ok(Potential::double_well(*a))
            }
            _ => Err(Error::invalid(format!("unknown potential '{spec}'"))),
        }
    }
}

fn parse_call(spec: &str) -> Result<(String, Vec<f64>)> {
    let open = spec
        .find('(')
        .ok_or_else(|| Error::invalid(format!("expected 'name(args)' in '{spec}'")))?;
    if !spec.ends_with(')') {
        return Err(Error::invalid(format!("unbalanced parentheses in '{spec}'")));
    }
    let name = spec[..open].trim().to_string();
    let inner = &spec[open + 1..spec.len() - 1];
    let args = inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad numeric argument '{s}' in '{spec}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((name, args))
}

fn sq_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

fn set_scaled_identity(out: &mut SquareMatrix, s: f64) {
    let n = out.dim();
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, if i == j { s } else { 0.0 });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseStream;
    use approx::assert_relative_eq;

    fn check_derivatives(p: &Potential, stream: &mut NoiseStream) {
        let d = p.dim;
        for _ in 0..10 {
            let z: Vec<f64> = (0..d).map(|_| stream.uniform(-1.5, 1.5)).collect();
            let grad = p.gradient_vec(&z);
            let hess = p.hessian_mat(&z);
            let delta = 1e-5;
            for i in 0..d {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += delta;
                zm[i] -= delta;
                let fd = (p.value(&zp) - p.value(&zm)) / (2.0 * delta);
                assert_relative_eq!(fd, grad[i], epsilon = 1e-6, max_relative = 1e-5);
                let gp = p.gradient_vec(&zp);
                let gm = p.gradient_vec(&zm);
                for j in 0..d {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * delta);
                    assert_relative_eq!(fd2, hess.get(j, i), epsilon = 1e-6, max_relative = 1e-4);
                }
            }
        }
    }

    #[test]
    fn builtin_gradients_match_finite_differences() {
        let mut stream = NoiseStream::new(11, 0);
        for p in [
            Potential::quadratic(2, 1.3),
            Potential::quartic_plus_quadratic(2, 0.4, 1.0),
            Potential::cosine_well(2, 0.7),
            Potential::double_well(1.0),
        ] {
            check_derivatives(&p, &mut stream);
        }
    }

    #[test]
    fn parity_of_builtins() {
        let mut stream = NoiseStream::new(12, 0);
        let p = Potential::cosine_well(3, 0.5);
        for _ in 0..5 {
            let z: Vec<f64> = (0..3).map(|_| stream.uniform(-2.0, 2.0)).collect();
            let neg: Vec<f64> = z.iter().map(|v| -v).collect();
            assert_relative_eq!(p.value(&z), p.value(&neg), epsilon = 1e-14);
        }
        let g0 = p.gradient_vec(&[0.0, 0.0, 0.0]);
        assert!(g0.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn spec_parsing() {
        assert!(Potential::from_spec("quadratic(1.0)", 2).is_ok());
        assert!(Potential::from_spec("quartic_plus_quadratic(0.1, 1)", 2).is_ok());
        assert!(Potential::from_spec("zero", 3).is_ok());
        assert!(Potential::from_spec("mystery(1)", 2).is_err());
        assert!(Potential::from_spec("quadratic(abc)", 2).is_err());
    }

    #[test]
    fn double_well_hessian_minimum_is_minus_a() {
        let p = Potential::double_well(1.0);
        // d^2/dz^2 = 3z^2 - 1, minimized at z = 0.
        assert_relative_eq!(p.hessian_mat(&[0.0]).get(0, 0), -1.0, epsilon = 1e-14);
    }
}
