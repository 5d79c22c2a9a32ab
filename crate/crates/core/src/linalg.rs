//! Dense small-matrix kernels.
//!
//! Three matrix functionals recur throughout the stability analysis:
//!
//! * the spectral norm  `|A|_2 = lambda_max(A A')^(1/2)`,
//! * the Frobenius norm `|A|_F = Tr(A A')^(1/2)`,
//! * the logarithmic norm `rho(A) = lambda_max((A + A') / 2)`,
//!
//! the last one controlling the growth rate of linearized flows. The
//! symmetric eigensolver behind them is a cyclic Jacobi iteration: simple,
//! dependency-free and accurate to near machine precision at the desk scales
//! used here (a few hundred rows at most). The matrix exponential uses
//! scaling-and-squaring with a diagonal Pade approximant and backs the
//! closed-form linear-Gaussian oracles.

use crate::error::{Error, Result};
use crate::tolerances;

/// Dense square matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        SquareMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SquareMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::invalid("empty matrix"));
        }
        let mut m = SquareMatrix::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has length {} in a {dim}-dimensional matrix",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        let m = SquareMatrix { dim, data };
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = SquareMatrix::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("matrix has non-finite entries"))
        }
    }

    pub fn transpose(&self) -> SquareMatrix {
        let mut out = SquareMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch in matvec");
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.data[i * n + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch in sub");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> SquareMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Symmetric part `(A + A') / 2`.
    pub fn symmetric_part(&self) -> SquareMatrix {
        let n = self.dim;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        out
    }

    /// `A' * A` (Gram matrix of the columns).
    pub fn gram(&self) -> SquareMatrix {
        let n = self.dim;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.data[k * n + i] * self.data[k * n + j];
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute column sum (induced 1-norm), used to pick the
    /// exponential scaling.
    pub fn norm_one(&self) -> f64 {
        let n = self.dim;
        let mut best: f64 = 0.0;
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.get(i, j).abs();
            }
            best = best.max(acc);
        }
        best
    }
}

/// Frobenius norm `Tr(A A')^(1/2)`, i.e. the root sum of squared entries.
pub fn frobenius_norm(a: &SquareMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Logarithmic norm `lambda_max((A + A') / 2)`.
///
/// For symmetric `A` this is just the largest eigenvalue; for skew-symmetric
/// `A` it vanishes.
pub fn log_norm(a: &SquareMatrix) -> Result<f64> {
    a.ensure_finite()?;
    sym_eig_max(&a.symmetric_part())
}

/// Spectral norm `lambda_max(A A')^(1/2)`.
pub fn spectral_norm(a: &SquareMatrix) -> Result<f64> {
    a.ensure_finite()?;
    // A'A and AA' share eigenvalues; the Gram form keeps symmetry exact.
    let top = sym_eig_max(&a.gram())?;
    Ok(top.max(0.0).sqrt())
}

/// Largest eigenvalue of a symmetric matrix.
///
/// The input is symmetrized before solving; asymmetry beyond
/// [`tolerances::SYMMETRY_ABS`] (relative to the matrix scale) is rejected.
pub fn sym_eig_max(s: &SquareMatrix) -> Result<f64> {
    let (values, _) = sym_eig(s)?;
    Ok(values.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` with columns of `V` the orthonormal
/// eigenvectors, in no particular order.
pub fn sym_eig(s: &SquareMatrix) -> Result<(Vec<f64>, SquareMatrix)> {
    s.ensure_finite()?;
    let scale = s.max_abs().max(1.0);
    if s.max_abs_asymmetry() > tolerances::SYMMETRY_ABS * scale {
        return Err(Error::invalid(format!(
            "matrix asymmetry {} exceeds tolerance",
            s.max_abs_asymmetry()
        )));
    }
    let n = s.dim();
    let mut a = s.symmetric_part();
    let mut v = SquareMatrix::identity(n);
    if n == 1 {
        return Ok((vec![a.get(0, 0)], v));
    }

    let target = tolerances::EIGEN_ABS * scale;
    // Off-diagonal Frobenius mass shrinks by the rotated pair each sweep;
    // 30 sweeps is far beyond what cyclic Jacobi needs at these sizes.
    for _sweep in 0..30 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j).powi(2);
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= f64::EPSILON * scale {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - sn * vkq);
                    v.set(k, q, sn * vkp + c * vkq);
                }
            }
        }
    }
    let values = (0..n).map(|i| a.get(i, i)).collect();
    Ok((values, v))
}

/// Symmetric positive-semidefinite square root via eigendecomposition,
/// clamping eigenvalues at zero to absorb numerical PSD drift.
pub fn sym_sqrt(s: &SquareMatrix) -> Result<SquareMatrix> {
    let (values, vecs) = sym_eig(s)?;
    let n = s.dim();
    if values.iter().any(|&l| l < tolerances::PSD_FLOOR * s.max_abs().max(1.0)) {
        return Err(Error::invalid(format!(
            "matrix is not positive semidefinite (min eigenvalue {:.3e})",
            values.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    let mut out = SquareMatrix::zeros(n);
    for k in 0..n {
        let lam = values[k].max(tolerances::SQRT_CLAMP * 0.0).max(0.0).sqrt();
        for i in 0..n {
            for j in 0..n {
                out.add_to(i, j, lam * vecs.get(i, k) * vecs.get(j, k));
            }
        }
    }
    Ok(out)
}

/// Matrix exponential `exp(t A)` by scaling-and-squaring with a diagonal
/// Pade(13) approximant.
pub fn matrix_exp(a: &SquareMatrix, t: f64) -> Result<SquareMatrix> {
    a.ensure_finite()?;
    if !t.is_finite() {
        return Err(Error::invalid("non-finite time in matrix_exp"));
    }
    let n = a.dim();
    let scaled = a.scale(t);
    let norm = scaled.norm_one();
    if !norm.is_finite() || norm > 1e4 {
        return Err(Error::Range(format!(
            "matrix exponential argument too large (|tA| ~ {norm:.3e})"
        )));
    }
    const THETA_13: f64 = 5.371920351148152;
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let b = scaled.scale(0.5f64.powi(squarings as i32));

    // Pade(13) numerator coefficients for exp; the denominator mirrors them
    // with alternating signs.
    const C: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let ident = SquareMatrix::identity(n);
    let b2 = b.matmul(&b);
    let b4 = b2.matmul(&b2);
    let b6 = b4.matmul(&b2);

    // u = B (b13 B6 + b11 B4 + b9 B2) B6 + B (b7 B6 + b5 B4 + b3 B2 + b1 I)
    let w1 = b6.scale(C[13]).add(&b4.scale(C[11])).add(&b2.scale(C[9]));
    let w2 = b6
        .scale(C[7])
        .add(&b4.scale(C[5]))
        .add(&b2.scale(C[3]))
        .add(&ident.scale(C[1]));
    let u = b.matmul(&b6.matmul(&w1).add(&w2));
    // v = (b12 B6 + b10 B4 + b8 B2) B6 + b6 B6 + b4 B4 + b2 B2 + b0 I
    let z1 = b6.scale(C[12]).add(&b4.scale(C[10])).add(&b2.scale(C[8]));
    let v = b6
        .matmul(&z1)
        .add(&b6.scale(C[6]))
        .add(&b4.scale(C[4]))
        .add(&b2.scale(C[2]))
        .add(&ident.scale(C[0]));

    let p = v.add(&u);
    let q = v.sub(&u);
    let mut result = solve_linear(&q, &p)?;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result.ensure_finite().map_err(|_| {
        Error::Range("overflow while squaring in matrix_exp".into())
    })?;
    Ok(result)
}

/// Solves `Q X = P` by Gaussian elimination with partial pivoting.
fn solve_linear(q: &SquareMatrix, p: &SquareMatrix) -> Result<SquareMatrix> {
    let n = q.dim();
    let mut lhs = q.clone();
    let mut rhs = p.clone();
    for col in 0..n {
        let mut pivot = col;
        let mut best = lhs.get(col, col).abs();
        for r in (col + 1)..n {
            let v = lhs.get(r, col).abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Range("singular denominator in matrix_exp".into()));
        }
        if pivot != col {
            for j in 0..n {
                let a = lhs.get(col, j);
                lhs.set(col, j, lhs.get(pivot, j));
                lhs.set(pivot, j, a);
                let b = rhs.get(col, j);
                rhs.set(col, j, rhs.get(pivot, j));
                rhs.set(pivot, j, b);
            }
        }
        let d = lhs.get(col, col);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = lhs.get(r, col) / d;
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = lhs.get(r, j) - f * lhs.get(col, j);
                lhs.set(r, j, v);
                let w = rhs.get(r, j) - f * rhs.get(col, j);
                rhs.set(r, j, w);
            }
        }
    }
    for i in 0..n {
        let d = lhs.get(i, i);
        for j in 0..n {
            rhs.set(i, j, rhs.get(i, j) / d);
        }
    }
    Ok(rhs)
}

/// Nodes and weights of the Gauss-Legendre rule of order
/// [`tolerances::GAUSS_LEGENDRE_ORDER`] on `[0, 1]`.
///
/// Computed once by Newton iteration on the Legendre polynomial; exact for
/// polynomials up to degree 31, which covers every built-in potential's
/// Hessian.
pub fn gauss_legendre_unit() -> &'static [(f64, f64)] {
    use std::sync::OnceLock;
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = tolerances::GAUSS_LEGENDRE_ORDER;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            // Chebyshev-style initial guess for the k-th root on [-1, 1].
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map from [-1, 1] to [0, 1].
            out.push((0.5 * (x + 1.0), 0.5 * w));
        }
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        out
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn log_norm_identity_is_one() {
        assert_relative_eq!(log_norm(&SquareMatrix::identity(3)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_norm_skew_symmetric_is_zero() {
        let a = mat(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(log_norm(&a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn log_norm_diagonal() {
        let a = SquareMatrix::diagonal(&[-2.0, -3.0]);
        assert_relative_eq!(log_norm(&a).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_norm_examples() {
        assert_relative_eq!(spectral_norm(&SquareMatrix::identity(5)).unwrap(), 1.0, epsilon = 1e-12);
        let d = SquareMatrix::diagonal(&[3.0, -4.0]);
        assert_relative_eq!(spectral_norm(&d).unwrap(), 4.0, epsilon = 1e-12);
        // A A' = diag(4, 0), checked by hand.
        let n = mat(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert_relative_eq!(spectral_norm(&n).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn frobenius_examples() {
        assert_relative_eq!(frobenius_norm(&SquareMatrix::identity(4)), 2.0, epsilon = 1e-14);
        assert_eq!(frobenius_norm(&SquareMatrix::zeros(3)), 0.0);
        let ones = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_relative_eq!(frobenius_norm(&ones), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn sym_eig_max_examples() {
        let d = SquareMatrix::diagonal(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(sym_eig_max(&d).unwrap(), 3.0, epsilon = 1e-12);
        let flip = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_relative_eq!(sym_eig_max(&flip).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_rejects_asymmetry() {
        let a = mat(&[&[0.0, 1.0], &[0.5, 0.0]]);
        assert!(sym_eig_max(&a).is_err());
    }

    /// Power iteration on `S + shift I` as an independent oracle for the top
    /// eigenvalue of a random symmetric matrix.
    #[test]
    fn jacobi_matches_power_iteration() {
        let mut stream = crate::rng::NoiseStream::new(2024, 0);
        for _ in 0..5 {
            let n = 8;
            let mut s = SquareMatrix::zeros(n);
            for i in 0..n {
                for j in i..n {
                    let v = stream.normal();
                    s.set(i, j, v);
                    s.set(j, i, v);
                }
            }
            let jacobi = sym_eig_max(&s).unwrap();

            let shift = s.norm_one() + 1.0;
            let shifted = s.add(&SquareMatrix::identity(n).scale(shift));
            let mut v: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
            let mut lam = 0.0;
            for _ in 0..20_000 {
                let w = shifted.matvec(&v);
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                v = w.iter().map(|x| x / norm).collect();
                lam = norm;
            }
            let power = lam - shift;
            assert_relative_eq!(jacobi, power, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn exp_examples() {
        let zero = SquareMatrix::zeros(3);
        let e = matrix_exp(&zero, 1.0).unwrap();
        assert!(frobenius_norm(&e.sub(&SquareMatrix::identity(3))) < 1e-14);

        let d = SquareMatrix::diagonal(&[0.3, -1.2]);
        let e = matrix_exp(&d, 1.0).unwrap();
        assert_relative_eq!(e.get(0, 0), 0.3f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(e.get(1, 1), (-1.2f64).exp(), epsilon = 1e-12);

        // Nilpotent: the series truncates, exp(t N) = I + t N.
        let nil = mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e = matrix_exp(&nil, 2.5).unwrap();
        assert_relative_eq!(e.get(0, 1), 2.5, epsilon = 1e-12);
        assert_relative_eq!(e.get(0, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.get(1, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exp_rejects_huge_arguments() {
        let a = SquareMatrix::diagonal(&[1.0e6, 1.0]);
        assert!(matches!(matrix_exp(&a, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn exp_semigroup_property_on_random_matrices() {
        let mut stream = crate::rng::NoiseStream::new(7, 3);
        for _ in 0..10 {
            let mut a = SquareMatrix::zeros(4);
            for i in 0..4 {
                for j in 0..4 {
                    a.set(i, j, stream.normal());
                }
            }
            let s = 0.4;
            let t = 0.9;
            let whole = matrix_exp(&a, s + t).unwrap();
            let split = matrix_exp(&a, s).unwrap().matmul(&matrix_exp(&a, t).unwrap());
            assert!(
                frobenius_norm(&whole.sub(&split)) < crate::tolerances::EXP_IDENTITY,
                "semigroup identity violated"
            );
        }
    }

    #[test]
    fn exp_decay_matches_top_eigenvalue() {
        // For symmetric negative definite S with lambda_max = -lambda the
        // spectral norm of exp(tS) is exactly exp(-lambda t).
        let s = mat(&[&[-2.0, 0.5], &[0.5, -3.0]]);
        let lam = -sym_eig_max(&s).unwrap();
        for &t in &[0.1, 0.7, 2.0] {
            let e = matrix_exp(&s, t).unwrap();
            assert_relative_eq!(
                spectral_norm(&e).unwrap(),
                (-lam * t).exp(),
                epsilon = crate::tolerances::EXP_IDENTITY
            );
        }
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let s = mat(&[&[2.0, 0.3], &[0.3, 1.0]]);
        let r = sym_sqrt(&s).unwrap();
        assert!(frobenius_norm(&r.matmul(&r).sub(&s)) < 1e-12);
        let not_psd = SquareMatrix::diagonal(&[1.0, -0.5]);
        assert!(sym_sqrt(&not_psd).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let nodes = gauss_legendre_unit();
        assert_eq!(nodes.len(), 16);
        for degree in 0..=31 {
            let quad: f64 = nodes.iter().map(|(x, w)| w * x.powi(degree)).sum();
            let exact = 1.0 / (degree as f64 + 1.0);
            assert_relative_eq!(quad, exact, epsilon = 1e-13, max_relative = 1e-13);
        }
    }

    #[test]
    fn norm_inequalities_on_random_matrices() {
        let mut stream = crate::rng::NoiseStream::new(99, 1);
        for _ in 0..20 {
            let n = 5;
            let mut a = SquareMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    a.set(i, j, stream.normal());
                }
            }
            let log = log_norm(&a).unwrap();
            let spec = spectral_norm(&a).unwrap();
            let frob = frobenius_norm(&a);
            assert!(log <= spec + 1e-12);
            assert!(spec <= frob + 1e-12);
            assert!(frob <= (n as f64).sqrt() * spec + 1e-12);
        }
    }
}
