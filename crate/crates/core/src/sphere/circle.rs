//! The circle as the flat degenerate case.
//!
//! Tangent spaces are one-dimensional and parallel transport is the
//! identity on angular velocity, so a parallel-coupled pair of Brownian
//! motions keeps its angular distance exactly constant: the curvature term
//! that contracts sphere couplings is absent here.

use crate::rng::NoiseStream;

/// Angle in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePoint(pub f64);

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

impl CirclePoint {
    pub fn new(angle: f64) -> Self {
        CirclePoint(wrap_angle(angle))
    }
}

pub fn circle_distance(p: &CirclePoint, q: &CirclePoint) -> f64 {
    wrap_angle(p.0 - q.0).abs()
}

pub fn circle_exp(p: &CirclePoint, v: f64) -> CirclePoint {
    CirclePoint::new(p.0 + v)
}

/// Signed angular displacement from `p` to `q` along the shorter arc.
pub fn circle_log(p: &CirclePoint, q: &CirclePoint) -> f64 {
    wrap_angle(q.0 - p.0)
}

/// Parallel transport on the circle is the identity on the 1-D tangent.
pub fn circle_transport(_p: &CirclePoint, _q: &CirclePoint, v: f64) -> f64 {
    v
}

/// Advances a parallel-coupled pair of circle Brownian motions and returns
/// the distance trajectory.
pub fn run_circle_coupled_pair(
    x0: CirclePoint,
    y0: CirclePoint,
    steps: usize,
    h: f64,
    stream: &mut NoiseStream,
) -> Vec<f64> {
    let mut x = x0;
    let mut y = y0;
    let mut out = vec![circle_distance(&x, &y)];
    for _ in 0..steps {
        let dw = h.sqrt() * stream.normal();
        x = circle_exp(&x, dw);
        y = circle_exp(&y, circle_transport(&x, &y, dw));
        out.push(circle_distance(&x, &y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn distance_wraps_correctly() {
        let p = CirclePoint::new(3.0);
        let q = CirclePoint::new(-3.0);
        assert_relative_eq!(
            circle_distance(&p, &q),
            2.0 * std::f64::consts::PI - 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exp_log_invert() {
        let p = CirclePoint::new(1.2);
        let q = circle_exp(&p, -0.7);
        assert_relative_eq!(circle_log(&p, &q), -0.7, epsilon = 1e-12);
    }

    #[test]
    fn parallel_coupled_brownian_pairs_keep_constant_distance() {
        // Flat geometry: identical angular increments leave the gap frozen
        // (no curvature-driven contraction), up to wrap events.
        let mut stream = NoiseStream::new(6, 6);
        let x0 = CirclePoint::new(0.4);
        let y0 = CirclePoint::new(1.0);
        let d0 = circle_distance(&x0, &y0);
        let path = run_circle_coupled_pair(x0, y0, 10_000, 1e-4, &mut stream);
        for d in path {
            assert_relative_eq!(d, d0, epsilon = 1e-9);
        }
    }
}
