//! Legendre polynomials and Gauss-Legendre quadrature on [-1, 1].

use std::f64::consts::PI;

/// Evaluates `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
pub fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_pair(n, x).0
}

/// `P_n'(x)`, valid on the closed interval (endpoint values from `P_n'(±1) = (±1)^{n-1} n(n+1)/2`).
pub fn legendre_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if (x.abs() - 1.0).abs() < f64::EPSILON {
        let nf = n as f64;
        let sign = if x > 0.0 || (n - 1).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        return sign * nf * (nf + 1.0) / 2.0;
    }
    let (p, p_prev) = legendre_pair(n, x);
    n as f64 * (x * p - p_prev) / (x * x - 1.0)
}

/// A one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Integrates `f` over `[a, b]` with the rule mapped affinely from [-1, 1].
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Points and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        (
            self.points.iter().map(|&x| mid + half * x).collect(),
            self.weights.iter().map(|&w| w * half).collect(),
        )
    }
}

/// `n`-point Gauss-Legendre rule, exact for polynomials of degree `2n - 1`.
///
/// Points are returned in ascending order.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        dp = if dp == 0.0 {
            1.0
        } else {
            nf * (x * p - p_prev) / (x * x - 1.0)
        };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    QuadratureRule { points, weights }
}
