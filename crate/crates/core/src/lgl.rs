//! Legendre-Gauss-Lobatto nodes, barycentric interpolation and the 1D Galerkin
//! stiffness/mass matrices of the interior nodal basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, legendre, legendre_derivative};

const NODE_TOL: f64 = 1e-15;
const NODE_MAX_ITERS: usize = 100;
/// Slack accepted when checking that an evaluation point lies in [-1, 1].
const DOMAIN_SLACK: f64 = 1e-12;

/// LGL nodes and weights of order `N` on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Lgl1D {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub bary_weights: Vec<f64>,
}

impl Lgl1D {
    /// Builds the `N + 1` point rule: the endpoints and the `N - 1` roots of `P_N'`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder(order));
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n + 1];
        nodes[0] = -1.0;
        nodes[n] = 1.0;
        // Newton on P_N' from Chebyshev-Gauss-Lobatto guesses; P_N'' comes from
        // the Legendre equation (1 - x^2) P'' = 2x P' - N(N+1) P.
        for j in 1..=n / 2 {
            let mut x = -(PI * j as f64 / nf).cos();
            for _ in 0..NODE_MAX_ITERS {
                let p = legendre(n, x);
                let dp = legendre_derivative(n, x);
                let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
                let dx = dp / ddp;
                x -= dx;
                if dx.abs() <= NODE_TOL {
                    break;
                }
            }
            nodes[j] = x;
            nodes[n - j] = -x;
        }
        if n.is_multiple_of(2) {
            nodes[n / 2] = 0.0;
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let p = legendre(n, x);
                2.0 / (nf * (nf + 1.0) * p * p)
            })
            .collect();
        let bary_weights = barycentric_weights(&nodes);
        Ok(Self {
            order,
            nodes,
            weights,
            bary_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[1..self.order]
    }

    /// Values of all Lagrange basis polynomials `h_j` at `x`.
    pub fn basis_at(&self, x: f64) -> Result<Vec<f64>> {
        let x = self.check_point(x)?;
        let mut out = vec![0.0; self.len()];
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            out[j] = 1.0;
            return Ok(out);
        }
        let mut denom = 0.0;
        for (o, (&xj, &wj)) in out.iter_mut().zip(self.nodes.iter().zip(&self.bary_weights)) {
            *o = wj / (x - xj);
            denom += *o;
        }
        out.iter_mut().for_each(|o| *o /= denom);
        Ok(out)
    }

    /// Interpolation matrix `P` with `P[i, j] = h_j(points[i])`.
    pub fn interpolation_matrix(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let mut p = DMatrix::zeros(points.len(), self.len());
        for (i, &x) in points.iter().enumerate() {
            for (j, v) in self.basis_at(x)?.into_iter().enumerate() {
                p[(i, j)] = v;
            }
        }
        Ok(p)
    }

    /// Second-form barycentric evaluation of the interpolant of `values` at `x`.
    ///
    /// At a node this returns the stored value exactly.
    pub fn evaluate(&self, values: &[f64], x: f64) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: (self.len(), 1),
                got: (values.len(), 1),
            });
        }
        let x = self.check_point(x)?;
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            return Ok(values[j]);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for ((&xj, &wj), &vj) in self.nodes.iter().zip(&self.bary_weights).zip(values) {
            let t = wj / (x - xj);
            num += t * vj;
            den += t;
        }
        Ok(num / den)
    }

    /// Evaluates the tensor interpolant `Σ V[j,k] h_j(x) h_k(y)` at `(x, y)`.
    pub fn evaluate_2d(&self, values: &DMatrix<f64>, x: f64, y: f64) -> Result<f64> {
        let n = self.len();
        if values.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: values.shape(),
            });
        }
        let (hx, hy) = match (self.basis_at(x), self.basis_at(y)) {
            (Ok(hx), Ok(hy)) => (hx, hy),
            _ => {
                return Err(Error::OutOfDomain {
                    point: vec![x, y],
                    lo: vec![-1.0, -1.0],
                    hi: vec![1.0, 1.0],
                })
            }
        };
        let mut acc = 0.0;
        for k in 0..n {
            if hy[k] == 0.0 {
                continue;
            }
            let col: f64 = (0..n).map(|j| values[(j, k)] * hx[j]).sum();
            acc += col * hy[k];
        }
        Ok(acc)
    }

    /// Nodal differentiation matrix: `(D v)_i = p'(ξ_i)` for the interpolant `p` of `v`.
    pub fn differentiation_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let (x, w) = (&self.nodes, &self.bary_weights);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (w[j] / w[i]) / (x[i] - x[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        d
    }

    fn check_point(&self, x: f64) -> Result<f64> {
        if !(-1.0 - DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) || x.is_nan() {
            return Err(Error::OutOfDomain {
                point: vec![x],
                lo: vec![-1.0],
                hi: vec![1.0],
            });
        }
        Ok(x.clamp(-1.0, 1.0))
    }
}

/// `w_j = 1 / Π_{k≠j} (x_j - x_k)`, rescaled so that `max |w_j| = 1`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| 2.0 * (xj - xk))
                .product();
            1.0 / prod
        })
        .collect();
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= scale);
    w
}

/// Nodes, weights and operators of one direction.
#[derive(Debug, Clone)]
pub struct SpectralOperators1D {
    pub lgl: Lgl1D,
    /// Differentiation matrix on all `N + 1` nodes.
    pub diff: DMatrix<f64>,
    /// Stiffness `A[j,k] = ∫ h_k' h_j'` over interior indices `1..N-1`.
    pub stiffness: DMatrix<f64>,
    /// Mass `B[j,k] = ∫ h_k h_j` over interior indices `1..N-1`.
    pub mass: DMatrix<f64>,
}

impl SpectralOperators1D {
    /// Assembles `A` and `B` exactly with an auxiliary `(N+1)`-point Gauss-Legendre
    /// rule; `h_j h_k` has degree `2N`, one more than the LGL rule integrates.
    pub fn new(lgl: Lgl1D) -> Result<Self> {
        let n = lgl.order;
        if n < 2 {
            return Err(Error::NoInteriorNodes(n));
        }
        let diff = lgl.differentiation_matrix();
        let gauss = gauss_legendre(n + 1);
        let interp = lgl.interpolation_matrix(&gauss.points)?;
        let deriv = &interp * &diff;
        let m = n - 1;
        let mut stiffness = DMatrix::zeros(m, m);
        let mut mass = DMatrix::zeros(m, m);
        for j in 0..m {
            for k in 0..=j {
                let (mut a, mut b) = (0.0, 0.0);
                for (q, &wq) in gauss.weights.iter().enumerate() {
                    a += wq * deriv[(q, j + 1)] * deriv[(q, k + 1)];
                    b += wq * interp[(q, j + 1)] * interp[(q, k + 1)];
                }
                stiffness[(j, k)] = a;
                stiffness[(k, j)] = a;
                mass[(j, k)] = b;
                mass[(k, j)] = b;
            }
        }
        Ok(Self {
            lgl,
            diff,
            stiffness,
            mass,
        })
    }

    pub fn with_order(order: usize) -> Result<Self> {
        Self::new(Lgl1D::new(order)?)
    }

    pub fn order(&self) -> usize {
        self.lgl.order
    }
}

/// LGL nodes and weights of order `n`.
pub fn lgl_nodes_weights(n: usize) -> Result<Lgl1D> {
    Lgl1D::new(n)
}

pub fn differentiation_matrix(lgl: &Lgl1D) -> DMatrix<f64> {
    lgl.differentiation_matrix()
}

pub fn assemble_stiffness_mass(lgl: &Lgl1D) -> Result<SpectralOperators1D> {
    SpectralOperators1D::new(lgl.clone())
}
