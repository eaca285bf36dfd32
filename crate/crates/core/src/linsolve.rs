//! Linear solvers used inside Newton: dense LU with a pivot check and a
//! right-preconditioned restarted GMRES.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots below `PIVOT_RTOL * max|J|` flag a singular Jacobian.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Result of a dense solve: the solution or the offending pivot.
pub enum DenseSolve {
    Solved(DVector<f64>),
    Singular { pivot: f64, threshold: f64 },
}

/// LU with partial pivoting; reports the smallest pivot when it falls below
/// `PIVOT_RTOL * scale` (`scale` defaults to `max|a|`).
pub fn dense_lu_solve(a: DMatrix<f64>, b: &DVector<f64>, scale: Option<f64>) -> DenseSolve {
    let scale = scale.unwrap_or_else(|| a.amax());
    let threshold = PIVOT_RTOL * scale.max(f64::MIN_POSITIVE);
    let lu = a.lu();
    let u = lu.u();
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if pivot < threshold || !pivot.is_finite() {
        return DenseSolve::Singular { pivot, threshold };
    }
    match lu.solve(b) {
        Some(x) => DenseSolve::Solved(x),
        None => DenseSolve::Singular { pivot: 0.0, threshold },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub rtol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            restart: 60,
            max_iters: 600,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` by GMRES(m) with right preconditioning `A M⁻¹ y = b`, `x = M⁻¹ y`.
///
/// `apply` computes `A v`, `precond` computes `M⁻¹ v`. Starts from `x = 0`.
pub fn gmres<A, P>(apply: A, precond: P, b: &DVector<f64>, cfg: &GmresConfig) -> Result<(DVector<f64>, GmresReport)>
where
    A: Fn(&DVector<f64>) -> DVector<f64>,
    P: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok((
            x,
            GmresReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let m = cfg.restart.max(1).min(n.max(1));
    let mut total = 0;
    let mut r = b.clone();
    let mut rel = 1.0;
    while total < cfg.max_iters {
        let beta = r.norm();
        rel = beta / b_norm;
        if rel <= cfg.rtol {
            break;
        }
        let mut v: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<DVector<f64>> = Vec::with_capacity(m);
        v.push(&r / beta);
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = DVector::<f64>::zeros(m + 1);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            // Modified Gram-Schmidt, applied twice for stability.
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = vi.dot(&w);
                    h[(i, k)] += hij;
                    w.axpy(-hij, vi, 1.0);
                }
            }
            let wn = w.norm();
            h[(k + 1, k)] = wn;
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let denom = h[(k, k)].hypot(h[(k + 1, k)]);
            if denom == 0.0 {
                return Err(Error::Numeric("GMRES breakdown: singular Krylov matrix".into()));
            }
            cs[k] = h[(k, k)] / denom;
            sn[k] = h[(k + 1, k)] / denom;
            h[(k, k)] = denom;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            rel = g[k + 1].abs() / b_norm;
            if rel <= cfg.rtol || wn == 0.0 || total >= cfg.max_iters {
                break;
            }
            v.push(w / wn);
        }
        // Back substitution for the k_used × k_used upper triangle.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[(i, j)] * y[j]).sum();
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.axpy(*yi, zi, 1.0);
        }
        r = b - apply(&x);
        rel = r.norm() / b_norm;
        if rel <= cfg.rtol {
            break;
        }
    }
    if rel > cfg.rtol {
        return Err(Error::Numeric(format!(
            "GMRES stalled after {total} iterations at relative residual {rel:.3e}"
        )));
    }
    Ok((
        x,
        GmresReport {
            iterations: total,
            relative_residual: rel,
        },
    ))
}
