//! Damped Newton on the discrete system, plus scalar-parameter continuation.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{
    fast_diagonalization_solve, jacobian_apply, jacobian_dense, residual, DiscreteSolution, TensorOperators,
};
use crate::error::{Error, Result};
use crate::linsolve::{dense_lu_solve, gmres, DenseSolve, GmresConfig};
use crate::nonlinearity::Nonlinearity;

/// How the Newton correction equation is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LinearSolver {
    /// Dense LU up to `dense_max_n`, preconditioned GMRES above.
    Auto {
        dense_max_n: usize,
    },
    Dense,
    /// GMRES preconditioned by the fast-diagonalization Laplacian solve.
    Krylov,
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Auto { dense_max_n: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    /// Stop when the Euclidean norm of `vec(R(U))` drops below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Newton steps taken even if the initial residual already meets `tol`.
    /// Steps taken after reaching `tol` are accepted undamped.
    pub min_iters: usize,
    pub max_halvings: usize,
    /// Parameter values for [`continuation_solve`].
    pub continuation: Option<Vec<f64>>,
    pub linear_solver: LinearSolver,
    pub krylov_rtol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 100,
            min_iters: 0,
            max_halvings: 30,
            continuation: None,
            linear_solver: LinearSolver::default(),
            krylov_rtol: 1e-12,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("newton tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("newton max_iters must be >= 1".into()));
        }
        if self.min_iters > self.max_iters {
            return Err(Error::InvalidArgument("newton min_iters exceeds max_iters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: DiscreteSolution,
    /// Entry 0 is the initial residual.
    pub history: Vec<IterationRecord>,
}

impl NewtonOutcome {
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        write_history_csv(&self.history, path)
    }
}

pub fn write_history_csv(history: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "iteration,residual_norm,halvings")?;
    for h in history {
        writeln!(w, "{},{:e},{}", h.iteration, h.residual_norm, h.halvings)?;
    }
    Ok(())
}

fn newton_step(
    u: &DMatrix<f64>,
    r: &DMatrix<f64>,
    ops: &TensorOperators,
    f: &Nonlinearity,
    cfg: &NewtonConfig,
    iteration: usize,
) -> Result<DMatrix<f64>> {
    let (rows, cols) = u.shape();
    let use_dense = match cfg.linear_solver {
        LinearSolver::Dense => true,
        LinearSolver::Krylov => false,
        LinearSolver::Auto { dense_max_n } => ops.n() <= dense_max_n,
    };
    let rhs = DVector::from_column_slice(r.as_slice()) * -1.0;
    if use_dense {
        let j = jacobian_dense(u, ops, f)?;
        // Scale of the constant part K, so a vanishing Jacobian is still detected.
        let scale = ops.x.stiffness.amax() * ops.y.mass.amax() + ops.x.mass.amax() * ops.y.stiffness.amax();
        match dense_lu_solve(j, &rhs, Some(scale)) {
            DenseSolve::Solved(x) => Ok(DMatrix::from_column_slice(rows, cols, x.as_slice())),
            DenseSolve::Singular { pivot, threshold } => Err(Error::SingularJacobian {
                iteration,
                pivot,
                threshold,
            }),
        }
    } else {
        let apply = |v: &DVector<f64>| {
            let vm = DMatrix::from_column_slice(rows, cols, v.as_slice());
            let out = jacobian_apply(u, &vm, ops, f).expect("shapes checked");
            DVector::from_column_slice(out.as_slice())
        };
        let precond = |v: &DVector<f64>| {
            let vm = DMatrix::from_column_slice(rows, cols, v.as_slice());
            let out = fast_diagonalization_solve(ops, &vm).expect("shapes checked");
            DVector::from_column_slice(out.as_slice())
        };
        let gcfg = GmresConfig {
            rtol: cfg.krylov_rtol,
            ..GmresConfig::default()
        };
        let (x, _) = gmres(apply, precond, &rhs, &gcfg)?;
        Ok(DMatrix::from_column_slice(rows, cols, x.as_slice()))
    }
}

/// Damped Newton from `u0` until `‖vec R(U)‖₂ < cfg.tol`.
///
/// Each full step is halved until the residual norm decreases; running out of
/// halvings or iterations is reported as [`Error::NotConverged`].
pub fn newton_solve(
    u0: &DMatrix<f64>,
    ops: &TensorOperators,
    f: &Nonlinearity,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    cfg.validate()?;
    ops.check_shape(u0)?;
    let mut u = u0.clone();
    let mut r = residual(&u, ops, f)?;
    let mut norm = r.norm();
    let mut history = vec![IterationRecord {
        iteration: 0,
        residual_norm: norm,
        halvings: 0,
    }];
    let not_converged = |iterations: usize, u: &DMatrix<f64>, history: &[IterationRecord]| Error::NotConverged {
        iterations,
        last_residual: history.last().map_or(f64::NAN, |h| h.residual_norm),
        history: history.iter().map(|h| h.residual_norm).collect(),
        last_iterate: Box::new(u.clone()),
    };
    let mut iters = 0;
    while iters < cfg.min_iters || !(norm < cfg.tol) {
        if iters == cfg.max_iters || !norm.is_finite() {
            return Err(not_converged(iters, &u, &history));
        }
        iters += 1;
        let delta = newton_step(&u, &r, ops, f, cfg, iters)?;
        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let trial = &u + &delta * step;
            let r_trial = residual(&trial, ops, f)?;
            let n_trial = r_trial.norm();
            let polishing = norm < cfg.tol && n_trial < cfg.tol;
            if n_trial < norm || polishing {
                u = trial;
                r = r_trial;
                norm = n_trial;
                break;
            }
            if halvings == cfg.max_halvings {
                history.push(IterationRecord {
                    iteration: iters,
                    residual_norm: norm,
                    halvings,
                });
                return Err(not_converged(iters, &u, &history));
            }
            halvings += 1;
            step *= 0.5;
        }
        history.push(IterationRecord {
            iteration: iters,
            residual_norm: norm,
            halvings,
        });
    }
    Ok(NewtonOutcome {
        solution: DiscreteSolution {
            u,
            n: ops.n(),
            domain: ops.domain,
            nonlinearity: *f,
            seed_label: String::new(),
            residual_norm: norm,
            newton_iters: iters,
            mass: ops.mass_quadrature,
        },
        history,
    })
}

/// Solves along `cfg.continuation`, warm-starting each parameter value from the
/// previous solution.
pub fn continuation_solve(
    u0: &DMatrix<f64>,
    ops: &TensorOperators,
    f: &Nonlinearity,
    cfg: &NewtonConfig,
) -> Result<Vec<NewtonOutcome>> {
    let path = cfg
        .continuation
        .as_ref()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::InvalidArgument("continuation path is empty".into()))?;
    let mut out: Vec<NewtonOutcome> = Vec::with_capacity(path.len());
    let mut start = u0.clone();
    for &p in path {
        let fp = f
            .with_parameter(p)
            .ok_or_else(|| Error::InvalidArgument(format!("{f} has no continuation parameter")))?;
        let res = newton_solve(&start, ops, &fp, cfg).map_err(|e| Error::Continuation {
            parameter: p,
            source: Box::new(e),
        })?;
        start = res.solution.u.clone();
        out.push(res);
    }
    Ok(out)
}

/// `n_steps + 1` equally spaced values from `from` to `to`.
pub fn linear_path(from: f64, to: f64, n_steps: usize) -> Vec<f64> {
    let n = n_steps.max(1);
    (0..=n).map(|i| from + (to - from) * i as f64 / n as f64).collect()
}
