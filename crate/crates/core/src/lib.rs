//! Multiple solutions of semilinear elliptic Dirichlet problems
//!
//! ```text
//!   -Δu = f(u)  in Ω = (x_lo, x_hi) × (y_lo, y_hi),    u = 0 on ∂Ω
//! ```
//!
//! The pipeline has four stages:
//!
//! 1. [`eigen`]: analytic Dirichlet eigenpairs of the Laplacian on the rectangle,
//!    grouped by multiplicity.
//! 2. [`seeds`]: initial guesses built as combinations of eigenfunctions that solve
//!    the Galerkin problem restricted to their span (closed form for `u³`,
//!    randomized Newton for general `f`), optionally refined on a larger span.
//! 3. [`discretization`]: the interpolated-coefficient Legendre-Galerkin system
//!    `A U B + B U A - B F(U) B = 0` on the tensor LGL grid, with its Jacobian
//!    `K - M diag(f'(U))`.
//! 4. [`newton`]: damped Newton (and simple parameter continuation) started from
//!    each seed.
//!
//! [`analysis`] measures errors against high order references and classifies
//! solutions; [`lgl`] holds the one-dimensional spectral machinery everything
//! else is built on.

// `!(x > 0.0)` is used on purpose: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discretization;
pub mod eigen;
pub mod error;
pub mod lgl;
pub mod linsolve;
pub mod newton;
pub mod nonlinearity;
pub mod quadrature;
pub mod seeds;

pub use error::{Error, Result};
pub use lgl::{Lgl1D, SpectralOperators1D};

pub use analysis::{classify, convergence_study, error_norms, ConvergenceRecord, SignClass, SolutionClass};
pub use discretization::{DiscreteSolution, MassQuadrature, TensorOperators};
pub use eigen::{EigenGroup, EigenPair, Normalization, RectDomain};
pub use newton::{NewtonConfig, NewtonOutcome};
pub use nonlinearity::Nonlinearity;
pub use seeds::SeedGuess;
