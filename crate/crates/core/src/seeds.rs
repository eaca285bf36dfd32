//! Initial guesses built from Laplacian eigenfunctions.
//!
//! A seed is `u⁰ = Σ a_j φ_j` over a small eigenfunction basis whose coefficients
//! solve the Galerkin problem restricted to that span:
//!
//! ```text
//!   r_i(a) = (∇u⁰, ∇φ_i) - (f(u⁰), φ_i) = 0
//! ```

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::TensorOperators;
use crate::eigen::{EigenGroup, EigenPair, Normalization, RectDomain};
use crate::error::{Error, Result};
use crate::linsolve::{dense_lu_solve, DenseSolve};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::gauss_legendre;

/// Entries at or below this magnitude count as zero for signs and labels.
const ZERO_COEFF: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGuess {
    pub label: String,
    pub basis: Vec<(usize, usize)>,
    pub normalization: Normalization,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    /// Set when a subspace extension failed and the seed was only zero-padded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl SeedGuess {
    pub fn pairs(&self, domain: &RectDomain) -> Vec<EigenPair> {
        self.basis
            .iter()
            .map(|&(m, n)| EigenPair::new(domain, m, n, self.normalization))
            .collect()
    }

    /// `u⁰(x, y)`.
    pub fn value(&self, domain: &RectDomain, x: f64, y: f64) -> f64 {
        self.pairs(domain)
            .iter()
            .zip(&self.coefficients)
            .map(|(p, a)| a * p.value_unchecked(domain, x, y))
            .sum()
    }

    /// The same function with all coefficients negated and the label rebuilt.
    pub fn negated(&self) -> SeedGuess {
        let coefficients: Vec<f64> = self.coefficients.iter().map(|a| -a).collect();
        SeedGuess {
            label: seed_label(&self.basis, &coefficients),
            coefficients,
            ..self.clone()
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(
            path,
        )?))?)
    }
}

/// Label `u_{12+21}` from the nonzero coefficients, members in `(m, n)` order.
pub fn seed_label(basis: &[(usize, usize)], coefficients: &[f64]) -> String {
    let mut terms: Vec<((usize, usize), f64)> = basis
        .iter()
        .zip(coefficients)
        .filter(|(_, a)| a.abs() > ZERO_COEFF)
        .map(|(&mn, &a)| (mn, a))
        .collect();
    if terms.is_empty() {
        return "u_{0}".into();
    }
    terms.sort_by_key(|&(mn, _)| mn);
    let mut s = String::from("u_{");
    for (i, ((m, n), a)) in terms.iter().enumerate() {
        let sign = if *a < 0.0 {
            "-"
        } else if i > 0 {
            "+"
        } else {
            ""
        };
        let tag = if *m < 10 && *n < 10 {
            format!("{m}{n}")
        } else {
            format!("({m},{n})")
        };
        s.push_str(sign);
        s.push_str(&tag);
    }
    s.push('}');
    s
}

/// Default Gauss points per direction: `4·max(m,n) + 32`.
///
/// `u³ φ` already has frequency `4·max(m,n)`, and `sin(u⁰)` is not a trig
/// polynomial at all; this order keeps a doubling check below 1e-12.
pub fn default_quad_order(basis: &[EigenPair]) -> usize {
    4 * max_index(basis) + 32
}

fn max_index(basis: &[EigenPair]) -> usize {
    basis.iter().map(|p| p.m.max(p.n)).max().unwrap_or(0)
}

/// The restricted Galerkin system on `span{φ_j}` with tensor Gauss quadrature.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub basis: Vec<EigenPair>,
    pub domain: RectDomain,
    pub quad_order: usize,
    /// Tensor quadrature weights, x index fastest.
    weights: DVector<f64>,
    /// `phi[(q, j)] = φ_j(point_q)`.
    phi: DMatrix<f64>,
    /// `gram[(i, j)] = (∇φ_j, ∇φ_i)`.
    gram: DMatrix<f64>,
}

impl Subproblem {
    pub fn new(basis: &[EigenPair], domain: &RectDomain, quad_order: usize) -> Result<Self> {
        domain.validate()?;
        if basis.is_empty() {
            return Err(Error::InvalidArgument("empty eigenfunction basis".into()));
        }
        let needed = 2 * max_index(basis) + 8;
        if quad_order < needed {
            return Err(Error::InsufficientQuadrature {
                got: quad_order,
                needed,
                max_index: max_index(basis),
            });
        }
        let rule = gauss_legendre(quad_order);
        let (xs, wx) = rule.mapped(domain.x_lo, domain.x_hi);
        let (ys, wy) = rule.mapped(domain.y_lo, domain.y_hi);
        let q = quad_order * quad_order;
        let weights = DVector::from_fn(q, |i, _| wx[i % quad_order] * wy[i / quad_order]);
        let mut phi = DMatrix::zeros(q, basis.len());
        let mut dx = DMatrix::zeros(q, basis.len());
        let mut dy = DMatrix::zeros(q, basis.len());
        for (j, p) in basis.iter().enumerate() {
            for i in 0..q {
                let (x, y) = (xs[i % quad_order], ys[i / quad_order]);
                phi[(i, j)] = p.value_unchecked(domain, x, y);
                let (gx, gy) = p.gradient_unchecked(domain, x, y);
                dx[(i, j)] = gx;
                dy[(i, j)] = gy;
            }
        }
        let wdx = DMatrix::from_fn(q, basis.len(), |i, j| weights[i] * dx[(i, j)]);
        let wdy = DMatrix::from_fn(q, basis.len(), |i, j| weights[i] * dy[(i, j)]);
        let gram = dx.transpose() * wdx + dy.transpose() * wdy;
        Ok(Self {
            basis: basis.to_vec(),
            domain: *domain,
            quad_order,
            weights,
            phi,
            gram,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `(∇φ_j, ∇φ_i)`, computed by quadrature.
    pub fn gradient_gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn check_len(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: (self.dim(), 1),
                got: (a.len(), 1),
            });
        }
        Ok(())
    }

    pub fn residual(&self, a: &[f64], f: &Nonlinearity) -> Result<DVector<f64>> {
        self.check_len(a)?;
        let a = DVector::from_column_slice(a);
        let u = &self.phi * &a;
        let wf = DVector::from_fn(u.len(), |i, _| self.weights[i] * f.f(u[i]));
        Ok(&self.gram * a - self.phi.transpose() * wf)
    }

    /// `∂r_i/∂a_j = (∇φ_j, ∇φ_i) - (f'(u⁰) φ_j, φ_i)`.
    pub fn jacobian(&self, a: &[f64], f: &Nonlinearity) -> Result<DMatrix<f64>> {
        self.check_len(a)?;
        let u = &self.phi * DVector::from_column_slice(a);
        let wphi = DMatrix::from_fn(self.phi.nrows(), self.dim(), |i, j| {
            self.weights[i] * f.f_prime(u[i]) * self.phi[(i, j)]
        });
        Ok(&self.gram - self.phi.transpose() * wphi)
    }

    /// Damped Newton on `r(a) = 0`; `None` when it fails to reach `tol`.
    pub fn newton(&self, a0: &[f64], f: &Nonlinearity, opts: &SubproblemNewton) -> Result<Option<(Vec<f64>, f64)>> {
        let mut a = DVector::from_column_slice(a0);
        let mut r = self.residual(a.as_slice(), f)?;
        let mut norm = r.norm();
        for _ in 0..opts.max_iters {
            if norm < opts.tol {
                return Ok(Some((a.as_slice().to_vec(), norm)));
            }
            let j = self.jacobian(a.as_slice(), f)?;
            let delta = match dense_lu_solve(j, &(-&r), Some(self.gram.amax())) {
                DenseSolve::Solved(d) => d,
                DenseSolve::Singular { .. } => return Ok(None),
            };
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial = &a + &delta * step;
                let rt = self.residual(trial.as_slice(), f)?;
                let nt = rt.norm();
                if nt < norm {
                    a = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return Ok(None);
            }
        }
        Ok((norm < opts.tol).then(|| (a.as_slice().to_vec(), norm)))
    }
}

/// Newton settings for the small coefficient systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemNewton {
    pub tol: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
}

impl Default for SubproblemNewton {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 200,
            max_halvings: 20,
        }
    }
}

/// `r(a)` for the basis at the given quadrature order.
pub fn subproblem_residual(
    a: &[f64],
    basis: &[EigenPair],
    domain: &RectDomain,
    f: &Nonlinearity,
    quad_order: usize,
) -> Result<Vec<f64>> {
    Ok(Subproblem::new(basis, domain, quad_order)?
        .residual(a, f)?
        .as_slice()
        .to_vec())
}

/// All `3^q - 1` nontrivial cubic seeds on a `q`-fold eigenspace.
///
/// For a support of size `r` the nonzero coefficients are
/// `±4 sqrt(λ / (3(4r - 1)))` in unit-amplitude scaling; for an orthonormal group
/// they are converted so that `u⁰` is the same function.
pub fn enumerate_cubic_seeds(group: &EigenGroup, f: &Nonlinearity, domain: &RectDomain) -> Result<Vec<SeedGuess>> {
    if *f != Nonlinearity::Cubic {
        return Err(Error::WrongNonlinearity(f.to_string()));
    }
    let q = group.multiplicity;
    if q == 0 || q > 12 {
        return Err(Error::InvalidArgument(format!("unsupported multiplicity {q}")));
    }
    let pairs = group.pairs();
    let sub = Subproblem::new(&pairs, domain, default_quad_order(&pairs))?;
    let unit_to_norm = 1.0 / group.normalization.factor(domain);
    let mut seeds = Vec::with_capacity(3usize.pow(q as u32) - 1);
    for support in 1u32..(1 << q) {
        let r = support.count_ones() as f64;
        let amp = 4.0 * (group.lambda / (3.0 * (4.0 * r - 1.0))).sqrt() * unit_to_norm;
        let members: Vec<usize> = (0..q).filter(|i| support & (1 << i) != 0).collect();
        for signs in 0u32..(1 << members.len()) {
            let mut a = vec![0.0; q];
            for (s, &i) in members.iter().enumerate() {
                a[i] = if signs & (1 << s) != 0 { -amp } else { amp };
            }
            let residual_norm = sub.residual(&a, f)?.norm();
            seeds.push(SeedGuess {
                label: seed_label(&group.members, &a),
                basis: group.members.clone(),
                normalization: group.normalization,
                coefficients: a,
                residual_norm,
                rng_seed: None,
                warning: None,
            });
        }
    }
    Ok(seeds)
}

/// Flips `a` so that its first entry above [`ZERO_COEFF`] is positive.
pub fn canonical_sign(a: &[f64]) -> Vec<f64> {
    match a.iter().find(|v| v.abs() > ZERO_COEFF) {
        Some(&v) if v < 0.0 => a.iter().map(|x| -x).collect(),
        _ => a.to_vec(),
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (round_for_sort(*x), round_for_sort(*y));
        match y.total_cmp(&x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn round_for_sort(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSearch {
    pub trials: usize,
    /// Draws are uniform in `[-box_size, box_size]^J`; roots outside are discarded.
    pub box_size: f64,
    pub rng_seed: u64,
    /// Two roots closer than this (after sign canonicalization) are the same.
    pub dedup_tol: f64,
    pub newton: SubproblemNewton,
}

impl Default for RandomSearch {
    fn default() -> Self {
        Self {
            trials: 2000,
            box_size: 10.0,
            rng_seed: 0,
            dedup_tol: 1e-6,
            newton: SubproblemNewton::default(),
        }
    }
}

/// Random multistart Newton on the coefficient system.
///
/// Trial `t` draws its start from a ChaCha stream keyed by `(rng_seed, t)`, so the
/// result does not depend on how trials are scheduled. Returns one canonical
/// representative per `±` pair, sorted lexicographically (descending).
pub fn random_newton_search(
    basis: &[EigenPair],
    domain: &RectDomain,
    f: &Nonlinearity,
    search: &RandomSearch,
    quad_order: Option<usize>,
) -> Result<Vec<SeedGuess>> {
    if !(search.box_size > 0.0) {
        return Err(Error::InvalidArgument("search box must be positive".into()));
    }
    let sub = Subproblem::new(basis, domain, quad_order.unwrap_or_else(|| default_quad_order(basis)))?;
    let run = |t: usize| -> Result<Option<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(search.rng_seed);
        rng.set_stream(t as u64);
        let a0: Vec<f64> = (0..sub.dim())
            .map(|_| rng.gen_range(-search.box_size..=search.box_size))
            .collect();
        Ok(sub.newton(&a0, f, &search.newton)?.and_then(|(a, _)| {
            let nontrivial = a.iter().any(|v| v.abs() > 1e-6);
            let inside = a.iter().all(|v| v.abs() <= search.box_size);
            (nontrivial && inside).then(|| canonical_sign(&a))
        }))
    };
    let found = run_trials(search.trials, run)?;
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for a in found.into_iter().flatten() {
        if !roots.iter().any(|r| distance(r, &a) < search.dedup_tol) {
            roots.push(a);
        }
    }
    roots.sort_by(|a, b| lexicographic_desc(a, b));
    let members: Vec<(usize, usize)> = basis.iter().map(|p| (p.m, p.n)).collect();
    let normalization = basis[0].normalization;
    roots
        .into_iter()
        .map(|a| {
            let residual_norm = sub.residual(&a, f)?.norm();
            Ok(SeedGuess {
                label: seed_label(&members, &a),
                basis: members.clone(),
                normalization,
                coefficients: a,
                residual_norm,
                rng_seed: Some(search.rng_seed),
                warning: None,
            })
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn run_trials<T, F>(trials: usize, run: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials<T, F>(trials: usize, run: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..trials).map(run).collect()
}

/// Refines a seed on a larger basis whose leading entries are `seed.basis`.
///
/// If Newton fails on the larger system the zero-padded seed is returned with
/// `warning` set.
pub fn extend_seed(
    seed: &SeedGuess,
    larger_basis: &[EigenPair],
    domain: &RectDomain,
    f: &Nonlinearity,
    quad_order: Option<usize>,
) -> Result<SeedGuess> {
    let prefix_ok = larger_basis.len() >= seed.basis.len()
        && larger_basis
            .iter()
            .zip(&seed.basis)
            .all(|(p, &(m, n))| p.m == m && p.n == n && p.normalization == seed.normalization);
    if !prefix_ok {
        return Err(Error::InvalidArgument(
            "larger basis must start with the seed's basis in the same normalization".into(),
        ));
    }
    if larger_basis.len() == seed.basis.len() {
        return Ok(seed.clone());
    }
    let sub = Subproblem::new(
        larger_basis,
        domain,
        quad_order.unwrap_or_else(|| default_quad_order(larger_basis)),
    )?;
    let mut a0 = seed.coefficients.clone();
    a0.resize(larger_basis.len(), 0.0);
    let members: Vec<(usize, usize)> = larger_basis.iter().map(|p| (p.m, p.n)).collect();
    match sub.newton(&a0, f, &SubproblemNewton::default())? {
        Some((a, residual_norm)) if a.iter().any(|v| v.abs() > 1e-6) => Ok(SeedGuess {
            label: seed.label.clone(),
            basis: members,
            normalization: seed.normalization,
            coefficients: a,
            residual_norm,
            rng_seed: seed.rng_seed,
            warning: None,
        }),
        _ => {
            log::warn!("extension of {} failed; keeping the zero-padded seed", seed.label);
            let residual_norm = sub.residual(&a0, f)?.norm();
            Ok(SeedGuess {
                label: seed.label.clone(),
                basis: members,
                normalization: seed.normalization,
                coefficients: a0,
                residual_norm,
                rng_seed: seed.rng_seed,
                warning: Some("subspace extension did not converge".into()),
            })
        }
    }
}

/// Samples `u⁰` at the interior LGL nodes of order `n` mapped to `domain`.
pub fn seed_to_nodal(seed: &SeedGuess, n: usize, domain: &RectDomain) -> Result<DMatrix<f64>> {
    let ops = TensorOperators::new(n, *domain)?;
    Ok(seed_to_nodal_on(seed, &ops))
}

/// Like [`seed_to_nodal`] on an existing operator set.
pub fn seed_to_nodal_on(seed: &SeedGuess, ops: &TensorOperators) -> DMatrix<f64> {
    let pairs = seed.pairs(&ops.domain);
    let (xs, ys) = ops.interior_coordinates();
    DMatrix::from_fn(xs.len(), ys.len(), |j, k| {
        pairs
            .iter()
            .zip(&seed.coefficients)
            .map(|(p, a)| a * p.value_unchecked(&ops.domain, xs[j], ys[k]))
            .sum()
    })
}
