//! The interpolated-coefficient Legendre-Galerkin system on a rectangle.
//!
//! With `U` the interior nodal values (rows: x index, columns: y index) the
//! discrete problem is
//!
//! ```text
//!   R(U) = Ax U By + Bx U Ay - Bx F(U) By = 0,     F(U)_jk = f(U_jk)
//! ```
//!
//! where `A*`, `B*` are the 1D stiffness and mass matrices scaled to the
//! physical side lengths. Vectorizing column-major (`U11, U21, ...`) gives
//! `K u - M f(u) = 0` with `K = By⊗Ax + Ay⊗Bx`, `M = By⊗Bx` and Jacobian
//! `K - M diag(f'(u))`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::RectDomain;
use crate::error::{Error, Result};
use crate::lgl::{Lgl1D, SpectralOperators1D};
use crate::nonlinearity::Nonlinearity;

/// Largest order for which [`jacobian_dense`] will materialize the Kronecker form.
pub const DENSE_JACOBIAN_MAX_N: usize = 128;

/// How the mass matrix `B_jk = ∫ h_j h_k` is integrated.
///
/// `Exact` uses a Gauss rule exact for the degree-2N integrand. `Lgl` uses the
/// LGL rule itself, which makes `B` diagonal (`diag(ω_1..ω_{N-1})`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassQuadrature {
    #[default]
    Exact,
    Lgl,
}

impl MassQuadrature {
    pub fn name(self) -> &'static str {
        match self {
            MassQuadrature::Exact => "exact",
            MassQuadrature::Lgl => "lgl",
        }
    }
}

/// Operators of one direction, scaled to a physical interval of length `h`.
#[derive(Debug, Clone)]
pub struct DirectionOperators {
    /// Reference-interval nodes, weights and matrices.
    pub reference: SpectralOperators1D,
    pub length: f64,
    /// `(2/h) A_ref`.
    pub stiffness: DMatrix<f64>,
    /// `(h/2) B_ref`.
    pub mass: DMatrix<f64>,
    /// Generalized eigenvectors `A z = λ B z`, `Zᵀ B Z = I`.
    pub eigvecs: DMatrix<f64>,
    pub eigvals: DVector<f64>,
}

impl DirectionOperators {
    pub fn new(order: usize, length: f64) -> Result<Self> {
        Self::with_mass(order, length, MassQuadrature::Exact)
    }

    pub fn with_mass(order: usize, length: f64, quadrature: MassQuadrature) -> Result<Self> {
        let reference = SpectralOperators1D::with_order(order)?;
        let stiffness = &reference.stiffness * (2.0 / length);
        let mass = match quadrature {
            MassQuadrature::Exact => &reference.mass * (length / 2.0),
            MassQuadrature::Lgl => {
                let w = &reference.lgl.weights;
                DMatrix::from_fn(
                    order - 1,
                    order - 1,
                    |j, k| if j == k { w[j + 1] * length / 2.0 } else { 0.0 },
                )
            }
        };
        let (eigvecs, eigvals) = generalized_symmetric_eigen(&stiffness, &mass)?;
        Ok(Self {
            reference,
            length,
            stiffness,
            mass,
            eigvecs,
            eigvals,
        })
    }

    pub fn order(&self) -> usize {
        self.reference.order()
    }

    pub fn lgl(&self) -> &Lgl1D {
        &self.reference.lgl
    }
}

/// Solves `A z = λ B z` for symmetric `A` and SPD `B` via `B = L Lᵀ`.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let mut c = &l_inv * a * l_inv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let z = l_inv.transpose() * eig.eigenvectors;
    Ok((z, eig.eigenvalues))
}

/// Tensor-product operators on a rectangle.
#[derive(Debug, Clone)]
pub struct TensorOperators {
    pub x: DirectionOperators,
    pub y: DirectionOperators,
    pub domain: RectDomain,
    pub mass_quadrature: MassQuadrature,
}

impl TensorOperators {
    /// Equal order `n` in both directions.
    pub fn new(n: usize, domain: RectDomain) -> Result<Self> {
        Self::anisotropic(n, n, domain)
    }

    pub fn with_mass(n: usize, domain: RectDomain, mass: MassQuadrature) -> Result<Self> {
        Self::anisotropic_with_mass(n, n, domain, mass)
    }

    pub fn anisotropic(nx: usize, ny: usize, domain: RectDomain) -> Result<Self> {
        Self::anisotropic_with_mass(nx, ny, domain, MassQuadrature::Exact)
    }

    pub fn anisotropic_with_mass(nx: usize, ny: usize, domain: RectDomain, mass: MassQuadrature) -> Result<Self> {
        domain.validate()?;
        let x = DirectionOperators::with_mass(nx, domain.width(), mass)?;
        let y = if ny == nx && domain.height() == domain.width() {
            x.clone()
        } else {
            DirectionOperators::with_mass(ny, domain.height(), mass)?
        };
        Ok(Self {
            x,
            y,
            domain,
            mass_quadrature: mass,
        })
    }

    /// Order in x (equal to the order in y unless built anisotropically).
    pub fn n(&self) -> usize {
        self.x.order()
    }

    /// Shape of the interior nodal matrix.
    pub fn interior_shape(&self) -> (usize, usize) {
        (self.x.order() - 1, self.y.order() - 1)
    }

    pub fn unknowns(&self) -> usize {
        let (r, c) = self.interior_shape();
        r * c
    }

    /// Physical coordinates of the interior nodes in x and y.
    pub fn interior_coordinates(&self) -> (Vec<f64>, Vec<f64>) {
        let xs = self
            .x
            .lgl()
            .interior_nodes()
            .iter()
            .map(|&t| self.domain.map_x(t))
            .collect();
        let ys = self
            .y
            .lgl()
            .interior_nodes()
            .iter()
            .map(|&t| self.domain.map_y(t))
            .collect();
        (xs, ys)
    }

    /// Physical coordinates of all nodes, boundary included.
    pub fn full_coordinates(&self) -> (Vec<f64>, Vec<f64>) {
        let xs = self.x.lgl().nodes.iter().map(|&t| self.domain.map_x(t)).collect();
        let ys = self.y.lgl().nodes.iter().map(|&t| self.domain.map_y(t)).collect();
        (xs, ys)
    }

    /// Samples `g` at the interior nodes.
    pub fn sample_interior<G: Fn(f64, f64) -> f64>(&self, g: G) -> DMatrix<f64> {
        let (xs, ys) = self.interior_coordinates();
        DMatrix::from_fn(xs.len(), ys.len(), |j, k| g(xs[j], ys[k]))
    }

    pub fn check_shape(&self, u: &DMatrix<f64>) -> Result<()> {
        let expected = self.interior_shape();
        if u.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: u.shape(),
            });
        }
        Ok(())
    }

    /// `Ax V By + Bx V Ay`, the discrete `-Δ` in weak form.
    pub fn apply_stiffness(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        &self.x.stiffness * v * &self.y.mass + &self.x.mass * v * &self.y.stiffness
    }

    /// `Bx V By`.
    pub fn apply_mass(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        &self.x.mass * v * &self.y.mass
    }

    pub fn residual(&self, u: &DMatrix<f64>, f: &Nonlinearity) -> Result<DMatrix<f64>> {
        residual(u, self, f)
    }
}

/// `R(U) = Ax U By + Bx U Ay - Bx F(U) By`.
pub fn residual(u: &DMatrix<f64>, ops: &TensorOperators, f: &Nonlinearity) -> Result<DMatrix<f64>> {
    ops.check_shape(u)?;
    let fu = u.map(|v| f.f(v));
    Ok(ops.apply_stiffness(u) - ops.apply_mass(&fu))
}

/// Matrix-free Jacobian action `Ax V By + Bx V Ay - Bx (f'(U)∘V) By`.
pub fn jacobian_apply(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    ops: &TensorOperators,
    f: &Nonlinearity,
) -> Result<DMatrix<f64>> {
    ops.check_shape(u)?;
    ops.check_shape(v)?;
    let dv = u.zip_map(v, |uu, vv| f.f_prime(uu) * vv);
    Ok(ops.apply_stiffness(v) - ops.apply_mass(&dv))
}

/// `J = By⊗Ax + Ay⊗Bx - (By⊗Bx) diag(f'(u))` acting on column-major `vec(U)`.
pub fn jacobian_dense(u: &DMatrix<f64>, ops: &TensorOperators, f: &Nonlinearity) -> Result<DMatrix<f64>> {
    ops.check_shape(u)?;
    let n = ops.x.order().max(ops.y.order());
    if n > DENSE_JACOBIAN_MAX_N {
        return Err(Error::TooLarge(n, DENSE_JACOBIAN_MAX_N));
    }
    let (x, y) = (&ops.x, &ops.y);
    let k = y.mass.kronecker(&x.stiffness) + y.stiffness.kronecker(&x.mass);
    let mut m = y.mass.kronecker(&x.mass);
    for (col, &uv) in u.iter().enumerate() {
        let d = f.f_prime(uv);
        m.column_mut(col).scale_mut(d);
    }
    Ok(k - m)
}

/// Solves `Ax X By + Bx X Ay = RHS` by diagonalizing each direction.
pub fn fast_diagonalization_solve(ops: &TensorOperators, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ops.check_shape(rhs)?;
    let (zx, zy) = (&ops.x.eigvecs, &ops.y.eigvecs);
    let mut g = zx.transpose() * rhs * zy;
    for j in 0..g.nrows() {
        for k in 0..g.ncols() {
            g[(j, k)] /= ops.x.eigvals[j] + ops.y.eigvals[k];
        }
    }
    Ok(zx * g * zy.transpose())
}

/// Euclidean norm of `vec(R)`.
pub fn residual_norm(r: &DMatrix<f64>) -> f64 {
    r.norm()
}

/// A converged (or at least evaluated) discrete solution with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    /// Interior nodal values, `(N-1) × (N-1)`; boundary values are zero.
    pub u: DMatrix<f64>,
    pub n: usize,
    pub domain: RectDomain,
    pub nonlinearity: Nonlinearity,
    pub seed_label: String,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub mass: MassQuadrature,
}

impl DiscreteSolution {
    /// Nodal values on the full `(N+1)²` grid with zero boundary rows/columns.
    pub fn full_nodal(&self) -> DMatrix<f64> {
        let (r, c) = self.u.shape();
        let mut full = DMatrix::zeros(r + 2, c + 2);
        full.view_mut((1, 1), (r, c)).copy_from(&self.u);
        full
    }

    pub fn lgl(&self) -> Result<Lgl1D> {
        Lgl1D::new(self.n)
    }

    /// Evaluates `u_N` at physical points.
    pub fn evaluate(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let lgl = self.lgl()?;
        let full = self.full_nodal();
        points
            .iter()
            .map(|&(x, y)| {
                self.domain.check(x, y)?;
                lgl.evaluate_2d(&full, self.domain.to_reference_x(x), self.domain.to_reference_y(y))
            })
            .collect()
    }

    /// Values on a uniform `res × res` grid over the closed domain, as
    /// `(x, y, u)` triples with x varying fastest.
    pub fn sample_uniform(&self, res: usize) -> Result<Vec<(f64, f64, f64)>> {
        if res < 2 {
            return Err(Error::InvalidArgument("resolution must be >= 2".into()));
        }
        let lgl = self.lgl()?;
        let t: Vec<f64> = (0..res).map(|i| -1.0 + 2.0 * i as f64 / (res - 1) as f64).collect();
        let p = lgl.interpolation_matrix(&t)?;
        let vals = &p * self.full_nodal() * p.transpose();
        let mut out = Vec::with_capacity(res * res);
        for (k, &ty) in t.iter().enumerate() {
            for (j, &tx) in t.iter().enumerate() {
                out.push((self.domain.map_x(tx), self.domain.map_y(ty), vals[(j, k)]));
            }
        }
        Ok(out)
    }

    pub fn to_record(&self) -> SolutionRecord {
        let (rows, cols) = self.u.shape();
        let mut values = Vec::with_capacity(rows * cols);
        for j in 0..rows {
            for k in 0..cols {
                values.push(self.u[(j, k)]);
            }
        }
        SolutionRecord {
            n: self.n,
            domain: self.domain,
            nonlinearity: self.nonlinearity,
            seed_label: self.seed_label.clone(),
            residual_norm: self.residual_norm,
            newton_iters: self.newton_iters,
            mass: self.mass,
            rows,
            cols,
            values,
        }
    }

    pub fn from_record(rec: SolutionRecord) -> Result<Self> {
        if rec.values.len() != rec.rows * rec.cols || rec.rows != rec.n.saturating_sub(1) || rec.cols != rec.rows {
            return Err(Error::ShapeMismatch {
                expected: (rec.n.saturating_sub(1), rec.n.saturating_sub(1)),
                got: (rec.rows, rec.cols),
            });
        }
        rec.domain.validate()?;
        Ok(Self {
            u: DMatrix::from_row_slice(rec.rows, rec.cols, &rec.values),
            n: rec.n,
            domain: rec.domain,
            nonlinearity: rec.nonlinearity,
            seed_label: rec.seed_label,
            residual_norm: rec.residual_norm,
            newton_iters: rec.newton_iters,
            mass: rec.mass,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &self.to_record())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let rec: SolutionRecord = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        Self::from_record(rec)
    }

    /// `x,y,u` on the full LGL nodal grid (boundary included).
    pub fn write_nodal_csv(&self, path: &Path) -> Result<()> {
        let lgl = self.lgl()?;
        let full = self.full_nodal();
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,y,u")?;
        for (k, &ty) in lgl.nodes.iter().enumerate() {
            for (j, &tx) in lgl.nodes.iter().enumerate() {
                writeln!(
                    w,
                    "{:?},{:?},{:?}",
                    self.domain.map_x(tx),
                    self.domain.map_y(ty),
                    full[(j, k)]
                )?;
            }
        }
        Ok(())
    }
}

/// JSON form of a [`DiscreteSolution`]; `values` are row-major (`x` index slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub n: usize,
    pub domain: RectDomain,
    pub nonlinearity: Nonlinearity,
    pub seed_label: String,
    pub residual_norm: f64,
    pub newton_iters: usize,
    #[serde(default)]
    pub mass: MassQuadrature,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}
