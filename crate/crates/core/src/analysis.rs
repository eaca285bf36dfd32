//! Error norms, convergence studies, classification and field export.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discretization::{DiscreteSolution, MassQuadrature, TensorOperators};
use crate::eigen::RectDomain;
use crate::error::{Error, Result};
use crate::lgl::Lgl1D;
use crate::newton::{newton_solve, NewtonConfig};
use crate::nonlinearity::Nonlinearity;
use crate::seeds::{seed_to_nodal_on, SeedGuess};

/// Errors below this are at the rounding floor and not compared digit by digit.
pub const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub seed_label: String,
    pub reference_n: usize,
    /// Why the solve at this `n` failed; errors are NaN when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ConvergenceRecord {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }

    pub fn at_rounding_floor(&self) -> bool {
        self.l2_error < ROUNDING_FLOOR
    }
}

/// `(‖u_ref - u_N‖_{L²}, ‖u_ref - u_N‖_{H¹})` on the reference LGL grid.
///
/// `sol` is interpolated onto the reference nodes; the H¹ part differentiates
/// the difference with the reference differentiation matrix.
pub fn error_norms(sol: &DiscreteSolution, reference: &DiscreteSolution) -> Result<(f64, f64)> {
    if sol.domain != reference.domain {
        return Err(Error::InvalidArgument("solutions live on different domains".into()));
    }
    if sol.nonlinearity != reference.nonlinearity || sol.mass != reference.mass {
        return Err(Error::InvalidArgument("solutions solve different problems".into()));
    }
    let fine = Lgl1D::new(reference.n)?;
    let coarse = Lgl1D::new(sol.n)?;
    let p = coarse.interpolation_matrix(&fine.nodes)?;
    let diff = reference.full_nodal() - &p * sol.full_nodal() * p.transpose();
    Ok(grid_norms(&diff, &fine, &reference.domain))
}

/// L² and full H¹ norms of the tensor interpolant with nodal values `v`.
pub fn grid_norms(v: &DMatrix<f64>, lgl: &Lgl1D, domain: &RectDomain) -> (f64, f64) {
    let (hx, hy) = (domain.width(), domain.height());
    let d = lgl.differentiation_matrix();
    let vx = &d * v * (2.0 / hx);
    let vy = v * d.transpose() * (2.0 / hy);
    let jac = 0.25 * hx * hy;
    let w = &lgl.weights;
    let (mut l2, mut semi) = (0.0, 0.0);
    for k in 0..v.ncols() {
        for j in 0..v.nrows() {
            let ww = w[j] * w[k] * jac;
            l2 += ww * v[(j, k)] * v[(j, k)];
            semi += ww * (vx[(j, k)] * vx[(j, k)] + vy[(j, k)] * vy[(j, k)]);
        }
    }
    (l2.sqrt(), (l2 + semi).sqrt())
}

/// Everything needed to solve one problem from one seed.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: RectDomain,
    pub nonlinearity: Nonlinearity,
    pub newton: NewtonConfig,
    pub mass: MassQuadrature,
}

impl Problem {
    /// Samples `seed` at order `n` and runs Newton.
    pub fn solve_from_seed(&self, seed: &SeedGuess, n: usize) -> Result<DiscreteSolution> {
        let ops = TensorOperators::with_mass(n, self.domain, self.mass)?;
        let u0 = seed_to_nodal_on(seed, &ops);
        let mut sol = newton_solve(&u0, &ops, &self.nonlinearity, &self.newton)?.solution;
        sol.seed_label = seed.label.clone();
        Ok(sol)
    }

    /// Interpolates `start` to order `n` and runs Newton from there.
    pub fn solve_from_solution(&self, start: &DiscreteSolution, n: usize) -> Result<DiscreteSolution> {
        let ops = TensorOperators::with_mass(n, self.domain, self.mass)?;
        let coarse = Lgl1D::new(start.n)?;
        let fine = Lgl1D::new(n)?;
        let p = coarse.interpolation_matrix(&fine.nodes)?;
        let full = &p * start.full_nodal() * p.transpose();
        let u0 = full.view((1, 1), (n - 1, n - 1)).into_owned();
        let mut sol = newton_solve(&u0, &ops, &self.nonlinearity, &self.newton)?.solution;
        sol.seed_label = start.seed_label.clone();
        Ok(sol)
    }

    /// Reference solution at `reference_n`, warm-started from the converged
    /// solution at `warm_start_n`.
    ///
    /// The interpolated warm start usually meets the Newton tolerance already,
    /// so at least [`REFERENCE_POLISH_STEPS`] steps are forced at `reference_n`.
    pub fn reference_solution(
        &self,
        seed: &SeedGuess,
        reference_n: usize,
        warm_start_n: usize,
    ) -> Result<DiscreteSolution> {
        let warm = self.solve_from_seed(seed, warm_start_n.min(reference_n))?;
        let polish = Problem {
            newton: NewtonConfig {
                min_iters: REFERENCE_POLISH_STEPS.max(self.newton.min_iters),
                max_iters: self.newton.max_iters.max(REFERENCE_POLISH_STEPS),
                ..self.newton.clone()
            },
            ..self.clone()
        };
        polish.solve_from_solution(&warm, reference_n)
    }
}

/// Newton steps always taken on the reference grid.
pub const REFERENCE_POLISH_STEPS: usize = 2;

/// Order of the warm start used for reference solutions.
pub const REFERENCE_WARM_START_N: usize = 48;

/// Solves at every `n` in `n_list` from the same seed and measures the error
/// against a reference solve at `reference_n`.
pub fn convergence_study(
    seed: &SeedGuess,
    n_list: &[usize],
    reference_n: usize,
    problem: &Problem,
) -> Result<Vec<ConvergenceRecord>> {
    check_n_list(n_list, reference_n)?;
    let reference = problem.reference_solution(seed, reference_n, REFERENCE_WARM_START_N)?;
    convergence_against(seed, n_list, &reference, problem)
}

fn check_n_list(n_list: &[usize], reference_n: usize) -> Result<()> {
    match n_list.iter().max() {
        None => Err(Error::InvalidArgument("empty N list".into())),
        Some(&max) if max >= reference_n => Err(Error::InvalidArgument(format!(
            "reference N = {reference_n} must exceed every N in the study (max {max})"
        ))),
        Some(_) if n_list.iter().any(|&n| n < 2) => Err(Error::InvalidArgument("every N must be >= 2".into())),
        Some(_) => Ok(()),
    }
}

/// [`convergence_study`] against a precomputed reference.
pub fn convergence_against(
    seed: &SeedGuess,
    n_list: &[usize],
    reference: &DiscreteSolution,
    problem: &Problem,
) -> Result<Vec<ConvergenceRecord>> {
    check_n_list(n_list, reference.n)?;
    let one = |n: usize| -> ConvergenceRecord {
        let outcome = problem
            .solve_from_seed(seed, n)
            .and_then(|sol| error_norms(&sol, reference));
        match outcome {
            Ok((l2, h1)) => ConvergenceRecord {
                n,
                l2_error: l2,
                h1_error: h1,
                seed_label: seed.label.clone(),
                reference_n: reference.n,
                failure: None,
            },
            Err(e) => ConvergenceRecord {
                n,
                l2_error: f64::NAN,
                h1_error: f64::NAN,
                seed_label: seed.label.clone(),
                reference_n: reference.n,
                failure: Some(e.to_string()),
            },
        }
    };
    #[cfg(feature = "parallel")]
    let records = {
        use rayon::prelude::*;
        n_list.par_iter().map(|&n| one(n)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records = n_list.iter().map(|&n| one(n)).collect();
    Ok(records)
}

/// Least-squares slope of `log10(l2_error)` against `N` over converged records.
pub fn log10_slope(records: &[ConvergenceRecord]) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.converged() && r.l2_error > 0.0)
        .map(|r| (r.n as f64, r.l2_error.log10()))
        .collect();
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}

pub fn write_convergence_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "N,l2,h1")?;
    for r in records {
        writeln!(w, "{},{:e},{:e}", r.n, r.l2_error, r.h1_error)?;
    }
    Ok(())
}

/// Plain-text table with one column per `N` and rows for the two norms.
pub fn format_convergence_table(records: &[ConvergenceRecord]) -> String {
    let mut s = String::new();
    let label = records.first().map(|r| r.seed_label.as_str()).unwrap_or("");
    let reference = records.first().map(|r| r.reference_n).unwrap_or(0);
    let _ = writeln!(s, "errors of {label} against N = {reference}");
    let _ = write!(s, "{:<14}", "N");
    for r in records {
        let _ = write!(s, "{:>12}", r.n);
    }
    s.push('\n');
    for (name, get) in [
        (
            "||u-u_N||_L2",
            (|r: &ConvergenceRecord| r.l2_error) as fn(&ConvergenceRecord) -> f64,
        ),
        ("||u-u_N||_H1", |r: &ConvergenceRecord| r.h1_error),
    ] {
        let _ = write!(s, "{name:<14}");
        for r in records {
            let v = get(r);
            if v.is_nan() {
                let _ = write!(s, "{:>12}", "failed");
            } else {
                let _ = write!(s, "{:>12}", format_sci(v));
            }
        }
        s.push('\n');
    }
    s
}

/// `1.2345E-05` style formatting.
pub fn format_sci(v: f64) -> String {
    let s = format!("{v:.4E}");
    match s.split_once('E') {
        Some((mant, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            format!("{mant}E{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
        }
        None => s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignClass {
    Positive,
    Negative,
    SignChanging,
    /// Identically zero to the classification tolerance.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionClass {
    pub sign: SignClass,
    pub max_abs: f64,
    pub num_peaks: usize,
}

const SIGN_TOL: f64 = 1e-12;

/// Sign structure and number of local maxima of `|u|` on the nodal grid.
///
/// A peak is an 8-connected cluster of nodes whose `|u|` is not exceeded by any
/// neighbour (up to rounding), so symmetric plateaus on odd grids count once.
pub fn classify(sol: &DiscreteSolution) -> SolutionClass {
    classify_nodal(&sol.u)
}

pub fn classify_nodal(u: &DMatrix<f64>) -> SolutionClass {
    let max_abs = u.amax();
    if max_abs <= SIGN_TOL {
        return SolutionClass {
            sign: SignClass::Zero,
            max_abs,
            num_peaks: 0,
        };
    }
    let min = u.min();
    let max = u.max();
    let sign = if min > -SIGN_TOL {
        SignClass::Positive
    } else if max < SIGN_TOL {
        SignClass::Negative
    } else {
        SignClass::SignChanging
    };
    SolutionClass {
        sign,
        max_abs,
        num_peaks: count_peaks(u, max_abs),
    }
}

fn count_peaks(u: &DMatrix<f64>, max_abs: f64) -> usize {
    let (r, c) = u.shape();
    let tie = 1e-10 * max_abs;
    let at = |j: isize, k: isize| -> f64 {
        if j < 0 || k < 0 || j >= r as isize || k >= c as isize {
            0.0
        } else {
            u[(j as usize, k as usize)].abs()
        }
    };
    let mut is_peak = vec![false; r * c];
    for k in 0..c as isize {
        for j in 0..r as isize {
            let v = at(j, k);
            if v <= SIGN_TOL {
                continue;
            }
            let dominated = (-1..=1)
                .flat_map(|dj| (-1..=1).map(move |dk| (dj, dk)))
                .filter(|&d| d != (0, 0))
                .any(|(dj, dk)| at(j + dj, k + dk) > v + tie);
            if !dominated {
                is_peak[j as usize + r * k as usize] = true;
            }
        }
    }
    // Merge adjacent candidates.
    let mut seen = vec![false; r * c];
    let mut peaks = 0;
    for start in 0..r * c {
        if !is_peak[start] || seen[start] {
            continue;
        }
        peaks += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            let (j, k) = ((idx % r) as isize, (idx / r) as isize);
            for dj in -1..=1 {
                for dk in -1..=1 {
                    let (nj, nk) = (j + dj, k + dk);
                    if nj < 0 || nk < 0 || nj >= r as isize || nk >= c as isize {
                        continue;
                    }
                    let nidx = nj as usize + r * nk as usize;
                    if is_peak[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
    }
    peaks
}

/// Flips `u` so that its first entry (column-major) above `1e-3·max|u|` is positive.
pub fn canonical_field(u: &DMatrix<f64>) -> DMatrix<f64> {
    let cut = 1e-3 * u.amax();
    match u.iter().find(|v| v.abs() > cut) {
        Some(&v) if v < 0.0 => -u,
        _ => u.clone(),
    }
}

/// Indices of the first solution of each `±` class, using nodal l∞ distance
/// `< tol` after sign canonicalization.
pub fn distinct_up_to_sign(solutions: &[&DMatrix<f64>], tol: f64) -> Vec<usize> {
    let canon: Vec<DMatrix<f64>> = solutions.iter().map(|u| canonical_field(u)).collect();
    let mut keep: Vec<usize> = Vec::new();
    for (i, c) in canon.iter().enumerate() {
        let dup = keep
            .iter()
            .any(|&k| canon[k].shape() == c.shape() && (&canon[k] - c).amax() < tol);
        if !dup {
            keep.push(i);
        }
    }
    keep
}

/// Writes `u` on a uniform `resolution²` grid as CSV with `#` metadata lines.
pub fn export_field(sol: &DiscreteSolution, resolution: usize, path: &Path) -> Result<()> {
    let samples = sol.sample_uniform(resolution)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# N={}", sol.n)?;
    writeln!(w, "# seed_label={}", sol.seed_label)?;
    writeln!(w, "# residual_norm={:e}", sol.residual_norm)?;
    writeln!(w, "# nonlinearity={}", sol.nonlinearity)?;
    writeln!(w, "x,y,u")?;
    for (x, y, u) in samples {
        writeln!(w, "{x:?},{y:?},{u:?}")?;
    }
    w.flush()?;
    Ok(())
}

/// Field file contents: metadata `key=value` pairs and `(x, y, u)` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<(f64, f64, f64)>,
}

pub fn read_field_csv(path: &Path) -> Result<FieldFile> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut metadata = Vec::new();
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(meta) = line.strip_prefix("# ") {
            if let Some((k, v)) = meta.split_once('=') {
                metadata.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.starts_with('x') || line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("bad field row `{line}`: {e}")))?;
        if vals.len() != 3 {
            return Err(Error::InvalidArgument(format!("bad field row `{line}`")));
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    Ok(FieldFile { metadata, rows })
}
