//! Browser bindings: eigenfunctions, cubic seeds solved by Newton, and a
//! sine-Gordon solution search, all sampled on a uniform grid for drawing.

use sgsem_core::analysis::{classify, distinct_up_to_sign, Problem, SignClass};
use sgsem_core::eigen::{eigen_group, laplace_eigenpairs, EigenPair, Normalization, RectDomain};
use sgsem_core::newton::NewtonConfig;
use sgsem_core::seeds::{enumerate_cubic_seeds, random_newton_search, RandomSearch, SeedGuess};
use sgsem_core::{DiscreteSolution, MassQuadrature, Nonlinearity};
use wasm_bindgen::prelude::*;

const MAX_ORDER: usize = 40;
const MAX_RES: usize = 256;

/// A field sampled on a `res × res` grid over the closed square, x fastest.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Field {
    label: String,
    res: usize,
    values: Vec<f64>,
    residual: f64,
    iters: usize,
    sign: String,
    peaks: usize,
}

#[wasm_bindgen]
impl Field {
    #[wasm_bindgen(getter)]
    pub fn label(&self) -> String {
        self.label.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn res(&self) -> usize {
        self.res
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    #[wasm_bindgen(getter)]
    pub fn iters(&self) -> usize {
        self.iters
    }

    #[wasm_bindgen(getter)]
    pub fn sign(&self) -> String {
        self.sign.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn peaks(&self) -> usize {
        self.peaks
    }

    #[wasm_bindgen(getter)]
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Solutions found for one parameter value.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    fields: Vec<Field>,
    seeds: usize,
    failed: usize,
}

#[wasm_bindgen]
impl Catalog {
    #[wasm_bindgen(getter)]
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    #[wasm_bindgen(getter)]
    pub fn seeds(&self) -> usize {
        self.seeds
    }

    #[wasm_bindgen(getter)]
    pub fn failed(&self) -> usize {
        self.failed
    }

    pub fn get(&self, i: usize) -> Option<Field> {
        self.fields.get(i).cloned()
    }
}

fn check_sizes(order: usize, res: usize) -> Result<(), String> {
    if !(2..=MAX_ORDER).contains(&order) {
        return Err(format!("order must be in 2..={MAX_ORDER}"));
    }
    if !(2..=MAX_RES).contains(&res) {
        return Err(format!("resolution must be in 2..={MAX_RES}"));
    }
    Ok(())
}

fn sign_name(s: SignClass) -> &'static str {
    match s {
        SignClass::Positive => "positive",
        SignClass::Negative => "negative",
        SignClass::SignChanging => "sign-changing",
        SignClass::Zero => "zero",
    }
}

fn to_field(sol: &DiscreteSolution, label: &str, res: usize) -> Result<Field, String> {
    let class = classify(sol);
    let samples = sol.sample_uniform(res).map_err(|e| e.to_string())?;
    Ok(Field {
        label: label.to_string(),
        res,
        values: samples.into_iter().map(|(_, _, u)| u).collect(),
        residual: sol.residual_norm,
        iters: sol.newton_iters,
        sign: sign_name(class.sign).to_string(),
        peaks: class.num_peaks,
    })
}

fn problem(f: Nonlinearity) -> Problem {
    Problem {
        domain: RectDomain::pi_square(),
        nonlinearity: f,
        newton: NewtonConfig::default(),
        mass: MassQuadrature::Exact,
    }
}

/// Unit-amplitude eigenfunction `sin(mx) sin(ny)` on `(0, π)²`.
pub fn eigenfunction_field(m: usize, n: usize, res: usize) -> Result<Field, String> {
    if m == 0 || n == 0 {
        return Err("indices start at 1".into());
    }
    check_sizes(2, res)?;
    let domain = RectDomain::pi_square();
    let pair = EigenPair::new(&domain, m, n, Normalization::UnitAmplitude);
    let h = std::f64::consts::PI / (res - 1) as f64;
    let mut values = Vec::with_capacity(res * res);
    for k in 0..res {
        for j in 0..res {
            values.push(pair.value_unchecked(&domain, j as f64 * h, k as f64 * h));
        }
    }
    Ok(Field {
        label: format!("λ = {}", pair.lambda),
        res,
        values,
        residual: 0.0,
        iters: 0,
        sign: if m == 1 && n == 1 { "positive" } else { "sign-changing" }.into(),
        peaks: m * n,
    })
}

/// Distinct eigenvalues among the first `count` eigenpairs of the square.
pub fn eigenvalues(count: usize) -> Result<Vec<f64>, String> {
    let pairs =
        laplace_eigenpairs(&RectDomain::pi_square(), count, Normalization::UnitAmplitude).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = Vec::new();
    for p in pairs {
        if out.last().is_none_or(|&l| (p.lambda - l).abs() > 1e-9) {
            out.push(p.lambda);
        }
    }
    Ok(out)
}

fn cubic_seeds(lambda: f64) -> Result<Vec<SeedGuess>, String> {
    let domain = RectDomain::pi_square();
    let group = eigen_group(&domain, lambda, Normalization::UnitAmplitude)
        .ok_or_else(|| format!("{lambda} is not an eigenvalue of the square"))?;
    enumerate_cubic_seeds(&group, &Nonlinearity::Cubic, &domain).map_err(|e| e.to_string())
}

/// Labels of the seeds `enumerate_cubic_seeds` gives for `λ`.
pub fn cubic_seed_labels(lambda: f64) -> Result<Vec<String>, String> {
    Ok(cubic_seeds(lambda)?.into_iter().map(|s| s.label).collect())
}

/// Newton solve of `-Δu = u³` from seed `index` of the `λ` group.
pub fn solve_cubic(lambda: f64, index: usize, order: usize, res: usize) -> Result<Field, String> {
    check_sizes(order, res)?;
    let seeds = cubic_seeds(lambda)?;
    let seed = seeds
        .get(index)
        .ok_or_else(|| format!("seed {index} out of range ({} seeds)", seeds.len()))?;
    let sol = problem(Nonlinearity::Cubic)
        .solve_from_seed(seed, order)
        .map_err(|e| e.to_string())?;
    to_field(&sol, &seed.label, res)
}

/// Random search for `-Δu = κ sin u` on the first `basis_size` eigenfunctions,
/// each root solved and merged up to sign.
pub fn sine_gordon_catalog(
    kappa: f64,
    basis_size: usize,
    trials: usize,
    rng_seed: u64,
    order: usize,
    res: usize,
) -> Result<Catalog, String> {
    check_sizes(order, res)?;
    if basis_size == 0 || basis_size > 12 {
        return Err("basis size must be in 1..=12".into());
    }
    let f = Nonlinearity::SineGordon { kappa };
    f.validate(rng_seed).map_err(|e| e.to_string())?;
    let domain = RectDomain::pi_square();
    let basis = laplace_eigenpairs(&domain, basis_size, Normalization::Orthonormal).map_err(|e| e.to_string())?;
    let search = RandomSearch {
        trials,
        rng_seed,
        ..RandomSearch::default()
    };
    let seeds = random_newton_search(&basis, &domain, &f, &search, None).map_err(|e| e.to_string())?;
    let p = problem(f);
    let mut solved = Vec::new();
    let mut failed = 0;
    for s in &seeds {
        match p.solve_from_seed(s, order) {
            Ok(sol) if classify(&sol).sign != SignClass::Zero => solved.push((s.label.clone(), sol)),
            Ok(_) => {}
            Err(_) => failed += 1,
        }
    }
    let fields: Vec<_> = solved.iter().map(|(_, s)| &s.u).collect();
    let keep = distinct_up_to_sign(&fields, 1e-6);
    let fields = keep
        .into_iter()
        .map(|i| to_field(&solved[i].1, &solved[i].0, res))
        .collect::<Result<_, _>>()?;
    Ok(Catalog {
        fields,
        seeds: seeds.len(),
        failed,
    })
}

#[wasm_bindgen(js_name = eigenfunctionField)]
pub fn eigenfunction_field_js(m: usize, n: usize, res: usize) -> Result<Field, JsError> {
    eigenfunction_field(m, n, res).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = eigenvalues)]
pub fn eigenvalues_js(count: usize) -> Result<Vec<f64>, JsError> {
    eigenvalues(count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = cubicSeedLabels)]
pub fn cubic_seed_labels_js(lambda: f64) -> Result<Vec<String>, JsError> {
    cubic_seed_labels(lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = solveCubic)]
pub fn solve_cubic_js(lambda: f64, index: usize, order: usize, res: usize) -> Result<Field, JsError> {
    solve_cubic(lambda, index, order, res).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sineGordonCatalog)]
pub fn sine_gordon_catalog_js(
    kappa: f64,
    basis_size: usize,
    trials: usize,
    rng_seed: u64,
    order: usize,
    res: usize,
) -> Result<Catalog, JsError> {
    sine_gordon_catalog(kappa, basis_size, trials, rng_seed, order, res).map_err(|e| JsError::new(&e))
}
