//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgsem_core::analysis::{
    classify, convergence_against, log10_slope, ConvergenceRecord, Problem, SignClass, REFERENCE_WARM_START_N,
};
use sgsem_core::discretization::{fast_diagonalization_solve, jacobian_apply, jacobian_dense, residual};
use sgsem_core::eigen::{eigen_group, laplace_eigenpairs, Normalization, RectDomain};
use sgsem_core::lgl::{Lgl1D, SpectralOperators1D};
use sgsem_core::newton::{newton_solve, NewtonConfig};
use sgsem_core::quadrature::legendre;
use sgsem_core::seeds::{enumerate_cubic_seeds, random_newton_search, seed_to_nodal_on, RandomSearch, SeedGuess};
use sgsem_core::{MassQuadrature, Nonlinearity, TensorOperators};

type Outcome = (bool, String);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn cubic_seed(lambda: f64, label: &str) -> SeedGuess {
    let d = RectDomain::pi_square();
    let g = eigen_group(&d, lambda, Normalization::UnitAmplitude).expect("eigenvalue");
    enumerate_cubic_seeds(&g, &Nonlinearity::Cubic, &d)
        .expect("seeds")
        .into_iter()
        .find(|s| s.label == label)
        .expect("label")
}

/// Error studies use the lumped LGL mass matrix; the expected L² values were
/// produced with it.
fn lumped_mass_problem() -> Problem {
    Problem {
        domain: RectDomain::pi_square(),
        nonlinearity: Nonlinearity::Cubic,
        newton: NewtonConfig::default(),
        mass: MassQuadrature::Lgl,
    }
}

fn study(lambda: f64, label: &str, ns: &[usize]) -> Vec<ConvergenceRecord> {
    let p = lumped_mass_problem();
    let seed = cubic_seed(lambda, label);
    let reference = p
        .reference_solution(&seed, 100, REFERENCE_WARM_START_N)
        .expect("reference solve");
    convergence_against(&seed, ns, &reference, &p).expect("study")
}

fn u11_errors() -> &'static Vec<ConvergenceRecord> {
    static T: OnceLock<Vec<ConvergenceRecord>> = OnceLock::new();
    T.get_or_init(|| study(2.0, "u_{11}", &[8, 16, 24, 32, 40, 48]))
}

fn compare_row(
    records: &[ConvergenceRecord],
    expected: &[(usize, f64, f64)],
    what: &str,
    get: fn(&ConvergenceRecord) -> f64,
) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(n, want, tol) in expected {
        let got = records.iter().find(|r| r.n == n).map(get).unwrap_or(f64::NAN);
        let dev = rel(got, want);
        let pass = dev <= tol;
        ok &= pass;
        parts.push(format!(
            "{what}(N={n}) {got:.4e} vs {want:.4e} ({:.1}%{})",
            dev * 100.0,
            if pass { "" } else { " !" }
        ));
    }
    (ok, parts.join(", "))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let recs = u11_errors();
    let (l2_ok, l2) = compare_row(
        recs,
        &[
            (8, 4.2857e-2, 0.05),
            (16, 7.8021e-5, 0.05),
            (24, 3.6199e-7, 0.05),
            (32, 1.9073e-9, 0.10),
        ],
        "L2",
        |r| r.l2_error,
    );
    let (h1_ok, h1) = compare_row(recs, &[(16, 2.8138e-3, 0.10)], "H1", |r| r.h1_error);
    let floor_ok = recs.iter().filter(|r| r.n >= 40).all(|r| r.l2_error <= 1e-10);
    let elapsed = t.elapsed().as_secs_f64();
    (
        l2_ok && h1_ok && floor_ok && elapsed < 300.0,
        format!("{l2}; {h1}; N>=40 at floor: {floor_ok}; {elapsed:.0}s"),
    )
}

fn criterion_2() -> Outcome {
    let recs = study(5.0, "u_{12+21}", &[20, 30, 40]);
    let (l2_ok, l2) = compare_row(
        recs.as_slice(),
        &[(20, 9.2365e-4, 0.10), (30, 8.1137e-6, 0.10), (40, 6.9518e-8, 0.10)],
        "L2",
        |r| r.l2_error,
    );
    let (h1_ok, h1) = compare_row(recs.as_slice(), &[(20, 4.2015e-2, 0.10)], "H1", |r| r.h1_error);
    (l2_ok && h1_ok, format!("{l2}; {h1}"))
}

fn criterion_3() -> Outcome {
    let recs: Vec<ConvergenceRecord> = u11_errors().iter().filter(|r| r.n <= 32).cloned().collect();
    let slope = log10_slope(&recs);
    (
        slope <= -0.25,
        format!("slope of log10 L2 over N=8..32: {slope:.4} per unit N"),
    )
}

fn criterion_4() -> Outcome {
    let d = RectDomain::pi_square();
    let mut ok = true;
    let mut parts = Vec::new();
    for (lambda, want) in [(2.0, 2usize), (5.0, 8), (50.0, 26), (65.0, 80)] {
        let g = eigen_group(&d, lambda, Normalization::UnitAmplitude).expect("group");
        let seeds = enumerate_cubic_seeds(&g, &Nonlinearity::Cubic, &d).expect("seeds");
        let worst = seeds.iter().map(|s| s.residual_norm).fold(0.0, f64::max);
        ok &= seeds.len() == want && worst < 1e-9;
        parts.push(format!(
            "λ={lambda}: {} seeds (want {want}), max residual {worst:.1e}",
            seeds.len()
        ));
    }
    (ok, parts.join("; "))
}

/// Expected canonical roots per κ (coefficients of the first ten orthonormal
/// eigenfunctions). Rows are compared up to an overall sign.
fn sine_gordon_rows() -> Vec<(f64, usize, Vec<[f64; 10]>)> {
    vec![
        (
            4.0,
            2,
            vec![[4.2725, 0.0, 0.0, 0.0, 0.2644, 0.2644, 0.0, 0.0, 0.0, 0.0]],
        ),
        (
            6.0,
            10,
            vec![
                [5.2981, 0.0, 0.0, 0.0, 0.5264, 0.5264, 0.0, 0.0, 0.0, 0.0],
                [0.0, 2.201, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0812, 0.0, 0.0],
                [0.0, 0.0, 2.201, 0.0, 0.0, 0.0, 0.0812, 0.0, 0.0, 0.0],
                [0.0, 1.4358, 1.4358, 0.0, 0.0, 0.0, -0.0249, -0.0249, 0.033, 0.033],
                [0.0, -1.4358, 1.4358, 0.0, 0.0, 0.0, -0.0249, 0.0249, -0.033, 0.033],
            ],
        ),
        (
            9.0,
            12,
            vec![
                [6.0381, 0.0, 0.0, 0.0, 0.819, 0.819, 0.0, 0.0, 0.0, 0.0],
                [0.0, 3.9257, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4159, 0.0, 0.0],
                [0.0, 0.0, 3.9257, 0.0, 0.0, 0.0, 0.4159, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.7472, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 2.574, 2.574, 0.0, 0.0, 0.0, -0.1543, -0.1543, 0.2076, 0.2076],
                [0.0, -2.574, 2.574, 0.0, 0.0, 0.0, -0.1543, 0.1543, -0.2076, 0.2076],
            ],
        ),
        (
            11.0,
            20,
            vec![
                [6.3239, 0.0, 0.0, 0.0, 0.9659, 0.9659, 0.0, 0.0, 0.0, 0.0],
                [0.0, 4.5006, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5985, 0.0, 0.0],
                [0.0, 0.0, 4.5006, 0.0, 0.0, 0.0, 0.5985, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 2.8345, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 1.574, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 0.0, 1.574, 0.0, 0.0, 0.0, 0.0],
                [0.0, 2.9655, 2.9655, 0.0, 0.0, 0.0, -0.2369, -0.2369, 0.3262, 0.3262],
                [0.0, -2.9655, 2.9655, 0.0, 0.0, 0.0, -0.2369, 0.2369, -0.3262, 0.3262],
                [0.0, 0.0, 0.0, 0.0, 1.0306, -1.0306, 0.0, 0.0, 0.0, 0.0],
                [-0.0739, 0.0, 0.0, 0.0, 1.0039, 1.0039, 0.0, 0.0, 0.0, 0.0],
            ],
        ),
    ]
}

const SEARCH_RNG_SEED: u64 = 42;

fn sine_gordon_roots(kappa: f64, trials: usize) -> Vec<SeedGuess> {
    let d = RectDomain::pi_square();
    let basis = laplace_eigenpairs(&d, 10, Normalization::Orthonormal).expect("basis");
    let search = RandomSearch {
        trials,
        rng_seed: SEARCH_RNG_SEED,
        ..RandomSearch::default()
    };
    random_newton_search(&basis, &d, &Nonlinearity::SineGordon { kappa }, &search, None).expect("search")
}

fn kappa11_roots() -> &'static Vec<SeedGuess> {
    static R: OnceLock<Vec<SeedGuess>> = OnceLock::new();
    R.get_or_init(|| sine_gordon_roots(11.0, 2000))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let zero = sine_gordon_roots(1.0, 1000);
    ok &= zero.is_empty();
    parts.push(format!("κ=1: {} roots", zero.len()));
    for (kappa, signed, rows) in sine_gordon_rows() {
        let found = if kappa == 11.0 {
            kappa11_roots().clone()
        } else {
            sine_gordon_roots(kappa, 2000)
        };
        let matched = rows
            .iter()
            .filter(|row| {
                found.iter().any(|s| {
                    let plus = s
                        .coefficients
                        .iter()
                        .zip(row.iter())
                        .all(|(a, b)| (a - b).abs() <= 5e-4);
                    let minus = s
                        .coefficients
                        .iter()
                        .zip(row.iter())
                        .all(|(a, b)| (a + b).abs() <= 5e-4);
                    plus || minus
                })
            })
            .count();
        let good = matched == rows.len() && 2 * found.len() == signed;
        ok &= good;
        parts.push(format!(
            "κ={kappa}: {matched}/{} rows matched, {} signed (want {signed})",
            rows.len(),
            2 * found.len()
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let d = RectDomain::pi_square();
    let ops = TensorOperators::new(32, d).expect("ops");
    let f = Nonlinearity::SineGordon { kappa: 11.0 };
    let mut signed: Vec<SeedGuess> = Vec::new();
    for s in kappa11_roots() {
        signed.push(s.clone());
        signed.push(s.negated());
    }
    let mut classes = Vec::new();
    let mut failed = 0;
    for s in &signed {
        match newton_solve(&seed_to_nodal_on(s, &ops), &ops, &f, &NewtonConfig::default()) {
            Ok(out) => classes.push(classify(&out.solution).sign),
            Err(_) => failed += 1,
        }
    }
    let pos = classes.iter().filter(|c| **c == SignClass::Positive).count();
    let neg = classes.iter().filter(|c| **c == SignClass::Negative).count();
    (
        pos == 1 && neg == 1 && !classes.is_empty(),
        format!(
            "{} of {} signed seeds converged at N=32: {pos} positive, {neg} negative",
            classes.len(),
            classes.len() + failed
        ),
    )
}

fn random_interior(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n - 1, |_, _| rng.gen_range(-scale..scale))
}

fn criterion_7() -> Outcome {
    let ops = TensorOperators::new(16, RectDomain::pi_square()).expect("ops");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_fd, mut worst_dense) = (0.0f64, 0.0f64);
    for trial in 0..50 {
        let f = if trial % 2 == 0 {
            Nonlinearity::Cubic
        } else {
            Nonlinearity::SineGordon { kappa: 6.0 }
        };
        let u = random_interior(&mut rng, 16, 2.0);
        let v = random_interior(&mut rng, 16, 1.0);
        let jv = jacobian_apply(&u, &v, &ops, &f).expect("apply");
        let eps = 1e-5;
        let fd = (residual(&(&u + &v * eps), &ops, &f).expect("r") - residual(&(&u - &v * eps), &ops, &f).expect("r"))
            / (2.0 * eps);
        worst_fd = worst_fd.max((&fd - &jv).norm() / jv.norm());
        let jd = jacobian_dense(&u, &ops, &f).expect("dense");
        let dv = &jd * nalgebra::DVector::from_column_slice(v.as_slice());
        let diff = (dv - nalgebra::DVector::from_column_slice(jv.as_slice())).amax() / jv.amax();
        worst_dense = worst_dense.max(diff);
    }
    (
        worst_fd <= 1e-6 && worst_dense <= 1e-13,
        format!("max FD relative error {worst_fd:.2e}, max dense vs apply {worst_dense:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let ops = TensorOperators::new(2, RectDomain::reference()).expect("ops");
    let cfg = NewtonConfig {
        tol: 1e-12,
        ..NewtonConfig::default()
    };
    let out = newton_solve(&DMatrix::from_element(1, 1, 2.0), &ops, &Nonlinearity::Cubic, &cfg).expect("solve");
    let c = out.solution.u[(0, 0)];
    let err = (c - 5.0f64.sqrt()).abs();
    (err <= 1e-12, format!("c = {c:.15}, |c - √5| = {err:.1e}"))
}

fn criterion_9() -> Outcome {
    let d = RectDomain::pi_square();
    let ops = TensorOperators::new(32, d).expect("ops");
    let f = Nonlinearity::Cubic;
    let cfg = NewtonConfig {
        tol: 1e-12,
        ..NewtonConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = true;
    let mut parts = Vec::new();
    for (lambda, label) in [(2.0, "u_{11}"), (5.0, "u_{12+21}")] {
        let seed = cubic_seed(lambda, label);
        let star = newton_solve(&seed_to_nodal_on(&seed, &ops), &ops, &f, &cfg)
            .expect("base solve")
            .solution
            .u;
        let amp = 0.05 * star.amax();
        let mut worst = 0.0f64;
        let mut failures = 0;
        for _ in 0..20 {
            let p = random_interior(&mut rng, 32, 1.0);
            let p = &p * (amp / p.amax());
            match newton_solve(&(&star + p), &ops, &f, &cfg) {
                Ok(out) => worst = worst.max((&out.solution.u - &star).amax()),
                Err(_) => failures += 1,
            }
        }
        ok &= failures == 0 && worst < 1e-8;
        parts.push(format!("{label}: {failures} failures, max nodal diff {worst:.1e}"));
    }
    (ok, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut exact_ok = true;
    let mut negative_ok = true;
    let mut spd_ok = true;
    for n in 2..=40 {
        let lgl = Lgl1D::new(n).expect("lgl");
        // Random polynomial of degree 2N-1 in the Legendre basis: ∫ = 2 c_0.
        let coeffs: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let quad: f64 = lgl
            .nodes
            .iter()
            .zip(&lgl.weights)
            .map(|(&x, &w)| w * coeffs.iter().enumerate().map(|(k, c)| c * legendre(k, x)).sum::<f64>())
            .sum();
        let exact = 2.0 * coeffs[0];
        exact_ok &= (quad - exact).abs() <= 1e-12 * (1.0 + exact.abs());
        // P_N² has degree 2N; the LGL rule gives 2/N instead of 2/(2N+1).
        let sq: f64 = lgl
            .nodes
            .iter()
            .zip(&lgl.weights)
            .map(|(&x, &w)| w * legendre(n, x).powi(2))
            .sum();
        negative_ok &= (sq - 2.0 / (2 * n + 1) as f64).abs() > 1e-3 && (sq - 2.0 / n as f64).abs() < 1e-12;
        let ops = SpectralOperators1D::new(lgl).expect("ops");
        let sym = (&ops.stiffness - ops.stiffness.transpose()).amax() + (&ops.mass - ops.mass.transpose()).amax();
        spd_ok &= sym < 1e-12 && ops.stiffness.clone().cholesky().is_some() && ops.mass.clone().cholesky().is_some();
    }
    let o2 = SpectralOperators1D::with_order(2).expect("ops");
    let a11 = o2.stiffness[(0, 0)];
    let b11 = o2.mass[(0, 0)];
    let entries_ok = (a11 - 8.0 / 3.0).abs() < 1e-13 && (b11 - 16.0 / 15.0).abs() < 1e-13;
    let mut fd_worst = 0.0f64;
    for n in [8, 16, 32, 64] {
        let ops = TensorOperators::new(n, RectDomain::pi_square()).expect("ops");
        let rhs = random_interior(&mut rng, n, 1.0);
        let x = fast_diagonalization_solve(&ops, &rhs).expect("fd");
        let r = residual(&x, &ops, &Nonlinearity::Zero).expect("r") - &rhs;
        fd_worst = fd_worst.max(r.norm());
    }
    (
        exact_ok && negative_ok && spd_ok && entries_ok && fd_worst <= 1e-10,
        format!(
            "exact to 2N-1: {exact_ok}; inexact at 2N: {negative_ok}; A,B symmetric PD: {spd_ok}; A11={a11:.15}, B11={b11:.15}; fast-diagonalization residual {fd_worst:.1e}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("error decay for u_11", criterion_1),
        ("error decay for u_12+21", criterion_2),
        ("exponential decay rate", criterion_3),
        ("cubic seed counts", criterion_4),
        ("sine-Gordon root catalog", criterion_5),
        ("unique positive solution at κ=11", criterion_6),
        ("Jacobian correctness", criterion_7),
        ("N=2 scalar root", criterion_8),
        ("local uniqueness probe", criterion_9),
        ("quadrature and operator suite", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name} ({:.1}s): {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
