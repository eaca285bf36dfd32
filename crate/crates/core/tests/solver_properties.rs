use nalgebra::DMatrix;
use proptest::prelude::*;

use sgsem_core::analysis::{classify, classify_nodal, export_field, read_field_csv, SignClass};
use sgsem_core::eigen::{eigen_group, laplace_eigenpairs, Normalization, RectDomain};
use sgsem_core::newton::{continuation_solve, linear_path, newton_solve, NewtonConfig};
use sgsem_core::seeds::{enumerate_cubic_seeds, random_newton_search, seed_to_nodal_on, RandomSearch, SeedGuess};
use sgsem_core::{Nonlinearity, TensorOperators};

fn cubic_seed(lambda: f64, label: &str) -> SeedGuess {
    let d = RectDomain::pi_square();
    let g = eigen_group(&d, lambda, Normalization::UnitAmplitude).unwrap();
    enumerate_cubic_seeds(&g, &Nonlinearity::Cubic, &d)
        .unwrap()
        .into_iter()
        .find(|s| s.label == label)
        .unwrap()
}

fn positive_sine_gordon_seed(kappa: f64) -> SeedGuess {
    let d = RectDomain::pi_square();
    let basis = laplace_eigenpairs(&d, 10, Normalization::Orthonormal).unwrap();
    let search = RandomSearch {
        trials: 300,
        rng_seed: 3,
        ..Default::default()
    };
    random_newton_search(&basis, &d, &Nonlinearity::SineGordon { kappa }, &search, None)
        .unwrap()
        .into_iter()
        .find(|s| s.coefficients[0] > 1.0)
        .unwrap()
}

#[test]
fn continuation_in_kappa_reaches_the_direct_solution() {
    let ops = TensorOperators::new(24, RectDomain::pi_square()).unwrap();
    let start = seed_to_nodal_on(&positive_sine_gordon_seed(6.0), &ops);
    let cfg = NewtonConfig {
        tol: 1e-11,
        continuation: Some(linear_path(6.0, 11.0, 5)),
        ..Default::default()
    };
    let path = continuation_solve(&start, &ops, &Nonlinearity::SineGordon { kappa: 6.0 }, &cfg).unwrap();
    assert_eq!(path.len(), 6);
    let last = &path.last().unwrap().solution;
    assert_eq!(last.nonlinearity, Nonlinearity::SineGordon { kappa: 11.0 });
    assert_eq!(classify(last).sign, SignClass::Positive);

    let direct_seed = positive_sine_gordon_seed(11.0);
    let direct = newton_solve(&seed_to_nodal_on(&direct_seed, &ops), &ops, &last.nonlinearity, &cfg)
        .unwrap()
        .solution;
    assert!((&direct.u - &last.u).amax() < 1e-8);
    // Every intermediate solve is warm-started, so none needs many steps.
    assert!(path.iter().skip(1).all(|o| o.solution.newton_iters <= 8));
}

#[test]
fn continuation_errors_name_the_parameter() {
    let ops = TensorOperators::new(8, RectDomain::pi_square()).unwrap();
    let cfg = NewtonConfig {
        continuation: Some(vec![1.0]),
        ..Default::default()
    };
    assert!(continuation_solve(&ops.sample_interior(|_, _| 0.0), &ops, &Nonlinearity::Cubic, &cfg).is_err());
    let cfg = NewtonConfig {
        max_iters: 1,
        continuation: Some(vec![11.0]),
        ..Default::default()
    };
    let u0 = ops.sample_interior(|x, y| 9.0 * (3.0 * x).sin() * y.sin());
    match continuation_solve(&u0, &ops, &Nonlinearity::SineGordon { kappa: 11.0 }, &cfg) {
        Err(sgsem_core::Error::Continuation { parameter, .. }) => assert_eq!(parameter, 11.0),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn newton_converges_quadratically_near_the_root() {
    let ops = TensorOperators::new(24, RectDomain::pi_square()).unwrap();
    let seed = cubic_seed(8.0, "u_{22}");
    let cfg = NewtonConfig {
        tol: 1e-11,
        ..Default::default()
    };
    let out = newton_solve(&seed_to_nodal_on(&seed, &ops), &ops, &Nonlinearity::Cubic, &cfg).unwrap();
    let r: Vec<f64> = out.history.iter().map(|h| h.residual_norm).collect();
    assert!(r.len() >= 4, "{r:?}");
    let tail = &r[r.len() - 3..];
    // Log-residuals superlinear: the exponent ratio exceeds 1.5 on the last
    // steps that are still above the rounding floor.
    for w in tail.windows(2) {
        assert!(w[1] < w[0]);
        if w[0] < 1e-2 && w[1] > 1e-12 {
            assert!(w[1].log10() / w[0].log10() > 1.5, "{tail:?}");
        }
    }
    assert!(out.history.iter().rev().take(3).all(|h| h.halvings == 0));
}

#[test]
fn repeated_solves_are_bit_identical() {
    let ops = TensorOperators::new(20, RectDomain::pi_square()).unwrap();
    let seed = cubic_seed(5.0, "u_{12-21}");
    let u0 = seed_to_nodal_on(&seed, &ops);
    let a = newton_solve(&u0, &ops, &Nonlinearity::Cubic, &NewtonConfig::default()).unwrap();
    let b = newton_solve(&u0, &ops, &Nonlinearity::Cubic, &NewtonConfig::default()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.solution, b.solution);
}

#[test]
fn cubic_solutions_are_classified_like_their_seeds() {
    let ops = TensorOperators::new(32, RectDomain::pi_square()).unwrap();
    let solve = |label: &str, lambda: f64| {
        let seed = cubic_seed(lambda, label);
        newton_solve(
            &seed_to_nodal_on(&seed, &ops),
            &ops,
            &Nonlinearity::Cubic,
            &NewtonConfig::default(),
        )
        .unwrap()
        .solution
    };
    let u11 = solve("u_{11}", 2.0);
    let c = classify(&u11);
    assert_eq!((c.sign, c.num_peaks), (SignClass::Positive, 1));
    let u22 = solve("u_{22}", 8.0);
    let c = classify(&u22);
    assert_eq!((c.sign, c.num_peaks), (SignClass::SignChanging, 4));

    let neg = solve("u_{-11}", 2.0);
    assert!((&neg.u + &u11.u).amax() < 1e-9);
}

#[test]
fn exported_field_matches_direct_evaluation() {
    let d = RectDomain::new(0.0, 2.0, -1.0, 1.0).unwrap();
    let ops = TensorOperators::new(16, d).unwrap();
    let lambda = sgsem_core::eigen::eigenvalue(&d, 1, 1);
    let g = eigen_group(&d, lambda, Normalization::UnitAmplitude).unwrap();
    let seed = enumerate_cubic_seeds(&g, &Nonlinearity::Cubic, &d).unwrap().remove(0);
    let u0 = seed_to_nodal_on(&seed, &ops);
    let mut sol = newton_solve(&u0, &ops, &Nonlinearity::Cubic, &NewtonConfig::default())
        .unwrap()
        .solution;
    sol.seed_label = "bump".into();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    export_field(&sol, 17, &path).unwrap();
    let file = read_field_csv(&path).unwrap();
    let pts: Vec<(f64, f64)> = file.rows.iter().map(|r| (r.0, r.1)).collect();
    for (row, v) in file.rows.iter().zip(sol.evaluate(&pts).unwrap()) {
        assert!((row.2 - v).abs() <= 1e-12);
    }
    assert!(file.metadata.contains(&("seed_label".to_string(), "bump".to_string())));
}

proptest! {
    #[test]
    fn classification_respects_the_sign_map(values in proptest::collection::vec(-1.0f64..1.0, 49)) {
        let u = DMatrix::from_vec(7, 7, values);
        let a = classify_nodal(&u);
        let b = classify_nodal(&-&u);
        let swapped = match a.sign {
            SignClass::Positive => SignClass::Negative,
            SignClass::Negative => SignClass::Positive,
            s => s,
        };
        prop_assert_eq!(b.sign, swapped);
        prop_assert_eq!(a.num_peaks, b.num_peaks);
        prop_assert_eq!(a.max_abs, b.max_abs);
    }
}
