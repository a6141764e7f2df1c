mod common;

use common::*;
use polaron::model::*;
use polaron::superlinalg::{graded_eig, EigOptions, SuperMatrix};
use polaron::Monomial;

#[test]
fn r_matrix_identities() {
    let mut r = rng(1);
    for _ in 0..5 {
        let (u, mu, eta) = (rand_c(&mut r, -1.0, 1.0, 0.5), rand_c(&mut r, -1.0, 1.0, 0.5), rand_c(&mut r, 0.1, 0.7, 0.3));
        assert!(ybe_residual(u, mu, eta).unwrap() < 1e-12);
        assert!(unitarity_residual(u, eta).unwrap() < 1e-12);
        assert!(crossing_residual(u, eta).unwrap() < 1e-12);
        assert!(periodicity_residual(u, eta).unwrap() < 1e-12);
    }
}

#[test]
fn transfer_identities() {
    let p = fixed(3);
    let t0 = transfer(c(0.0, 0.0), &p).unwrap();
    let id = SuperMatrix::identity(t0.rows().clone());
    assert!((&t0 - &id).max_abs() < 1e-12);
    let u = c(0.37, 0.21);
    let v = c(-0.8, 0.4);
    let tu = transfer(u, &p).unwrap();
    let tc = transfer(-u - 2.0 * p.eta, &p).unwrap();
    let tp = transfer(u + std::f64::consts::PI, &p).unwrap();
    let tv = transfer(v, &p).unwrap();
    assert!((&tu - &tc).max_abs() < 1e-11);
    assert!((&tu - &tp).max_abs() < 1e-11);
    assert!(tu.commutator(&tv).max_abs() < 1e-11);
    assert!(tu.is_grade_consistent(1e-13));
}

#[test]
fn hamiltonian_matches_derivative() {
    for n in 2..=3 {
        let p = fixed(n);
        let (hn, c0) = hamiltonian_from_transfer(&p, &DerivOptions::default()).unwrap();
        let h = hamiltonian(&p).unwrap();
        assert!((&hn - &h).max_abs() < 1e-6, "N={n}: {}", (&hn - &h).max_abs());
        assert!(c0.soul().max_abs() < 1e-8);
    }
}

#[test]
fn semiclassical_and_asymptotic() {
    let p = fixed(2);
    let u = c(0.4, 0.1);
    let r1 = semiclassical_residual(u, &p, 1e-4).unwrap();
    let r2 = semiclassical_residual(u, &p, 1e-5).unwrap();
    assert!(r2 < 1e-3 && r2 < r1 / 5.0, "{r1} {r2}");
    match asymptotic_residual(&p, 0.3, &[20.0, 25.0]).unwrap() {
        Asymptotic::Residual(x) => assert!(x < 1e-6, "{x}"),
        Asymptotic::NoGLeadingTerm => panic!(),
    }
    assert!(matches!(asymptotic_residual(&p.diagonal(), 0.3, &[20.0]).unwrap(), Asymptotic::NoGLeadingTerm));
}

#[test]
fn eigenvalues_carry_only_g() {
    let p = fixed(2);
    let t = transfer(c(0.37, 0.21), &p).unwrap();
    let sys = graded_eig(&t, &EigOptions::default()).unwrap();
    assert_eq!(sys.pairs.len(), 4);
    for e in &sys.pairs {
        let l = e.lambda();
        for m in [Monomial::AP, Monomial::BP, Monomial::AM, Monomial::BM] {
            assert!(l.component(m).norm() < 1e-10);
        }
        assert!(non_g_degree2(&l) < 1e-10);
        assert!(e.residual < 1e-9);
    }
}
