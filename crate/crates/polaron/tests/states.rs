mod common;

use common::*;
use polaron::model::{hamiltonian, transfer};
use polaron::states::*;
use polaron::superlinalg::{graded_eig, EigOptions};

#[test]
fn vacuum_is_eigenvector() {
    for n in 2..=6 {
        let r = vacuum_check(&fixed(n)).unwrap();
        assert!(r < 1e-11, "N={n}: {r}");
    }
}

#[test]
fn diagonal_vacuum_is_fock_vacuum() {
    let p = fixed(4).diagonal();
    let st = vacuum_state(&p).unwrap();
    assert!(st.psi.iter().skip(1).all(|x| x.is_zero(0.0)));
    assert!(vacuum_check(&p).unwrap() < 1e-12);
}

#[test]
fn oracle_matches_closed_forms() {
    for n in 3..=7 {
        let p = fixed(n);
        let closed = vacuum_coefficients(&p).unwrap();
        let oracle = oracle_recursion(&p, vacuum_energy(&p)).unwrap();
        for l in 0..n {
            assert!((closed.b_plus[l] - oracle.b_plus[l]).norm() < 1e-10, "N={n} b+{}", l + 1);
            assert!((closed.b_minus[l] - oracle.b_minus[l]).norm() < 1e-10, "N={n} b-{}", l + 1);
        }
        for (&(k, l), &v) in &closed.big_b {
            assert!((v - oracle.b(k, l)).norm() < 1e-10, "N={n} B{k}{l}: {v} vs {}", oracle.b(k, l));
        }
    }
}

#[test]
fn vacuum_in_spectrum_of_h() {
    let p = fixed(3);
    let sys = graded_eig(&hamiltonian(&p).unwrap(), &EigOptions::default()).unwrap();
    let st = vacuum_state(&p).unwrap();
    let want = st.eigenvalue(&p);
    assert!(sys.pairs.iter().any(|e| (e.lambda() - want).max_abs() < 1e-9));
}

#[test]
fn eigenvectors_follow_the_ansatz() {
    let p = fixed(3);
    let sys = graded_eig(&transfer(c(0.37, 0.11), &p).unwrap(), &EigOptions::default()).unwrap();
    for pair in &sys.pairs {
        let m = polaron::bethe::body_sector(pair).unwrap();
        let rep = project_generic_ansatz(pair, m);
        assert!(rep.leakage < 1e-10, "M={m}: {:?}", rep.blocks);
    }
}
