mod common;

use common::*;
use polaron::bethe::*;
use polaron::fusion::tilde_delta;
use polaron::C64;

fn report(p: &polaron::ModelParams) -> SpectrumReport {
    let r = spectrum_match(p, &MatchOptions::default()).unwrap();
    for rec in &r.records {
        eprintln!(
            "M={} λ={:.6} G={:.6} body={:.1e} g={:.1e} fit={:.1e}/{:.1e} bae={:.1e}/{:.1e} matched={}",
            rec.m,
            rec.lambda_body,
            rec.lambda_g,
            rec.residuals.body,
            rec.residuals.g,
            rec.residuals.fit_q,
            rec.residuals.fit_b,
            rec.residuals.bae_diag,
            rec.residuals.bae_nondiag,
            rec.matched
        );
    }
    r
}

#[test]
fn spectrum_n2_nondiagonal() {
    let r = report(&fixed(2));
    assert_eq!(r.records.len(), 4);
    assert_eq!(r.unmatched, 0);
}

#[test]
fn spectrum_n3_nondiagonal() {
    let r = report(&fixed(3));
    assert_eq!(r.records.len(), 8);
    assert_eq!(r.unmatched, 0);
}

#[test]
fn spectrum_n3_diagonal() {
    let r = report(&fixed(3).diagonal());
    assert_eq!(r.unmatched, 0);
    assert!(r.records.iter().all(|x| x.lambda_g == C64::new(0.0, 0.0)));
}

#[test]
fn h_and_f_relations() {
    let p = fixed(3);
    let e = p.eta;
    for k in 0..5 {
        let u = c(-0.5 + 0.27 * k as f64, 0.1);
        let (hp, hm) = h_pm(u, &p).unwrap();
        let (hp2, _) = h_pm(-u - 2.0 * e, &p).unwrap();
        assert!((hm + hp2).norm() < 1e-12 * hm.norm());
        let (_, hm_next) = h_pm(u + 2.0 * e, &p).unwrap();
        let d = tilde_delta(u, &p).unwrap();
        assert!((hp * hm_next - d).norm() < 1e-10 * d.norm());
        for m in 0..3 {
            let (fp, fm) = f_pm(u, m, &p).unwrap();
            let (fp_shift, _) = f_pm(u - 2.0 * e, m, &p).unwrap();
            let (fp_cross, _) = f_pm(-u - 2.0 * e, m, &p).unwrap();
            assert!((fp_shift + fm).norm() < 1e-12);
            assert!((fp_cross - fm).norm() < 1e-12);
            let _ = fp;
        }
    }
}

#[test]
fn w_for_vacuum() {
    let p = fixed(2);
    let w = w_coef(0, &p).unwrap();
    let want = 1.0 / (p.psi_plus + p.psi_minus + 2.0 * p.eta).sin();
    assert!((w - want).norm() < 1e-14);
}

#[test]
fn explicit_and_q_ratio_forms_agree() {
    let p = fixed(3);
    let trial = [c(0.31, 0.2), c(-0.4, 0.5), c(0.9, -0.1)];
    for (a, b) in bae_forms_diag(&trial, &p).unwrap() {
        assert!((a - b).norm() < 1e-12 * a.norm());
    }
    assert!(bae_residual_diag(&[], &p).unwrap().is_empty());
}

#[test]
fn lambda_tq_normalization_and_crossing() {
    let p = fixed(2);
    let roots = BetheRoots { m: 1, v0: vec![c(0.3, 0.2)], v1: vec![c(-0.2, 0.4)], ..Default::default() };
    let l0 = lambda_tq(c(1e-9, 0.0), &roots, &p, TqMode::Full);
    // Q(0) is generically nonzero, so Λ(0) = 1 holds for any roots
    let l0 = l0.unwrap();
    assert!((l0.body() - C64::new(1.0, 0.0)).norm() < 1e-6);
    assert!(l0.soul().max_abs() < 1e-6);
    let u = c(0.41, -0.13);
    let a = lambda_tq(u, &roots, &p, TqMode::Full).unwrap();
    let b = lambda_tq(-u - 2.0 * p.eta, &roots, &p, TqMode::Full).unwrap();
    assert!((a - b).max_abs() < 1e-10 * a.max_abs());
}

#[test]
fn bad_seed_is_flagged() {
    let p = fixed(2);
    let o = newton_solve(|x: &[C64]| bae_residual_diag(x, &p), &[c(0.0, 40.0)], &NewtonOptions { max_iter: 5, ..Default::default() });
    if let Ok(o) = o {
        assert!(!o.converged || bae_residual_diag(&o.x, &p).unwrap()[0].norm() <= 1e-12);
    }
}

#[test]
fn multistart_reaches_low_sectors() {
    let p = fixed(3);
    let report = spectrum_match(&p, &MatchOptions::default()).unwrap();
    let u_ref = MatchOptions::default().u_ref;
    for m in 0..=3 {
        let sols = solve_multistart(&p, m, 200, 11, u_ref, &NewtonOptions::default()).unwrap();
        let want: Vec<_> = report.records.iter().filter(|r| r.m == m).collect();
        let hits = want
            .iter()
            .filter(|r| {
                sols.iter().any(|s| {
                    let g = polaron::g_component(&s.lambda, &p.g()).0;
                    (s.lambda.body() - r.lambda_body).norm() < 1e-8 * r.lambda_body.norm().max(1.0)
                        && (g - r.lambda_g).norm() < 1e-7 * r.lambda_g.norm().max(1.0)
                })
            })
            .count();
        eprintln!("M={m}: {} solutions, {hits}/{} eigenvalues reached", sols.len(), want.len());
        assert!(sols.iter().all(|s| s.roots.residual_diag < 1e-10));
        if m <= 1 {
            assert_eq!(hits, want.len());
        }
    }
}
