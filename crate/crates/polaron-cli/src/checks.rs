//! Verification suites. Each check records a measured value, the bound it is
//! held to, and the outcome.

use clap::ValueEnum;
use polaron::fusion::{at_root_of_unity, det_rep_residual, truncation_residual};
use polaron::model::{
    crossing_residual, hamiltonian, hamiltonian_from_transfer, non_g_degree2, periodicity_residual, transfer, unitarity_residual,
    ybe_residual,
};
use polaron::superlinalg::{graded_eig, graded_tensor, supertrace, Layout};
use polaron::{AlgebraElement, ModelParams, Monomial, Parity, SuperMatrix, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// Largest chain for which suites diagonalize the transfer matrix.
pub const ED_MAX_N: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Rmatrix,
    Transfer,
    Fusion,
    Detrep,
    Tq,
    Vacuum,
    Jw,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] =
        [Suite::Algebra, Suite::Rmatrix, Suite::Transfer, Suite::Fusion, Suite::Detrep, Suite::Tq, Suite::Vacuum, Suite::Jw];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Rmatrix => "rmatrix",
            Suite::Transfer => "transfer",
            Suite::Fusion => "fusion",
            Suite::Detrep => "detrep",
            Suite::Tq => "tq",
            Suite::Vacuum => "vacuum",
            Suite::Jw => "jw",
            Suite::All => "all",
        }
    }

    fn needs_ed(self) -> bool {
        matches!(self, Suite::Detrep | Suite::Tq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// The value must not exceed the tolerance.
    Below,
    /// The value must exceed the tolerance (anti-tests).
    Above,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Check {
    pub fn below(suite: &str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { suite: suite.into(), name: name.into(), value, tolerance, bound: Bound::Below, pass: value <= tolerance }
    }

    pub fn above(suite: &str, name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { suite: suite.into(), name: name.into(), value, tolerance, bound: Bound::Above, pass: value > tolerance }
    }
}

/// Suites that `suite` expands to, with the configuration each one runs on.
/// Explicit requests that cannot run are config errors; `all` drops or adapts
/// them instead.
pub fn plan(suite: Suite, cfg: &RunConfig) -> Result<Vec<(Suite, RunConfig)>, CliError> {
    let n = cfg.params.n;
    if suite != Suite::All {
        if suite == Suite::Jw && !cfg.params.amps.is_diagonal() {
            return Err(CliError::Config("the jw suite needs diagonal boundaries (pass --diagonal)".into()));
        }
        if suite.needs_ed() && n > ED_MAX_N {
            return Err(CliError::Config(format!("suite {} diagonalizes t(u) and is limited to N ≤ {ED_MAX_N}", suite.name())));
        }
        return Ok(vec![(suite, cfg.clone())]);
    }
    let mut out = Vec::new();
    for s in Suite::EACH {
        if s.needs_ed() && n > ED_MAX_N {
            log::warn!("skipping suite {} for N = {n}", s.name());
            continue;
        }
        let mut c = cfg.clone();
        if s == Suite::Jw {
            c.params = c.params.diagonal();
        }
        out.push((s, c));
    }
    Ok(out)
}

pub fn run(suite: Suite, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> polaron::Result<Vec<Check>> {
    log::info!("suite {} on N = {}", suite.name(), cfg.params.n);
    match suite {
        Suite::Algebra => algebra(cfg, rng),
        Suite::Rmatrix => rmatrix(cfg, rng),
        Suite::Transfer => transfer_suite(cfg, rng),
        Suite::Fusion => fusion(cfg),
        Suite::Detrep => detrep(cfg),
        Suite::Tq => tq(cfg),
        Suite::Vacuum => vacuum_checks(cfg),
        Suite::Jw => jw(cfg),
        Suite::All => unreachable!("expanded by plan"),
    }
}

fn rand_c(r: &mut ChaCha8Rng, re: f64, im: f64) -> C64 {
    C64::new(r.gen_range(-re..re), r.gen_range(-im..im))
}

fn rand_element(r: &mut ChaCha8Rng) -> AlgebraElement {
    Monomial::ALL.iter().fold(AlgebraElement::zero(), |acc, &m| acc + AlgebraElement::monomial(m, rand_c(r, 1.0, 1.0)))
}

fn rand_even_matrix(r: &mut ChaCha8Rng, k: usize) -> SuperMatrix {
    let space = Layout::uniform(k).space();
    let d = space.dim();
    let entries: Vec<AlgebraElement> = (0..d * d).map(|_| rand_element(r)).collect();
    SuperMatrix::from_fn(space.clone(), space.clone(), |i, j| {
        let p = if space.parity(i) == space.parity(j) { Parity::Even } else { Parity::Odd };
        entries[i * d + j].parity_project(p)
    })
}

fn algebra(cfg: &RunConfig, r: &mut ChaCha8Rng) -> polaron::Result<Vec<Check>> {
    const S: &str = "algebra";
    let (mut assoc, mut anti, mut nil, mut central, mut cyclic, mut tensor) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let g = cfg.params.g();
    for _ in 0..20 {
        let (a, b, c) = (rand_element(r), rand_element(r), rand_element(r));
        assoc = assoc.max(((a * b) * c - a * (b * c)).max_abs());
        let (x, y) = (a.parity_project(Parity::Odd), b.parity_project(Parity::Odd));
        anti = anti.max((x * y + y * x).max_abs());
        let s = c.soul();
        nil = nil.max((s * s * s).max_abs());
        central = central.max((g * a - a * g).max_abs());
        let (m1, m2) = (rand_even_matrix(r, 2), rand_even_matrix(r, 2));
        cyclic = cyclic.max((supertrace(&m1.matmul(&m2))? - supertrace(&m2.matmul(&m1))?).max_abs());
        let (t1, t2, t3) = (rand_even_matrix(r, 1), rand_even_matrix(r, 1), rand_even_matrix(r, 1));
        tensor = tensor.max((&graded_tensor(&graded_tensor(&t1, &t2), &t3) - &graded_tensor(&t1, &graded_tensor(&t2, &t3))).max_abs());
    }
    Ok(vec![
        Check::below(S, "associativity", assoc, cfg.tol(1e-12)),
        Check::below(S, "odd anticommutation", anti, cfg.tol(1e-12)),
        Check::below(S, "soul cubed", nil, cfg.tol(1e-12)),
        Check::below(S, "G central", central, cfg.tol(1e-12)),
        Check::below(S, "supertrace cyclicity", cyclic, cfg.tol(1e-11)),
        Check::below(S, "graded tensor associativity", tensor, cfg.tol(1e-12)),
    ])
}

fn rmatrix(cfg: &RunConfig, r: &mut ChaCha8Rng) -> polaron::Result<Vec<Check>> {
    const S: &str = "rmatrix";
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let (u, mu) = (rand_c(r, 1.5, 0.6), rand_c(r, 1.5, 0.6));
        let eta = C64::new(r.gen_range(0.05..1.4), r.gen_range(-0.4..0.4));
        let res = [ybe_residual(u, mu, eta)?, unitarity_residual(u, eta)?, crossing_residual(u, eta)?, periodicity_residual(u, eta)?];
        for (w, x) in worst.iter_mut().zip(res) {
            *w = w.max(x);
        }
    }
    let tol = cfg.tol(1e-12);
    Ok(vec![
        Check::below(S, "Yang-Baxter", worst[0], tol),
        Check::below(S, "unitarity", worst[1], tol),
        Check::below(S, "crossing", worst[2], tol),
        Check::below(S, "periodicity", worst[3], tol),
    ])
}

fn rel(a: &SuperMatrix, b: &SuperMatrix) -> f64 {
    (a - b).max_abs() / a.max_abs().max(b.max_abs()).max(1.0)
}

fn transfer_suite(cfg: &RunConfig, r: &mut ChaCha8Rng) -> polaron::Result<Vec<Check>> {
    const S: &str = "transfer";
    let p = &cfg.params;
    let t0 = transfer(C64::new(0.0, 0.0), p)?;
    let one = rel(&t0, &SuperMatrix::identity(t0.rows().clone()));
    let (mut cross, mut period, mut comm) = (0.0f64, 0.0f64, 0.0f64);
    for &u in &cfg.u_grid {
        let tu = transfer(u, p)?;
        cross = cross.max(rel(&tu, &transfer(-u - 2.0 * p.eta, p)?));
        period = period.max(rel(&tu, &transfer(u + std::f64::consts::PI, p)?));
        let tv = transfer(rand_c(r, 1.0, 0.3), p)?;
        comm = comm.max(tu.commutator(&tv).max_abs() / (tu.max_abs() * tv.max_abs()).max(1.0));
    }
    let tol = cfg.tol(1e-10);
    let mut out = vec![
        Check::below(S, "t(0) = 1", one, tol),
        Check::below(S, "crossing", cross, tol),
        Check::below(S, "periodicity", period, tol),
        Check::below(S, "commutativity", comm, tol),
    ];
    let (hn, _) = hamiltonian_from_transfer(p, &cfg.deriv)?;
    out.push(Check::below(S, "t'(0) = 2H + const", (&hn - &hamiltonian(p)?).max_abs(), cfg.tol(1e-6)));
    if p.n <= ED_MAX_N {
        let sys = graded_eig(&transfer(cfg.u_ref, p)?, &cfg.eig)?;
        let (mut odd, mut other) = (0.0f64, 0.0f64);
        for e in &sys.pairs {
            let l = e.lambda();
            let scale = l.body().norm().max(1.0);
            for m in Monomial::GENERATORS {
                odd = odd.max(l.component(m).norm() / scale);
            }
            other = other.max(non_g_degree2(&l) / scale);
        }
        out.push(Check::below(S, "eigenvalues: odd part", odd, tol));
        out.push(Check::below(S, "eigenvalues: degree 2 outside G", other, tol));
    }
    Ok(out)
}

fn fusion(cfg: &RunConfig) -> polaron::Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in 1..=2 {
        let p = at_root_of_unity(&cfg.params, n);
        let worst = cfg.u_grid.iter().map(|&u| truncation_residual(n, u, &p)).collect::<polaron::Result<Vec<f64>>>()?;
        out.push(Check::below("fusion", format!("truncation n={n}"), worst.into_iter().fold(0.0, f64::max), cfg.tol(1e-9)));
    }
    Ok(out)
}

/// Relative error applied to the eigenvalue samples in the anti-test.
pub const DETREP_PERTURBATION: f64 = 0.5;

/// `(exact, perturbed)` relative determinants, one pair per eigenvalue.
pub fn detrep_values(n: usize, p: &ModelParams, u: C64, cfg: &RunConfig) -> polaron::Result<Vec<(f64, f64)>> {
    let sys = graded_eig(&transfer(u, p)?, &cfg.eig)?;
    sys.pairs
        .iter()
        .map(|pair| {
            let samples =
                (0..=n).map(|k| Ok(pair.eigenvalue_in(&transfer(u + 2.0 * k as f64 * p.eta, p)?))).collect::<polaron::Result<Vec<_>>>()?;
            let bent: Vec<AlgebraElement> = samples.iter().map(|x| *x * C64::new(1.0 + DETREP_PERTURBATION, 0.0)).collect();
            Ok((det_rep_residual(u, p, &samples)?.relative, det_rep_residual(u, p, &bent)?.relative))
        })
        .collect()
}

fn detrep(cfg: &RunConfig) -> polaron::Result<Vec<Check>> {
    const S: &str = "detrep";
    let mut out = Vec::new();
    for n in 1..=2 {
        let p = at_root_of_unity(&cfg.params, n);
        let v = detrep_values(n, &p, cfg.u_ref, cfg)?;
        let on = v.iter().map(|x| x.0).fold(0.0, f64::max);
        let off = v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        out.push(Check::below(S, format!("n={n} on eigenvalues"), on, cfg.tol(1e-8)));
        out.push(Check::above(S, format!("n={n} perturbed eigenvalues"), off, cfg.tol(1e-3)));
    }
    Ok(out)
}

pub fn match_options(cfg: &RunConfig) -> polaron::bethe::MatchOptions {
    polaron::bethe::MatchOptions {
        u_ref: cfg.u_ref,
        u_samples: cfg.u_grid.clone(),
        newton: cfg.newton,
        seed: cfg.seed,
        eig: cfg.eig,
        ..Default::default()
    }
}

fn tq(cfg: &RunConfig) -> polaron::Result<Vec<Check>> {
    const S: &str = "tq";
    let rep = polaron::bethe::spectrum_match(&cfg.params, &match_options(cfg))?;
    let body = rep.records.iter().map(|r| r.residuals.body).fold(0.0, f64::max);
    let g = rep.records.iter().map(|r| r.residuals.g).fold(0.0, f64::max);
    Ok(vec![
        Check::below(S, "body deviation", body, cfg.tol(1e-8)),
        Check::below(S, "G deviation", g, cfg.tol(1e-7)),
        Check::below(S, "unmatched eigenvalues", rep.unmatched as f64, 0.0),
    ])
}

pub fn vacuum_checks(cfg: &RunConfig) -> polaron::Result<Vec<Check>> {
    use polaron::states::{oracle_recursion, vacuum_check, vacuum_coefficients, vacuum_energy};
    const S: &str = "vacuum";
    let p = &cfg.params;
    let mut out = vec![Check::below(S, "eigenvector residual", vacuum_check(p)?, cfg.tol(1e-11))];
    // The relation families determine the coefficients only from N = 3 on.
    if p.n >= 3 {
        let closed = vacuum_coefficients(p)?;
        let solved = oracle_recursion(p, vacuum_energy(p))?;
        let mut worst = 0.0f64;
        for l in 0..p.n {
            worst = worst.max((closed.b_plus[l] - solved.b_plus[l]).norm()).max((closed.b_minus[l] - solved.b_minus[l]).norm());
        }
        for (&(k, l), &v) in &closed.big_b {
            worst = worst.max((v - solved.b(k, l)).norm());
        }
        out.push(Check::below(S, "closed form vs linear system", worst, cfg.tol(1e-10)));
    }
    Ok(out)
}

fn jw(cfg: &RunConfig) -> polaron::Result<Vec<Check>> {
    const S: &str = "jw";
    let cmp = polaron::spinmap::xxz_equivalence_check(&cfg.params)?;
    Ok(vec![
        Check::below(S, "Hamiltonian vs XXZ", cmp.residual, cfg.tol(1e-12)),
        Check::below(S, "spectra as sets", cmp.spectrum, cfg.tol(1e-10)),
        Check::below(S, "Fock vs image construction", cmp.fock, cfg.tol(1e-12)),
    ])
}
