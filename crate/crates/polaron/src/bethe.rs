//! TQ relations and the two tiers of Bethe equations, a damped Newton solver,
//! and matching of Bethe solutions against exact transfer-matrix spectra.
//!
//! Sign conventions: with `Λd`, `ΛG` the diagonal and `G`-parts of the TQ
//! expression, the eigenvalue of `t(u)` in an `M`-sector is
//! `−[Λd(u) + (−1)^M G ΛG(u)]`.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::h_fn;
use crate::grassmann::{g_component, AlgebraElement, C64};
use crate::model::{transfer, ModelParams};
use crate::superlinalg::{body_eig, graded_eig, CMat, EigOptions, GradedEigenpair};
use crate::trig::{cos, cot, re, sin};

/// `(h+(u), h−(u))` with `h−(u) = −ω+ω− (sin(u+2η)/sin 2η)^{2N}
/// sin(2u+4η)/sin(2u+2η) sin(u+ψ+) sin(u+ψ−)` and `h+(u) = −h−(−u−2η)`.
pub fn h_pm(u: C64, p: &ModelParams) -> Result<(C64, C64)> {
    let e2 = 2.0 * p.eta;
    if sin(2.0 * u + e2).norm() < 1e-13 {
        return Err(Error::Pole { what: "sin(2u+2η) in h±", at: u });
    }
    Ok((h_fn(-u - e2, p), -h_fn(u, p)))
}

/// `W = 1/sin(ψ+ + ψ− + (N−2M−1)2η)`.
pub fn w_coef(m: usize, p: &ModelParams) -> Result<C64> {
    let s = sin(p.psi_plus + p.psi_minus + (p.n as f64 - 2.0 * m as f64 - 1.0) * 2.0 * p.eta);
    if s.norm() < 1e-13 {
        return Err(Error::Pole { what: "W: resonant boundary/anisotropy combination", at: re(m as f64) });
    }
    Ok(1.0 / s)
}

/// `(f+(u), f−(u)) = (W sin(2u+4η), −W sin 2u)`.
pub fn f_pm(u: C64, m: usize, p: &ModelParams) -> Result<(C64, C64)> {
    let w = w_coef(m, p)?;
    Ok((w * sin(2.0 * u + 4.0 * p.eta), -w * sin(2.0 * u)))
}

/// `Π_ℓ sin(u−v_ℓ) sin(u+v_ℓ+2η)`.
pub fn q_poly(u: C64, roots: &[C64], eta: C64) -> C64 {
    roots.iter().map(|&v| sin(u - v) * sin(u + v + 2.0 * eta)).product()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BetheRoots {
    pub m: usize,
    pub v0: Vec<C64>,
    /// Empty for diagonal boundaries.
    pub v1: Vec<C64>,
    pub residual_diag: f64,
    pub residual_nondiag: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BetheRoots {
    pub fn vacuum() -> Self {
        BetheRoots { converged: true, ..Default::default() }
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for set in [&self.v0, &self.v1] {
            for i in 0..set.len() {
                for j in i + 1..set.len() {
                    best = best.min((set[i] - set[j]).norm());
                }
            }
        }
        best
    }
}

/// `(Λd(u), ΛG(u))` of the deformed TQ relation:
/// `Λd = h− Q(u−2η)/Q − h+ Q(u+2η)/Q`,
/// `ΛG = −Λd b/Q + h−(b(u−2η) + f− Q(u−2η))/Q − h+(b(u+2η) + f+ Q(u+2η))/Q`.
pub fn tq_parts(u: C64, v0: &[C64], v1: &[C64], p: &ModelParams) -> Result<(C64, C64)> {
    let e2 = 2.0 * p.eta;
    let q = q_poly(u, v0, p.eta);
    if q.norm() < 1e-14 {
        return Err(Error::Pole { what: "Q(u) = 0 in TQ", at: u });
    }
    let (hp, hm) = h_pm(u, p)?;
    let (qm, qp) = (q_poly(u - e2, v0, p.eta), q_poly(u + e2, v0, p.eta));
    let ld = (hm * qm - hp * qp) / q;
    if p.amps.is_diagonal() {
        return Ok((ld, re(0.0)));
    }
    let (fp, fm) = f_pm(u, v0.len(), p)?;
    let b = |x: C64| q_poly(x, v1, p.eta);
    let lg = -ld * b(u) / q + hm * (b(u - e2) + fm * qm) / q - hp * (b(u + e2) + fp * qp) / q;
    Ok((ld, lg))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TqMode {
    Diagonal,
    Full,
}

/// Eigenvalue of `t(u)` predicted by the TQ relation.
pub fn lambda_tq(u: C64, roots: &BetheRoots, p: &ModelParams, mode: TqMode) -> Result<AlgebraElement> {
    let (ld, lg) = tq_parts(u, &roots.v0, &roots.v1, p)?;
    let body = AlgebraElement::scalar(-ld);
    match mode {
        TqMode::Diagonal => Ok(body),
        TqMode::Full => {
            let sign = if roots.m.is_multiple_of(2) { -1.0 } else { 1.0 };
            Ok(body + p.g().scale(sign * lg))
        }
    }
}

/// Per root, `(L − R)/(|L| + |R|)` for
/// `L = (sin(v+2η)/sin v)^{2N} sin(v+ψ−)sin(v+ψ+)/(sin(v+2η−ψ+)sin(v+2η−ψ−))` and
/// `R = Π_{j≠ℓ} sin(v−v_j+2η) sin(v+v_j+4η)/(sin(v−v_j−2η) sin(v+v_j))`.
pub fn bae_residual_diag(v0: &[C64], p: &ModelParams) -> Result<Vec<C64>> {
    Ok(bae_sides_diag(v0, p)?.into_iter().map(|(l, r)| (l - r) / (l.norm() + r.norm()).max(f64::MIN_POSITIVE)).collect())
}

fn bae_sides_diag(v0: &[C64], p: &ModelParams) -> Result<Vec<(C64, C64)>> {
    let e2 = 2.0 * p.eta;
    let mut out = Vec::with_capacity(v0.len());
    for (l, &v) in v0.iter().enumerate() {
        let den = sin(v).powu(2 * p.n as u32) * sin(v + e2 - p.psi_plus) * sin(v + e2 - p.psi_minus);
        if den.norm() < 1e-300 {
            return Err(Error::Pole { what: "diagonal BAE", at: v });
        }
        let lhs = sin(v + e2).powu(2 * p.n as u32) * sin(v + p.psi_minus) * sin(v + p.psi_plus) / den;
        let mut rhs = re(1.0);
        for (j, &w) in v0.iter().enumerate() {
            if j != l {
                rhs *= sin(v - w + e2) * sin(v + w + 2.0 * e2) / (sin(v - w - e2) * sin(v + w));
            }
        }
        out.push((lhs, rhs));
    }
    Ok(out)
}

/// Per root, the ratio `L/R` of the explicit form next to the ratio
/// `(h−/h+) / (Q(v+2η)/Q(v−2η))` of the `Q`-form. The two agree identically,
/// whether or not the roots solve the equations.
pub fn bae_forms_diag(v0: &[C64], p: &ModelParams) -> Result<Vec<(C64, C64)>> {
    let e2 = 2.0 * p.eta;
    let sides = bae_sides_diag(v0, p)?;
    let mut out = Vec::with_capacity(v0.len());
    for (&v, (l, r)) in v0.iter().zip(sides) {
        let (hp, hm) = h_pm(v, p)?;
        let qr = q_poly(v + e2, v0, p.eta) / q_poly(v - e2, v0, p.eta);
        out.push((l / r, (hm / hp) / qr));
    }
    Ok(out)
}

/// Logarithmic derivative of `h−`.
fn h_minus_logd(u: C64, p: &ModelParams) -> C64 {
    let e2 = 2.0 * p.eta;
    2.0 * p.n as f64 * cot(u + e2) + 2.0 * cot(2.0 * u + 2.0 * e2) - 2.0 * cot(2.0 * u + e2) + cot(u + p.psi_plus) + cot(u + p.psi_minus)
}

fn q_logd(u: C64, roots: &[C64], eta: C64) -> C64 {
    roots.iter().map(|&v| cot(u - v) + cot(u + v + 2.0 * eta)).sum()
}

/// `Λd` at a zero `v` of `Q`, as the limit `N'(v)/Q'(v)` of
/// `N(u) = h−(u)Q(u−2η) − h+(u)Q(u+2η)`, with analytic derivatives.
pub fn lambda_diag_at_root(l: usize, v0: &[C64], p: &ModelParams) -> Result<C64> {
    let e2 = 2.0 * p.eta;
    let v = v0[l];
    let (hp, hm) = h_pm(v, p)?;
    let (qm, qp) = (q_poly(v - e2, v0, p.eta), q_poly(v + e2, v0, p.eta));
    // h+(u) = −h−(−u−2η)  ⇒  h+'(u) = −h+(u) L(−u−2η)
    let dhm = hm * h_minus_logd(v, p);
    let dhp = -hp * h_minus_logd(-v - e2, p);
    let dn = dhm * qm + hm * qm * q_logd(v - e2, v0, p.eta) - dhp * qp - hp * qp * q_logd(v + e2, v0, p.eta);
    let mut dq = sin(2.0 * v + e2);
    for (j, &w) in v0.iter().enumerate() {
        if j != l {
            dq *= sin(v - w) * sin(v + w + e2);
        }
    }
    if dq.norm() < 1e-300 {
        return Err(Error::Pole { what: "Q'(v) = 0 (repeated root)", at: v });
    }
    Ok(dn / dq)
}

/// Per root of `v0`, `L − R` of
/// `h−/h+ = Λd b/(h+ D) + (b(v+2η) + f+ Q(v+2η))/D`, `D = b(v−2η) + f− Q(v−2η)`,
/// divided by `|L| + |R|`.
pub fn bae_residual_nondiag(v0: &[C64], v1: &[C64], p: &ModelParams) -> Result<Vec<C64>> {
    let e2 = 2.0 * p.eta;
    let m = v0.len();
    let b = |x: C64| q_poly(x, v1, p.eta);
    let mut out = Vec::with_capacity(m);
    for (l, &v) in v0.iter().enumerate() {
        let (hp, hm) = h_pm(v, p)?;
        let (fp, fm) = f_pm(v, m, p)?;
        let (qm, qp) = (q_poly(v - e2, v0, p.eta), q_poly(v + e2, v0, p.eta));
        let d = b(v - e2) + fm * qm;
        let scale = b(v - e2).norm() + (fm * qm).norm();
        if d.norm() < 1e-12 * scale.max(1e-300) {
            return Err(Error::Singular(format!("b(v−2η) + f−Q(v−2η) vanishes at v = {v}")));
        }
        let ld = lambda_diag_at_root(l, v0, p)?;
        let lhs = hm / hp;
        let rhs = ld * b(v) / (hp * d) + (b(v + e2) + fp * qp) / d;
        out.push((lhs - rhs) / (lhs.norm() + rhs.norm()).max(f64::MIN_POSITIVE));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_iter: 200, fd_step: 1e-7 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub x: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

fn sup(r: &[C64]) -> f64 {
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Damped Newton on the real and imaginary parts of the unknowns, with a
/// central finite-difference Jacobian. Returns the best iterate, flagged
/// unconverged, when the tolerance is not met.
pub fn newton_solve(f: impl Fn(&[C64]) -> Result<Vec<C64>>, seed: &[C64], opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let mut x = seed.to_vec();
    let mut r = f(&x)?;
    let mut norm = sup(&r);
    let mut history = vec![norm];
    let k = x.len();
    if k == 0 || norm <= opts.tol {
        return Ok(NewtonOutcome { x, residual: norm, iterations: 0, converged: norm <= opts.tol, history });
    }
    let mut it = 0;
    while it < opts.max_iter && norm > opts.tol {
        it += 1;
        let rows = 2 * r.len();
        let mut jac = Mat::<f64>::zeros(rows, 2 * k);
        for c in 0..2 * k {
            let dz = if c % 2 == 0 { re(opts.fd_step) } else { C64::new(0.0, opts.fd_step) };
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c / 2] += dz;
            xm[c / 2] -= dz;
            let (rp, rm) = (f(&xp)?, f(&xm)?);
            for i in 0..r.len() {
                let d = (rp[i] - rm[i]) / (2.0 * opts.fd_step);
                jac[(2 * i, c)] = d.re;
                jac[(2 * i + 1, c)] = d.im;
            }
        }
        let mut rhs = Mat::<f64>::zeros(rows, 1);
        for i in 0..r.len() {
            rhs[(2 * i, 0)] = -r[i].re;
            rhs[(2 * i + 1, 0)] = -r[i].im;
        }
        let step = if rows == 2 * k { jac.partial_piv_lu().solve(&rhs) } else { jac.qr().solve_lstsq(&rhs) };
        if (0..2 * k).any(|i| !step[(i, 0)].is_finite()) {
            return Err(Error::Singular("Newton Jacobian is singular".into()));
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<C64> = (0..k).map(|i| x[i] + C64::new(step[(2 * i, 0)], step[(2 * i + 1, 0)]) * lambda).collect();
            if let Ok(rt) = f(&trial) {
                let nt = sup(&rt);
                if nt.is_finite() && nt < norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        history.push(norm);
        if !accepted {
            break;
        }
    }
    Ok(NewtonOutcome { x, residual: norm, iterations: it, converged: norm <= opts.tol, history })
}

/// Roots of `Σ_k a_k w^k` (`a` in ascending order, leading nonzero) via the
/// companion matrix.
pub fn poly_roots(a: &[C64]) -> Result<Vec<C64>> {
    let m = a.len() - 1;
    if m == 0 {
        return Ok(vec![]);
    }
    let lead = a[m];
    let comp = CMat::from_fn(m, m, |i, j| {
        if i == 0 {
            -a[m - 1 - j] / lead
        } else if j + 1 == i {
            re(1.0)
        } else {
            re(0.0)
        }
    });
    Ok(body_eig(&comp)?.into_iter().map(|e| e.value).collect())
}

/// `v = (arccos c − 2η)/2` for the zero `w = c` of `Q` in `w = cos(2u+2η)`.
fn root_from_w(c: C64, eta: C64) -> C64 {
    (c.acos() - 2.0 * eta) / 2.0
}

fn w_of(u: C64, eta: C64) -> C64 {
    cos(2.0 * u + 2.0 * eta)
}

/// Linear fit of `Q` of degree `m` in `w = cos(2u+2η)` (leading coefficient
/// `(−1/2)^m`) to samples `(u, Λ(u))` of a transfer eigenvalue body, through
/// `−Λ Q(u) = h− Q(u−2η) − h+ Q(u+2η)`. Returns roots and the worst relative
/// row residual.
pub fn fit_q(p: &ModelParams, us: &[C64], lambda: &[C64], m: usize) -> Result<(Vec<C64>, f64)> {
    let e = p.eta;
    let lead = re((-0.5f64).powi(m as i32));
    let mut rows = Vec::with_capacity(us.len());
    for (&u, &l) in us.iter().zip(lambda) {
        let (hp, hm) = h_pm(u, p)?;
        let terms = [(l, u), (hm, u - 2.0 * e), (-hp, u + 2.0 * e)];
        rows.push(terms);
    }
    let eval = |coef: &[C64], terms: &[(C64, C64); 3]| -> (C64, f64) {
        let mut s = re(0.0);
        let mut mag = 0.0;
        for &(c, x) in terms {
            let w = w_of(x, e);
            let q: C64 = coef.iter().rev().fold(re(0.0), |acc, &a| acc * w + a);
            s += c * q;
            mag += (c * q).norm();
        }
        (s, mag)
    };
    let coef = if m == 0 {
        vec![lead]
    } else {
        let a = Mat::<C64>::from_fn(rows.len(), m, |i, k| rows[i].iter().map(|&(c, x)| c * w_of(x, e).powu(k as u32)).sum());
        let b = Mat::<C64>::from_fn(rows.len(), 1, |i, _| -lead * rows[i].iter().map(|&(c, x)| c * w_of(x, e).powu(m as u32)).sum::<C64>());
        let sol = a.qr().solve_lstsq(&b);
        let mut coef: Vec<C64> = (0..m).map(|k| sol[(k, 0)]).collect();
        coef.push(lead);
        coef
    };
    let worst = rows.iter().map(|t| {
        let (s, mag) = eval(&coef, t);
        s.norm() / mag.max(f64::MIN_POSITIVE)
    });
    let worst = worst.fold(0.0, f64::max);
    let roots = poly_roots(&coef)?.into_iter().map(|c| root_from_w(c, e)).collect();
    Ok((roots, worst))
}

/// Linear fit of `b` (same normalization as `Q`) given `v0`, to samples of
/// `(Λd, ΛG)`.
pub fn fit_b(p: &ModelParams, us: &[C64], ld: &[C64], lg: &[C64], v0: &[C64]) -> Result<(Vec<C64>, f64)> {
    let e = p.eta;
    let e2 = 2.0 * e;
    let m = v0.len();
    let lead = re((-0.5f64).powi(m as i32));
    // ΛG Q + Λd b − h− b(u−2η) + h+ b(u+2η) − h− f− Q(u−2η) + h+ f+ Q(u+2η) = 0
    let mut lin = Vec::new();
    let mut cst = Vec::new();
    for ((&u, &d), &g) in us.iter().zip(ld).zip(lg) {
        let (hp, hm) = h_pm(u, p)?;
        let (fp, fm) = f_pm(u, m, p)?;
        lin.push([(d, u), (-hm, u - e2), (hp, u + e2)]);
        let parts = [g * q_poly(u, v0, e), -hm * fm * q_poly(u - e2, v0, e), hp * fp * q_poly(u + e2, v0, e)];
        cst.push(parts);
    }
    let basis = |t: &[(C64, C64); 3], k: u32| -> C64 { t.iter().map(|&(c, x)| c * w_of(x, e).powu(k)).sum() };
    let coef = if m == 0 {
        vec![lead]
    } else {
        let a = Mat::<C64>::from_fn(lin.len(), m, |i, k| basis(&lin[i], k as u32));
        let b = Mat::<C64>::from_fn(lin.len(), 1, |i, _| -(cst[i].iter().sum::<C64>() + lead * basis(&lin[i], m as u32)));
        let sol = a.qr().solve_lstsq(&b);
        let mut coef: Vec<C64> = (0..m).map(|k| sol[(k, 0)]).collect();
        coef.push(lead);
        coef
    };
    let mut worst: f64 = 0.0;
    for (t, c) in lin.iter().zip(&cst) {
        let mut s: C64 = c.iter().sum();
        let mut mag: f64 = c.iter().map(|z| z.norm()).sum();
        for &(cc, x) in t {
            let w = w_of(x, e);
            let q: C64 = coef.iter().rev().fold(re(0.0), |acc, &a| acc * w + a);
            s += cc * q;
            mag += (cc * q).norm();
        }
        worst = worst.max(s.norm() / mag.max(f64::MIN_POSITIVE));
    }
    let roots = poly_roots(&coef)?.into_iter().map(|c| root_from_w(c, e)).collect();
    Ok((roots, worst))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Reference point for the exact diagonalization.
    pub u_ref: C64,
    /// Points where TQ and exact eigenvalues are compared.
    pub u_samples: Vec<C64>,
    /// Points used to fit the seeds.
    pub u_fit: Vec<C64>,
    pub fit_tol: f64,
    pub body_tol: f64,
    pub g_tol: f64,
    pub newton: NewtonOptions,
    /// Random restarts in the strip `|Im v| ≤ 3` when the fitted seed fails.
    pub restarts: usize,
    pub seed: u64,
    pub eig: EigOptions,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            u_ref: C64::new(0.37, 0.11),
            u_samples: (0..6).map(|k| C64::new(-0.71 + 0.29 * k as f64, 0.17 - 0.04 * k as f64)).collect(),
            u_fit: (0..10).map(|k| C64::new(0.13 + 0.21 * k as f64, 0.05 * k as f64)).collect(),
            fit_tol: 1e-9,
            body_tol: 1e-8,
            g_tol: 1e-7,
            newton: NewtonOptions::default(),
            restarts: 20,
            seed: 7,
            eig: EigOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub lambda_body: C64,
    pub lambda_g: C64,
    pub m: usize,
    pub v0: Vec<C64>,
    pub v1: Vec<C64>,
    pub residuals: RecordResiduals,
    pub matched: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RecordResiduals {
    pub fit_q: f64,
    pub fit_b: f64,
    pub bae_diag: f64,
    pub bae_nondiag: f64,
    /// `max |Λ_TQ − Λ_ED| / max(1, |Λ_ED|)` over the samples, body part.
    pub body: f64,
    /// Same for the coefficient of `G`.
    pub g: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub records: Vec<SpectrumRecord>,
    pub unmatched: usize,
}

/// Particle number carrying the body of an eigenvector, if it is sharp.
pub fn body_sector(pair: &GradedEigenpair) -> Option<usize> {
    let total: f64 = pair.right.iter().map(|x| x.body().norm_sqr()).sum();
    let n_states = pair.right.len();
    let bits = n_states.trailing_zeros() as usize;
    (0..=bits).find(|&k| {
        let inside: f64 = (0..n_states).filter(|s| s.count_ones() as usize == k).map(|s| pair.right[s].body().norm_sqr()).sum();
        inside >= total * (1.0 - 1e-16) && inside > 0.0
    })
}

/// Diagonalizes `t(u_ref)`, then for every eigenvalue fits, polishes and
/// checks a Bethe solution against the exact eigenvalue on `u_samples`.
pub fn spectrum_match(p: &ModelParams, opts: &MatchOptions) -> Result<SpectrumReport> {
    p.validate()?;
    if p.n > 6 {
        return Err(Error::InvalidArgument(format!("spectrum matching is limited to N ≤ 6 (got {})", p.n)));
    }
    let sys = graded_eig(&transfer(opts.u_ref, p)?, &opts.eig)?;
    let t_fit: Vec<_> = opts.u_fit.iter().map(|&u| transfer(u, p)).collect::<Result<_>>()?;
    let t_cmp: Vec<_> = opts.u_samples.iter().map(|&u| transfer(u, p)).collect::<Result<_>>()?;
    let g = p.g();
    let diagonal = p.amps.is_diagonal();
    let split = |x: &AlgebraElement| -> C64 {
        if diagonal {
            re(0.0)
        } else {
            g_component(x, &g).0
        }
    };
    let mut records = Vec::new();
    for (idx, pair) in sys.pairs.iter().enumerate() {
        let lam_fit: Vec<AlgebraElement> = t_fit.iter().map(|t| pair.eigenvalue_in(t)).collect();
        let lam_cmp: Vec<AlgebraElement> = t_cmp.iter().map(|t| pair.eigenvalue_in(t)).collect();
        let body_fit: Vec<C64> = lam_fit.iter().map(|x| x.body()).collect();
        let rec = match_one(p, opts, pair, &body_fit, &lam_fit, &lam_cmp, &split, idx as u64);
        records.push(rec?);
    }
    let unmatched = records.iter().filter(|r| !r.matched).count();
    Ok(SpectrumReport { n: p.n, records, unmatched })
}

#[allow(clippy::too_many_arguments)]
fn match_one(
    p: &ModelParams,
    opts: &MatchOptions,
    pair: &GradedEigenpair,
    body_fit: &[C64],
    lam_fit: &[AlgebraElement],
    lam_cmp: &[AlgebraElement],
    split: &dyn Fn(&AlgebraElement) -> C64,
    salt: u64,
) -> Result<SpectrumRecord> {
    let mut res = RecordResiduals::default();
    let sector = body_sector(pair);
    // sector from the body support, else smallest M with a consistent fit
    let candidates: Vec<usize> = match sector {
        Some(m) => vec![m],
        None => (0..=p.n).collect(),
    };
    let mut chosen = None;
    for m in candidates {
        let (v0, r) = fit_q(p, &opts.u_fit, body_fit, m)?;
        if r <= opts.fit_tol || sector.is_some() {
            chosen = Some((m, v0, r));
            break;
        }
    }
    let lambda = pair.lambda();
    let (m, seed, fit_r) = match chosen {
        Some(c) => c,
        None => {
            return Ok(SpectrumRecord {
                lambda_body: lambda.body(),
                lambda_g: split(&lambda),
                m: 0,
                v0: vec![],
                v1: vec![],
                residuals: res,
                matched: false,
            })
        }
    };
    res.fit_q = fit_r;
    let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
    let check = |roots: &BetheRoots| -> Result<(f64, f64)> {
        let mut body: f64 = 0.0;
        let mut gdev: f64 = 0.0;
        for (&u, ed) in opts.u_samples.iter().zip(lam_cmp) {
            let (ld, lg) = tq_parts(u, &roots.v0, &roots.v1, p)?;
            body = body.max((-ld - ed.body()).norm() / ed.body().norm().max(1.0));
            let eg = split(ed);
            gdev = gdev.max((sign * lg - eg).norm() / eg.norm().max(1.0));
        }
        Ok((body, gdev))
    };
    // tier one
    let diag = |x: &[C64]| bae_residual_diag(x, p);
    let failed = |x: &[C64]| NewtonOutcome { x: x.to_vec(), residual: f64::INFINITY, iterations: 0, converged: false, history: vec![] };
    let mut out = newton_solve(diag, &seed, &opts.newton).unwrap_or_else(|_| failed(&seed));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let body_ok = |v0: &[C64]| -> bool {
        let roots = BetheRoots { m, v0: v0.to_vec(), ..Default::default() };
        opts.u_samples.iter().zip(lam_cmp).all(|(&u, ed)| {
            tq_parts(u, &roots.v0, &[], p)
                .map(|(ld, _)| (-ld - ed.body()).norm() / ed.body().norm().max(1.0) <= opts.body_tol)
                .unwrap_or(false)
        })
    };
    let mut tries = 0;
    while m > 0 && !(out.converged && body_ok(&out.x)) && tries < opts.restarts {
        tries += 1;
        let s: Vec<C64> = (0..m).map(|_| C64::new(rng.gen_range(-1.6..1.6), rng.gen_range(-3.0..3.0))).collect();
        if let Ok(o) = newton_solve(diag, &s, &opts.newton) {
            if o.converged {
                out = o;
            }
        }
    }
    let v0 = out.x;
    res.bae_diag = out.residual;
    res.iterations = out.iterations;
    // tier two
    let mut v1 = Vec::new();
    let mut converged = out.converged || m == 0;
    if !p.amps.is_diagonal() && m > 0 {
        let ld: Vec<C64> = lam_fit.iter().map(|x| -x.body()).collect();
        let lg: Vec<C64> = lam_fit.iter().map(|x| sign * split(x)).collect();
        let (seed1, r1) = fit_b(p, &opts.u_fit, &ld, &lg, &v0)?;
        res.fit_b = r1;
        let nd = |x: &[C64]| bae_residual_nondiag(&v0, x, p);
        let o = newton_solve(nd, &seed1, &opts.newton).unwrap_or_else(|_| failed(&seed1));
        res.bae_nondiag = o.residual;
        res.iterations += o.iterations;
        converged &= o.converged;
        v1 = o.x;
    }
    let roots = BetheRoots { m, v0: v0.clone(), v1: v1.clone(), ..Default::default() };
    let (body, gdev) = check(&roots)?;
    res.body = body;
    res.g = gdev;
    let matched = converged && body <= opts.body_tol && gdev <= opts.g_tol;
    Ok(SpectrumRecord { lambda_body: lambda.body(), lambda_g: split(&lambda), m, v0, v1, residuals: res, matched })
}

/// Diagonal Bethe equations with denominators cleared. Unlike the balanced
/// form this grows away from the real axis, so Newton from random seeds does
/// not drift off to infinity.
fn bae_product_diag(v0: &[C64], p: &ModelParams) -> Result<Vec<C64>> {
    let e2 = 2.0 * p.eta;
    let two_n = 2 * p.n as u32;
    Ok(v0
        .iter()
        .enumerate()
        .map(|(l, &v)| {
            let mut a = sin(v + e2).powu(two_n) * sin(v + p.psi_minus) * sin(v + p.psi_plus);
            let mut b = sin(v).powu(two_n) * sin(v + e2 - p.psi_plus) * sin(v + e2 - p.psi_minus);
            for (j, &w) in v0.iter().enumerate() {
                if j != l {
                    a *= sin(v - w - e2) * sin(v + w);
                    b *= sin(v - w + e2) * sin(v + w + 2.0 * e2);
                }
            }
            a - b
        })
        .collect())
}

/// True when the roots stay finite (`|Im v| ≤ 6`; the balanced residual also
/// vanishes asymptotically) and no two coincide modulo `π` and the crossing
/// `v → −v−2η`, which would give a double zero of `Q`.
fn roots_are_proper(v: &[C64], eta: C64, tol: f64) -> bool {
    let close = |a: C64, b: C64| sin(a - b).norm() < tol;
    v.iter().all(|x| x.im.abs() <= ROOT_STRIP)
        && (0..v.len())
            .all(|i| !close(v[i], -v[i] - 2.0 * eta) && (i + 1..v.len()).all(|j| !close(v[i], v[j]) && !close(v[i], -v[j] - 2.0 * eta)))
}

/// A Bethe solution found without reference to exact diagonalization, with
/// its TQ eigenvalue at the reference point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultistartSolution {
    pub roots: BetheRoots,
    pub lambda: AlgebraElement,
}

const TIER_TWO_TRIES: usize = 10;
const ROOT_STRIP: f64 = 6.0;

/// Solves both tiers in sector `m` from `starts` random seeds in the strip
/// `|Re v| ≤ 1.6, |Im v| ≤ 1.5`, keeping distinct proper solutions. The Bethe
/// equations have more solutions than the sector has states; nothing here
/// selects the physical ones. Two
/// solutions are the same when their eigenvalues at `u_ref` agree to `1e-8`.
pub fn solve_multistart(
    p: &ModelParams,
    m: usize,
    starts: usize,
    seed: u64,
    u_ref: C64,
    opts: &NewtonOptions,
) -> Result<Vec<MultistartSolution>> {
    p.validate()?;
    if m > p.n {
        return Err(Error::InvalidArgument(format!("sector M = {m} exceeds N = {}", p.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |k: usize| -> Vec<C64> { (0..k).map(|_| C64::new(rng.gen_range(-1.6..1.6), rng.gen_range(-1.5..1.5))).collect() };
    let mut found: Vec<MultistartSolution> = Vec::new();
    let attempts = if m == 0 { 1 } else { starts };
    for _ in 0..attempts {
        let s0 = draw(m);
        let Ok(o0) = newton_solve(|x: &[C64]| bae_product_diag(x, p), &s0, opts) else { continue };
        let balanced = match bae_residual_diag(&o0.x, p) {
            Ok(r) => sup(&r),
            Err(_) => continue,
        };
        if balanced > 1e-10 || !roots_are_proper(&o0.x, p.eta, 1e-6) {
            continue;
        }
        let mut roots =
            BetheRoots { m, v0: o0.x, residual_diag: balanced, iterations: o0.iterations, converged: true, ..Default::default() };
        if !p.amps.is_diagonal() && m > 0 {
            let v0 = roots.v0.clone();
            let tier_two = (0..TIER_TWO_TRIES).find_map(|_| {
                newton_solve(|x: &[C64]| bae_residual_nondiag(&v0, x, p), &draw(m), opts)
                    .ok()
                    .filter(|o| o.converged && o.x.iter().all(|v| v.im.abs() <= ROOT_STRIP))
            });
            let Some(o) = tier_two else { continue };
            roots.v1 = o.x;
            roots.residual_nondiag = o.residual;
            roots.iterations += o.iterations;
        }
        let lambda = match lambda_tq(u_ref, &roots, p, TqMode::Full) {
            Ok(l) if l.max_abs().is_finite() => l,
            _ => continue,
        };
        let scale = lambda.max_abs().max(1.0);
        if found.iter().all(|f| (f.lambda - lambda).max_abs() > 1e-8 * scale) {
            found.push(MultistartSolution { roots, lambda });
        }
    }
    log::info!("sector M={m}: {} distinct solutions from {attempts} starts", found.len());
    Ok(found)
}

/// Solves both tiers for one eigenvalue, given samples of it.
pub fn solve_from_samples(p: &ModelParams, us: &[C64], samples: &[AlgebraElement], m: usize, opts: &NewtonOptions) -> Result<BetheRoots> {
    let body: Vec<C64> = samples.iter().map(|x| x.body()).collect();
    let (seed, _) = fit_q(p, us, &body, m)?;
    let o0 = newton_solve(|x: &[C64]| bae_residual_diag(x, p), &seed, opts)?;
    let mut roots =
        BetheRoots { m, v0: o0.x, residual_diag: o0.residual, iterations: o0.iterations, converged: o0.converged, ..Default::default() };
    if !p.amps.is_diagonal() && m > 0 {
        let g = p.g();
        let sign = if m.is_multiple_of(2) { -1.0 } else { 1.0 };
        let ld: Vec<C64> = body.iter().map(|x| -x).collect();
        let lg: Vec<C64> = samples.iter().map(|x| sign * g_component(x, &g).0).collect();
        let (seed1, _) = fit_b(p, us, &ld, &lg, &roots.v0)?;
        let v0 = roots.v0.clone();
        let o1 = newton_solve(|x: &[C64]| bae_residual_nondiag(&v0, x, p), &seed1, opts)?;
        roots.v1 = o1.x;
        roots.residual_nondiag = o1.residual;
        roots.iterations += o1.iterations;
        roots.converged &= o1.converged;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::c;

    #[test]
    fn poly_roots_quadratic() {
        // (w-1)(w-2) = w^2 - 3w + 2
        let mut r = poly_roots(&[re(2.0), re(-3.0), re(1.0)]).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((r[0] - re(1.0)).norm() < 1e-12 && (r[1] - re(2.0)).norm() < 1e-12);
    }

    #[test]
    fn q_poly_empty_and_crossing() {
        let e = c(0.3, 0.1);
        assert_eq!(q_poly(c(0.4, 0.2), &[], e), re(1.0));
        let roots = [c(0.2, 0.3), c(-0.5, 0.1)];
        let u = c(0.41, -0.2);
        assert!((q_poly(-u - 2.0 * e, &roots, e) - q_poly(u, &roots, e)).norm() < 1e-13);
    }

    #[test]
    fn newton_on_exact_seed() {
        let o = newton_solve(|x: &[C64]| Ok(vec![x[0] * x[0] - re(4.0)]), &[re(2.0)], &NewtonOptions::default()).unwrap();
        assert!(o.converged);
        assert_eq!(o.iterations, 0);
    }
}
