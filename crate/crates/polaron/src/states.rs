//! The closed-form `M = 0` eigenvector of the Hamiltonian and the block
//! pattern of generic eigenvectors.
//!
//! Fock states are indexed by occupation bits with site 1 least significant;
//! `|s⟩ = c†_{i1} ··· c†_{ik} |Ω⟩` with `i1 < ... < ik`.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{AlgebraElement, Monomial, C64};
use crate::model::{hamiltonian, sector_gauge, ModelParams};
use crate::superlinalg::GradedEigenpair;
use crate::trig::{cot, csc, re, sin};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacuumCoefficients {
    /// `b+_ℓ`, `ℓ = 1..=N` at index `ℓ−1`.
    pub b_plus: Vec<C64>,
    pub b_minus: Vec<C64>,
    /// `B_kℓ` for `k < ℓ`, keyed by `(k, ℓ)`.
    pub big_b: BTreeMap<(usize, usize), C64>,
}

impl VacuumCoefficients {
    pub fn b(&self, k: usize, l: usize) -> C64 {
        self.big_b.get(&(k, l)).copied().unwrap_or(re(0.0))
    }
}

fn resonances(p: &ModelParams) -> (C64, C64) {
    let sig = p.psi_minus + p.psi_plus;
    let e2 = 2.0 * p.eta;
    let n = p.n as f64;
    (sin((n - 1.0) * e2 + sig), sin((n - 2.0) * e2 + sig))
}

/// Closed forms
/// `b+_ℓ = −sin(ψ− + (ℓ−1)2η)/sin((N−1)2η+Σ)`,
/// `b−_ℓ = −sin(ψ+ + (N−ℓ)2η)/sin((N−1)2η+Σ)`,
/// `B_kℓ = sin((N−1)2η+Σ)/sin((N−2)2η+Σ) (b+_{k+1} b−_ℓ + b−_k b+_{ℓ−1})`, `Σ = ψ− + ψ+`.
pub fn vacuum_coefficients(p: &ModelParams) -> Result<VacuumCoefficients> {
    p.validate()?;
    let (d1, d2) = resonances(p);
    if d1.norm() < 1e-12 || d2.norm() < 1e-12 {
        return Err(Error::InvalidParams("resonant denominator sin((N−1)2η+ψ−+ψ+) or sin((N−2)2η+ψ−+ψ+)".into()));
    }
    let e2 = 2.0 * p.eta;
    let n = p.n;
    // b+ extends to ℓ = N+1 and b− to ℓ = 0 through the same formulas
    let bp = |l: usize| -sin(p.psi_minus + (l as f64 - 1.0) * e2) / d1;
    let bm = |l: usize| -sin(p.psi_plus + (n as f64 - l as f64) * e2) / d1;
    let mut big_b = BTreeMap::new();
    for k in 1..=n {
        for l in k + 1..=n {
            big_b.insert((k, l), d1 / d2 * (bp(k + 1) * bm(l) + bm(k) * bp(l - 1)));
        }
    }
    Ok(VacuumCoefficients { b_plus: (1..=n).map(bp).collect(), b_minus: (1..=n).map(bm).collect(), big_b })
}

/// `λ_diag = V(N−1) + N+ + ½ cot ψ−` (energy of the Fock vacuum).
pub fn vacuum_energy(p: &ModelParams) -> C64 {
    p.int_v() * (p.n as f64 - 1.0) + p.n_plus() + 0.5 * cot(p.psi_minus)
}

/// `λ_nondiag = csc ψ− b+_1 = −1/sin((N−1)2η+ψ−+ψ+)`.
pub fn vacuum_nondiag(p: &ModelParams) -> C64 {
    -1.0 / resonances(p).0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VacuumState {
    pub n: usize,
    /// Left coefficient of each Fock ket, `|Ψ⟩ = Σ_s ψ_s |s⟩`.
    pub psi: Vec<AlgebraElement>,
    pub lambda_diag: C64,
    pub lambda_nondiag: C64,
}

impl VacuumState {
    /// Coefficient vector in the representation of [`hamiltonian`]: right
    /// coefficients `(−1)^{p(s)} ψ_s`, then the sector gauge.
    pub fn vector(&self) -> Vec<AlgebraElement> {
        self.psi
            .iter()
            .enumerate()
            .map(|(s, x)| {
                let parity = if s.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                x.scale(re(parity * sector_gauge(s)))
            })
            .collect()
    }

    pub fn eigenvalue(&self, p: &ModelParams) -> AlgebraElement {
        AlgebraElement::scalar(self.lambda_diag) + p.g().scale(self.lambda_nondiag)
    }

    /// Basis string (site N first) to nonzero coefficients.
    pub fn to_json_map(&self) -> BTreeMap<String, AlgebraElement> {
        self.psi.iter().enumerate().filter(|(_, x)| !x.is_zero(0.0)).map(|(s, x)| (format!("{:0w$b}", s, w = self.n), *x)).collect()
    }
}

pub fn vacuum_state(p: &ModelParams) -> Result<VacuumState> {
    let c = vacuum_coefficients(p)?;
    let n = p.n;
    let bp = p.amps.beta_plus();
    let bm = p.amps.beta_minus();
    let mut psi = vec![AlgebraElement::ZERO; 1 << n];
    psi[0] = AlgebraElement::one();
    for i in 1..=n {
        psi[1 << (i - 1)] = bp.scale(c.b_plus[i - 1]) + bm.scale(c.b_minus[i - 1]);
    }
    let bb = bp * bm;
    for (&(k, l), &v) in &c.big_b {
        psi[(1 << (k - 1)) | (1 << (l - 1))] = bb.scale(v);
    }
    Ok(VacuumState { n, psi, lambda_diag: vacuum_energy(p), lambda_nondiag: vacuum_nondiag(p) })
}

/// `max_s ‖(H Ψ − λ Ψ)_s‖`, with `λ = λ_diag + G λ_nondiag`, relative to the
/// largest entry of `H`.
pub fn vacuum_check(p: &ModelParams) -> Result<f64> {
    let st = vacuum_state(p)?;
    let h = hamiltonian(p)?;
    let v = st.vector();
    let hv = h.apply(&v);
    let lam = st.eigenvalue(p);
    let r = hv.iter().zip(&v).map(|(a, b)| (*a - lam * *b).max_abs()).fold(0.0, f64::max);
    Ok(r / h.max_abs().max(1.0))
}

/// Solves the linear relations for `b±_ℓ` and `B_kℓ` at a given `λ_diag`,
/// without using the closed forms. Requires `N ≥ 3`, where the relation
/// families are non-overlapping.
pub fn oracle_recursion(p: &ModelParams, lambda_diag: C64) -> Result<VacuumCoefficients> {
    p.validate()?;
    let n = p.n;
    if n < 3 {
        return Err(Error::InvalidArgument("the b/B relation families need N ≥ 3".into()));
    }
    let t = p.hop_t();
    let v = p.int_v();
    let (np, nm) = (p.n_plus(), p.n_minus());
    let ch = 0.5 * cot(p.psi_minus);
    let (cm, cp) = (csc(p.psi_minus), csc(p.psi_plus));
    let nf = n as f64;
    let c0 = v * (nf - 3.0) + ch + np - lambda_diag;

    // b+ and b−: N equations each
    let solve_b = |src1: C64, srcn: C64| -> Result<Vec<C64>> {
        let mut a = Mat::<C64>::zeros(n, n);
        let mut rhs = Mat::<C64>::zeros(n, 1);
        a[(0, 1)] = -t;
        a[(0, 0)] = v * (nf - 2.0) - ch + np - lambda_diag;
        rhs[(0, 0)] = -src1;
        a[(n - 1, n - 2)] = -t;
        a[(n - 1, n - 1)] = v * (nf - 2.0) + ch - nm - lambda_diag;
        rhs[(n - 1, 0)] = -srcn;
        for l in 1..n - 1 {
            a[(l, l - 1)] = -t;
            a[(l, l + 1)] = -t;
            a[(l, l)] = c0;
        }
        solve_dense(a, rhs)
    };
    let b_plus = solve_b(re(0.0), -cp)?;
    let b_minus = solve_b(-cm, re(0.0))?;

    let xi = |sign: f64, q: f64| lambda_diag + sign * ch - v * (nf - q);
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|k| (k + 1..=n).map(move |l| (k, l))).collect();
    let index: BTreeMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(i, &kl)| (kl, i)).collect();
    let dim = pairs.len();
    let mut a = Mat::<C64>::zeros(dim, dim);
    let mut rhs = Mat::<C64>::zeros(dim, 1);
    let bp = |l: usize| b_plus[l - 1];
    let bm = |l: usize| b_minus[l - 1];
    for (row, &(k, l)) in pairs.iter().enumerate() {
        let mut put = |kk: usize, ll: usize, coef: C64| {
            if let Some(&j) = index.get(&(kk, ll)) {
                a[(row, j)] += coef;
            }
        };
        let (diag, nbrs, src): (C64, Vec<(usize, usize)>, C64) = if k == 1 && l == n {
            (xi(1.0, 3.0) + nm, vec![(1, n - 1), (2, n)], bp(n) * cm + bm(1) * cp)
        } else if k == 1 && l == 2 {
            (xi(1.0, 2.0) - np, vec![(1, 3)], bp(2) * cm)
        } else if k == n - 1 && l == n {
            (xi(-1.0, 2.0) + nm, vec![(n - 2, n)], bm(n - 1) * cp)
        } else if l == n {
            (xi(-1.0, 4.0) + nm, vec![(k - 1, n), (k + 1, n), (k, n - 1)], bm(k) * cp)
        } else if k == 1 {
            (xi(1.0, 4.0) - np, vec![(1, l - 1), (1, l + 1), (2, l)], bp(l) * cm)
        } else if l == k + 1 {
            (xi(-1.0, 3.0) - np, vec![(k - 1, k + 1), (k, k + 2)], re(0.0))
        } else {
            (xi(-1.0, 5.0) - np, vec![(k - 1, l), (k + 1, l), (k, l - 1), (k, l + 1)], re(0.0))
        };
        put(k, l, diag);
        for (kk, ll) in nbrs {
            put(kk, ll, t);
        }
        rhs[(row, 0)] = -src;
    }
    let sol = solve_dense(a, rhs)?;
    let big_b = pairs.into_iter().zip(sol).collect();
    Ok(VacuumCoefficients { b_plus, b_minus, big_b })
}

fn solve_dense(a: Mat<C64>, rhs: Mat<C64>) -> Result<Vec<C64>> {
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<C64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    let back = &a * &x - &rhs;
    let scale = (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].norm()).fold(0.0, f64::max);
    let err = (0..back.nrows()).map(|i| back[(i, 0)].norm()).fold(0.0, f64::max);
    let xmax = out.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if out.iter().any(|z| !z.is_finite()) || err > 1e-8 * scale * xmax.max(1.0) {
        return Err(Error::Singular("vacuum relations are singular at these parameters".into()));
    }
    Ok(out)
}

/// Monomials allowed next to particle sector `M + shift` in the generic
/// eigenvector pattern.
fn allowed(shift: i64) -> &'static [Monomial] {
    match shift {
        0 => &[Monomial::ONE, Monomial::AP_BM, Monomial::BP_AM],
        1 => &[Monomial::BP, Monomial::BM],
        2 => &[Monomial::BP_BM],
        -1 => &[Monomial::AP, Monomial::AM],
        -2 => &[Monomial::AP_AM],
        _ => &[],
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnsatzBlock {
    pub sector: usize,
    pub monomial: String,
    pub norm: f64,
    pub allowed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnsatzReport {
    pub m: usize,
    /// `binomial(N, M)`.
    pub sector_dim: usize,
    pub blocks: Vec<AnsatzBlock>,
    /// Largest disallowed block norm relative to the body norm.
    pub leakage: f64,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Decomposes an eigenvector over (particle sector × monomial) blocks and
/// measures the weight outside the generic `M`-sector pattern.
pub fn project_generic_ansatz(pair: &GradedEigenpair, m: usize) -> AnsatzReport {
    let dim = pair.right.len();
    let n = dim.trailing_zeros() as usize;
    let body_norm = pair.right.iter().map(|x| x.body().norm_sqr()).sum::<f64>().sqrt();
    let mut blocks = Vec::new();
    let mut leakage: f64 = 0.0;
    for k in 0..=n {
        for mono in Monomial::ALL {
            let norm =
                (0..dim).filter(|s| s.count_ones() as usize == k).map(|s| pair.right[s].component(mono).norm_sqr()).sum::<f64>().sqrt();
            let ok = allowed(k as i64 - m as i64).contains(&mono);
            if !ok {
                leakage = leakage.max(norm / body_norm);
            }
            if norm > 0.0 {
                blocks.push(AnsatzBlock { sector: k, monomial: mono.key().to_string(), norm: norm / body_norm, allowed: ok });
            }
        }
    }
    AnsatzReport { m, sector_dim: binomial(n, m), blocks, leakage }
}
