//! Operators of the open chain: R- and K-matrices, monodromies, the super
//! transfer matrix and the Hamiltonian.
//!
//! Tensor layout of the transfer construction is `(aux, site N, ..., site 1)`,
//! so a physical Fock index is `Σ_j n_j 2^{j-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{grassmann_g, AlgebraElement, Amplitudes, Monomial, C64};
use crate::superlinalg::{graded_embed, partial_supertrace, GradedSpace, Layout, SuperMatrix};
use crate::trig::{cos, cot, csc, re, sin};

const GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub eta: C64,
    pub psi_minus: C64,
    pub psi_plus: C64,
    #[serde(default)]
    pub amps: Amplitudes,
    /// Overrides the `K+` normalization `1 / (2 cos 2η sin ψ+)`, which diverges
    /// at `η = π/4`. All identities used here are homogeneous in it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kplus_norm: Option<C64>,
}

impl ModelParams {
    pub fn new(n: usize, eta: C64, psi_minus: C64, psi_plus: C64, amps: Amplitudes) -> Self {
        ModelParams { n, eta, psi_minus, psi_plus, amps, kplus_norm: None }
    }

    pub fn with_eta(&self, eta: C64) -> Self {
        ModelParams { eta, ..self.clone() }
    }

    pub fn with_amps(&self, amps: Amplitudes) -> Self {
        ModelParams { amps, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        ModelParams { n, ..self.clone() }
    }

    pub fn diagonal(&self) -> Self {
        self.with_amps(Amplitudes::diagonal())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("N must be at least 1".into()));
        }
        if sin(2.0 * self.eta).norm() < GUARD {
            return Err(Error::InvalidParams("sin 2η = 0".into()));
        }
        if sin(self.psi_minus).norm() < GUARD || sin(self.psi_plus).norm() < GUARD {
            return Err(Error::InvalidParams("sin ψ± = 0".into()));
        }
        if self.kplus_norm.is_none() && cos(2.0 * self.eta).norm() < 1e-9 {
            return Err(Error::InvalidParams("cos 2η = 0 makes ω+ diverge; set kplus_norm".into()));
        }
        let all = [self.eta, self.psi_minus, self.psi_plus, self.amps.a_plus, self.amps.b_plus, self.amps.a_minus, self.amps.b_minus];
        if all.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn omega_minus(&self) -> C64 {
        csc(self.psi_minus)
    }

    pub fn omega_plus(&self) -> C64 {
        self.kplus_norm.unwrap_or_else(|| 1.0 / (2.0 * cos(2.0 * self.eta) * sin(self.psi_plus)))
    }

    pub fn hop_t(&self) -> C64 {
        -csc(2.0 * self.eta)
    }

    pub fn int_v(&self) -> C64 {
        cot(2.0 * self.eta)
    }

    pub fn n_plus(&self) -> C64 {
        0.5 * csc(2.0 * self.eta) * csc(self.psi_plus) * sin(2.0 * self.eta + self.psi_plus)
    }

    pub fn n_minus(&self) -> C64 {
        0.5 * csc(2.0 * self.eta) * csc(self.psi_plus) * sin(2.0 * self.eta - self.psi_plus)
    }

    pub fn g_fn(&self, u: C64) -> C64 {
        sin(u - 2.0 * self.eta) / sin(2.0 * self.eta)
    }

    pub fn zeta(&self, u: C64) -> C64 {
        self.g_fn(u) * self.g_fn(-u)
    }

    pub fn g(&self) -> AlgebraElement {
        grassmann_g(&self.amps)
    }

    /// Factor index of site `j` (1-based) in the transfer layout.
    pub fn site_factor(&self, j: usize) -> usize {
        self.n - j + 1
    }

    pub fn transfer_layout(&self) -> Layout {
        Layout::uniform(self.n + 1)
    }
}

/// The R-matrix on `C^{1|1} ⊗ C^{1|1}`, normalized by `1/sin 2η`.
pub fn r_matrix(u: C64, eta: C64) -> Result<SuperMatrix> {
    let s2 = sin(2.0 * eta);
    if s2.norm() < GUARD {
        return Err(Error::InvalidParams("sin 2η = 0".into()));
    }
    let sp = GradedSpace::fock(2);
    let mut r = SuperMatrix::zeros(sp.clone(), sp);
    let a = AlgebraElement::scalar(sin(u + 2.0 * eta) / s2);
    let b = AlgebraElement::scalar(sin(u) / s2);
    r.set(0, 0, a);
    r.set(1, 1, b);
    r.set(2, 2, b);
    r.set(1, 2, AlgebraElement::one());
    r.set(2, 1, AlgebraElement::one());
    r.set(3, 3, -a);
    Ok(r)
}

fn two_site(op: &SuperMatrix, f1: usize, f2: usize, nf: usize) -> SuperMatrix {
    graded_embed(op, &[f1, f2], &Layout::uniform(nf)).expect("factor indices in range")
}

/// `‖R12(λ)R13(λ+μ)R23(μ) − R23(μ)R13(λ+μ)R12(λ)‖_max`.
pub fn ybe_residual(u: C64, mu: C64, eta: C64) -> Result<f64> {
    let r12 = two_site(&r_matrix(u, eta)?, 0, 1, 3);
    let r13 = two_site(&r_matrix(u + mu, eta)?, 0, 2, 3);
    let r23 = two_site(&r_matrix(mu, eta)?, 1, 2, 3);
    let lhs = r12.matmul(&r13).matmul(&r23);
    let rhs = r23.matmul(&r13).matmul(&r12);
    Ok((&lhs - &rhs).max_abs())
}

/// `‖R12(u)R21(−u) − ζ(u)‖_max`.
pub fn unitarity_residual(u: C64, eta: C64) -> Result<f64> {
    let p = ModelParams::new(1, eta, re(1.0), re(1.0), Amplitudes::diagonal());
    let r12 = two_site(&r_matrix(u, eta)?, 0, 1, 2);
    let r21 = two_site(&r_matrix(-u, eta)?, 1, 0, 2);
    let id = SuperMatrix::identity(GradedSpace::fock(2));
    Ok((&r12.matmul(&r21) - &id.scale_c(p.zeta(u))).max_abs())
}

/// `‖R21^{st2}(−u−4η) R21^{st1}(u) − ζ(u+2η)‖_max`, with the supertranspose
/// convention of [`crate::superlinalg::super_transpose`] on factor 2 and its
/// inverse on factor 1.
pub fn crossing_residual(u: C64, eta: C64) -> Result<f64> {
    use crate::superlinalg::{super_transpose, super_transpose_inv};
    let p = ModelParams::new(1, eta, re(1.0), re(1.0), Amplitudes::diagonal());
    let lay = Layout::uniform(2);
    let a = super_transpose(&two_site(&r_matrix(-u - 4.0 * eta, eta)?, 1, 0, 2), 1, &lay)?;
    let b = super_transpose_inv(&two_site(&r_matrix(u, eta)?, 1, 0, 2), 0, &lay)?;
    let id = SuperMatrix::identity(GradedSpace::fock(2));
    Ok((&a.matmul(&b) - &id.scale_c(p.zeta(u + 2.0 * eta))).max_abs())
}

/// `R(u+π) = −σ^z_1 R(u) σ^z_1 = −σ^z_2 R(u) σ^z_2`; returns the larger residual.
pub fn periodicity_residual(u: C64, eta: C64) -> Result<f64> {
    let r = r_matrix(u, eta)?;
    let rp = r_matrix(u + re(std::f64::consts::PI), eta)?;
    let sz = |k: usize| {
        let sp = GradedSpace::fock(2);
        SuperMatrix::from_fn(sp.clone(), sp, |i, j| {
            if i != j {
                return AlgebraElement::ZERO;
            }
            let bit = if k == 1 { i >> 1 } else { i & 1 };
            AlgebraElement::real(if bit == 0 { 1.0 } else { -1.0 })
        })
    };
    let mut worst: f64 = 0.0;
    for k in [1, 2] {
        let s = sz(k);
        let conj = s.matmul(&r).matmul(&s);
        worst = worst.max((&rp + &conj).max_abs());
    }
    Ok(worst)
}

pub fn k_minus(u: C64, p: &ModelParams) -> SuperMatrix {
    let w = p.omega_minus();
    let sp = GradedSpace::local();
    let mut k = SuperMatrix::zeros(sp.clone(), sp);
    k.set(0, 0, AlgebraElement::scalar(w * sin(u + p.psi_minus)));
    k.set(0, 1, p.amps.alpha_minus().scale(w * sin(2.0 * u)));
    k.set(1, 0, p.amps.beta_minus().scale(w * sin(2.0 * u)));
    k.set(1, 1, AlgebraElement::scalar(-w * sin(u - p.psi_minus)));
    k
}

pub fn k_plus(u: C64, p: &ModelParams) -> SuperMatrix {
    let w = p.omega_plus();
    let e2 = 2.0 * p.eta;
    let sp = GradedSpace::local();
    let mut k = SuperMatrix::zeros(sp.clone(), sp);
    k.set(0, 0, AlgebraElement::scalar(w * sin(u + e2 + p.psi_plus)));
    k.set(0, 1, p.amps.alpha_plus().scale(w * sin(2.0 * u + 2.0 * e2)));
    k.set(1, 0, p.amps.beta_plus().scale(w * sin(2.0 * u + 2.0 * e2)));
    k.set(1, 1, AlgebraElement::scalar(w * sin(u + e2 - p.psi_plus)));
    k
}

/// `K00 K11 − K01 K10`; the odd products vanish since `α β = 0`.
pub fn det2(k: &SuperMatrix) -> AlgebraElement {
    *k.get(0, 0) * *k.get(1, 1) - *k.get(0, 1) * *k.get(1, 0)
}

/// `T(u) = R_{N0} ··· R_{10}` on the transfer layout.
pub fn monodromy(u: C64, p: &ModelParams) -> Result<SuperMatrix> {
    let r = r_matrix(u, p.eta)?;
    let nf = p.n + 1;
    let mut t = SuperMatrix::identity(p.transfer_layout().space());
    for j in (1..=p.n).rev() {
        t = t.matmul(&two_site(&r, p.site_factor(j), 0, nf));
    }
    Ok(t)
}

/// `T̂(u) = R_{01} ··· R_{0N}` on the transfer layout.
pub fn hat_monodromy(u: C64, p: &ModelParams) -> Result<SuperMatrix> {
    let r = r_matrix(u, p.eta)?;
    let nf = p.n + 1;
    let mut t = SuperMatrix::identity(p.transfer_layout().space());
    for j in 1..=p.n {
        t = t.matmul(&two_site(&r, 0, p.site_factor(j), nf));
    }
    Ok(t)
}

/// `t(u) = str_0 { K+(u) T(u) K−(u) T̂(u) }` on the `2^N` Fock space.
pub fn transfer(u: C64, p: &ModelParams) -> Result<SuperMatrix> {
    p.validate()?;
    let lay = p.transfer_layout();
    let kp = graded_embed(&k_plus(u, p), &[0], &lay)?;
    let km = graded_embed(&k_minus(u, p), &[0], &lay)?;
    let x = kp.matmul(&monodromy(u, p)?).matmul(&km).matmul(&hat_monodromy(u, p)?);
    partial_supertrace(&x, 0, &lay)
}

/// Fermion annihilator `c_j` (1-based) with Jordan-Wigner strings over `l < j`.
pub fn annihilator(n: usize, j: usize) -> Vec<(usize, usize, f64)> {
    let dim = 1usize << n;
    let mut out = Vec::new();
    for s in 0..dim {
        if s >> (j - 1) & 1 == 1 {
            let string = (s & ((1 << (j - 1)) - 1)).count_ones();
            out.push((s ^ (1 << (j - 1)), s, if string.is_multiple_of(2) { 1.0 } else { -1.0 }));
        }
    }
    out
}

fn occupation(s: usize, j: usize) -> f64 {
    ((s >> (j - 1)) & 1) as f64
}

/// Sector gauge `(−1)^{k(k−1)/2}` relating the physical fermionic operator to
/// its supermatrix representation in the transfer basis.
pub fn sector_gauge(s: usize) -> f64 {
    let k = s.count_ones();
    if (k * k.saturating_sub(1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Explicit Fock-space Hamiltonian `H_bulk + H_diag + H_nondiag`, written in
/// the supermatrix representation in which `t'(0) = 2H + const`.
///
/// Odd amplitudes are placed as right coefficients of kets, i.e. a matrix
/// element picks up `(−1)^{p(row)}` relative to the bare operator, and the
/// result is conjugated by [`sector_gauge`].
pub fn hamiltonian(p: &ModelParams) -> Result<SuperMatrix> {
    p.validate()?;
    let n = p.n;
    let dim = 1usize << n;
    let sp = GradedSpace::fock(n);
    let (t, v) = (p.hop_t(), p.int_v());
    let mut h = SuperMatrix::zeros(sp.clone(), sp);
    for s in 0..dim {
        let mut diag = re(0.0);
        for j in 1..n {
            let (a, b) = (occupation(s, j), occupation(s, j + 1));
            diag += v * (a * b + (1.0 - a) * (1.0 - b));
        }
        let n1 = occupation(s, 1);
        let nn = occupation(s, n);
        diag += p.n_plus() * (1.0 - nn) - p.n_minus() * nn + 0.5 * cot(p.psi_minus) * (1.0 - 2.0 * n1);
        *h.get_mut(s, s) += AlgebraElement::scalar(diag);
    }
    // hopping: -t (c†_{j+1} c_j + c†_j c_{j+1})
    for j in 1..n {
        for (a, b) in [(j + 1, j), (j, j + 1)] {
            for (mid, col, s1) in annihilator(n, b) {
                if (mid >> (a - 1)) & 1 == 0 {
                    let r = mid | (1 << (a - 1));
                    let s2 = annihilator_sign(r, a);
                    *h.get_mut(r, col) += AlgebraElement::scalar(-t * s1 * s2);
                }
            }
        }
    }
    let odd = |h: &mut SuperMatrix, site: usize, dagger: bool, amp: AlgebraElement, coef: C64| {
        for (r, c, s) in annihilator(n, site) {
            let (row, col) = if dagger { (c, r) } else { (r, c) };
            let ps = if row.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            *h.get_mut(row, col) += amp.scale(coef * s * ps);
        }
    };
    let cm = csc(p.psi_minus);
    let cp = csc(p.psi_plus);
    odd(&mut h, 1, false, p.amps.alpha_minus(), cm);
    odd(&mut h, 1, true, p.amps.beta_minus(), -cm);
    odd(&mut h, n, false, p.amps.alpha_plus(), cp);
    odd(&mut h, n, true, p.amps.beta_plus(), -cp);
    Ok(gauge(&h))
}

fn annihilator_sign(s: usize, j: usize) -> f64 {
    if (s & ((1 << (j - 1)) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Conjugation by the sector gauge.
pub fn gauge(m: &SuperMatrix) -> SuperMatrix {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let s = sector_gauge(i) * sector_gauge(j);
            if s < 0.0 {
                out.set(i, j, -*m.get(i, j));
            }
        }
    }
    out
}

/// Finite-difference options for [`hamiltonian_from_transfer`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DerivOptions {
    pub step: f64,
    pub max_mismatch: f64,
}

impl Default for DerivOptions {
    fn default() -> Self {
        DerivOptions { step: 1e-3, max_mismatch: 1e-6 }
    }
}

/// `H_num = (t'(0) − const)/2`, with the derivative from a fourth-order
/// central stencil plus one Richardson step and `const` fixed by trace
/// matching against [`hamiltonian`].
pub fn hamiltonian_from_transfer(p: &ModelParams, opts: &DerivOptions) -> Result<(SuperMatrix, AlgebraElement)> {
    let d = |h: f64| -> Result<SuperMatrix> {
        let f = |x: f64| transfer(re(x), p);
        let (a, b, c, e) = (f(2.0 * h)?, f(h)?, f(-h)?, f(-2.0 * h)?);
        let num = &(&b.scale_c(re(8.0)) - &c.scale_c(re(8.0))) - &(&a - &e);
        Ok(num.scale_c(re(1.0 / (12.0 * h))))
    };
    let coarse = d(opts.step)?;
    let fine = d(opts.step / 2.0)?;
    let mismatch = (&fine - &coarse).max_abs();
    if mismatch > opts.max_mismatch {
        return Err(Error::NoConvergence(format!("derivative stencil mismatch {mismatch:.3e}")));
    }
    let deriv = (&fine.scale_c(re(16.0)) - &coarse).scale_c(re(1.0 / 15.0));
    let h = hamiltonian(p)?;
    let x = &deriv - &h.scale_c(re(2.0));
    let dim = x.nrows() as f64;
    let c = x.trace().scale(re(1.0 / dim));
    let id = SuperMatrix::identity(h.rows().clone());
    let hn = (&deriv - &id.scale(c)).scale_c(re(0.5));
    Ok((hn, c))
}

/// Largest deviation of `(sin 2ε)^{2N} t(u; η=ε)` from the η → 0 limit formula.
///
/// The limit formula enters with an overall minus sign, i.e. the residual is
/// `‖(sin 2ε)^{2N} t + limit‖`.
pub fn semiclassical_residual(u: C64, p: &ModelParams, eps: f64) -> Result<f64> {
    let q = p.with_eta(re(eps));
    let n = q.n;
    let t = transfer(u, &q)?.scale_c(sin(re(2.0 * eps)).powu(2 * n as u32));
    let pre = sin(u).powu(2 * n as u32) / (sin(q.psi_plus) * sin(q.psi_minus));
    let g = q.g();
    let sp = GradedSpace::fock(n);
    let idc = -(cos(u) * cos(u) * sin(q.psi_minus) * sin(q.psi_plus) + sin(u) * sin(u) * cos(q.psi_minus) * cos(q.psi_plus));
    let rhs = SuperMatrix::from_fn(sp.clone(), sp, |i, j| {
        if i != j {
            return AlgebraElement::ZERO;
        }
        let sz = if i.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        (g.scale(2.0 * sin(u) * sin(u) * cos(u) * cos(u) * sz) + AlgebraElement::scalar(idc)).scale(pre)
    });
    Ok((&t + &rhs).max_abs())
}

/// Outcome of the large-`z` comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Asymptotic {
    /// Relative residual of the leading `G`-term, maximized over the samples.
    Residual(f64),
    /// `G = 0`: no `G`-leading term exists.
    NoGLeadingTerm,
}

/// Compares `t(u)` at `u = x − iY` (so `z = e^{iu}` is large) with the
/// leading asymptotic operator, on ratios only.
pub fn asymptotic_residual(p: &ModelParams, x: f64, ys: &[f64]) -> Result<Asymptotic> {
    let g = p.g();
    if g.max_abs() == 0.0 {
        return Ok(Asymptotic::NoGLeadingTerm);
    }
    let n = p.n;
    let e = p.eta;
    let i = C64::i();
    let dim = 1usize << n;
    // diagonal operator Π_j (n̄_j − e^{2iη} n_j)(n_j + e^{2iη} n̄_j)
    let q = (2.0 * i * e).exp();
    let op: Vec<C64> = (0..dim)
        .map(|s| {
            (1..=n).fold(re(1.0), |acc, j| {
                let nj = occupation(s, j);
                acc * (re(1.0 - nj) - q * nj) * (re(nj) + q * (1.0 - nj))
            })
        })
        .collect();
    let gscale = g.max_abs();
    let mut worst: f64 = 0.0;
    for &y in ys {
        let u = C64::new(x, -y);
        let z = (i * u).exp();
        let pre =
            (z / (2.0 * i * sin(2.0 * e))).powu(2 * n as u32) * p.omega_plus() * p.omega_minus() / 4.0 * z.powu(4) * (4.0 * i * e).exp();
        let t = transfer(u, p)?.scale_c(1.0 / pre);
        for a in 0..dim {
            for b in 0..dim {
                let pred = if a == b { g.scale(op[a]) } else { AlgebraElement::ZERO };
                worst = worst.max((*t.get(a, b) - pred).max_abs() / gscale);
            }
        }
    }
    Ok(Asymptotic::Residual(worst))
}

/// Largest coefficient of `{A+A−}` or `{B+B−}` in an element.
pub fn non_g_degree2(x: &AlgebraElement) -> f64 {
    x.component(Monomial::AP_AM).norm().max(x.component(Monomial::BP_BM).norm())
}
