//! Jordan-Wigner map between the fermion chain and a spin-1/2 chain.
//!
//! An occupied site is spin down: `n_j = S−_j S+_j`. The string phase counts
//! up spins, so `c_j` here equals `(−1)^{j−1}` times the Fock-basis
//! annihilator of [`crate::model::annihilator`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::C64;
use crate::model::{hamiltonian, ModelParams};
use crate::superlinalg::{body_eig, CMat};
use crate::trig::{cot, re};

/// Single-site spin operator `op` (2×2, basis `[up, down]`) acting on site `j`.
fn site_op(n: usize, j: usize, op: [[f64; 2]; 2]) -> CMat {
    let dim = 1usize << n;
    let bit = 1usize << (j - 1);
    CMat::from_fn(dim, dim, |r, c| {
        if (r & !bit) != (c & !bit) {
            return re(0.0);
        }
        let (a, b) = (((r & bit) != 0) as usize, ((c & bit) != 0) as usize);
        re(op[a][b])
    })
}

pub struct SpinOps {
    pub n: usize,
    pub plus: Vec<CMat>,
    pub minus: Vec<CMat>,
    pub x: Vec<CMat>,
    pub y: Vec<CMat>,
    pub z: Vec<CMat>,
}

impl SpinOps {
    pub fn new(n: usize) -> Self {
        let plus: Vec<CMat> = (1..=n).map(|j| site_op(n, j, [[0.0, 1.0], [0.0, 0.0]])).collect();
        let minus: Vec<CMat> = (1..=n).map(|j| site_op(n, j, [[0.0, 0.0], [1.0, 0.0]])).collect();
        let z = (1..=n).map(|j| site_op(n, j, [[0.5, 0.0], [0.0, -0.5]])).collect();
        let x = (0..n).map(|j| (&plus[j] + &minus[j]) * faer::Scale(re(0.5))).collect();
        let y = (0..n).map(|j| (&plus[j] - &minus[j]) * faer::Scale(C64::new(0.0, -0.5))).collect();
        SpinOps { n, plus, minus, x, y, z }
    }

    fn identity(&self) -> CMat {
        CMat::identity(1 << self.n, 1 << self.n)
    }

    /// `e^{iφ_j} = Π_{ℓ<j} (1 − 2 S+_ℓ S−_ℓ)`.
    pub fn phase(&self, j: usize) -> CMat {
        let mut out = self.identity();
        for l in 0..j - 1 {
            let up = &self.plus[l] * &self.minus[l];
            out = &out * &(&self.identity() - &(&up * faer::Scale(re(2.0))));
        }
        out
    }
}

/// `(c_j, c†_j)` for `j = 1..=N`, with `c†_j = e^{iφ_j} S−_j`, `c_j = e^{−iφ_j} S+_j`.
pub fn jw_images(n: usize) -> Vec<(CMat, CMat)> {
    let s = SpinOps::new(n);
    (1..=n)
        .map(|j| {
            let ph = s.phase(j);
            (&ph * &s.plus[j - 1], &ph * &s.minus[j - 1])
        })
        .collect()
}

fn max_abs(m: &CMat) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// `max_{k,ℓ} ‖{c_k, c†_ℓ} − δ_kℓ‖` together with `‖{c_k, c_ℓ}‖`.
pub fn car_residual(n: usize) -> f64 {
    let ops = jw_images(n);
    let id = CMat::identity(1 << n, 1 << n);
    let mut worst: f64 = 0.0;
    for (k, (ck, _)) in ops.iter().enumerate() {
        for (l, (cl, cdl)) in ops.iter().enumerate() {
            let a = &(ck * cdl) + &(cdl * ck);
            let a = if k == l { &a - &id } else { a };
            worst = worst.max(max_abs(&a));
            worst = worst.max(max_abs(&(&(ck * cl) + &(cl * ck))));
        }
    }
    worst
}

/// `Σ_j [2t(SˣSˣ + SʸSʸ) + 2V SᶻSᶻ] + 2N0 Sᶻ_1 + (N+ + N−)(Sᶻ_N + ½)`, `N0 = ½ cot ψ−`.
pub fn xxz_hamiltonian(p: &ModelParams) -> CMat {
    let s = SpinOps::new(p.n);
    let (t, v) = (p.hop_t(), p.int_v());
    let mut h = CMat::zeros(1 << p.n, 1 << p.n);
    for j in 0..p.n - 1 {
        let xy = &(&s.x[j] * &s.x[j + 1]) + &(&s.y[j] * &s.y[j + 1]);
        h = &h + &(&xy * faer::Scale(2.0 * t));
        h = &h + &(&(&s.z[j] * &s.z[j + 1]) * faer::Scale(2.0 * v));
    }
    let n0 = 0.5 * cot(p.psi_minus);
    h = &h + &(&s.z[0] * faer::Scale(2.0 * n0));
    let last = &s.z[p.n - 1] + &(&s.identity() * faer::Scale(re(0.5)));
    &h + &(&last * faer::Scale(p.n_plus() + p.n_minus()))
}

/// `H_bulk + H_diag` written with the Jordan-Wigner images of the fermions.
pub fn polaron_from_images(p: &ModelParams) -> CMat {
    let n = p.n;
    let ops = jw_images(n);
    let id = CMat::identity(1 << n, 1 << n);
    let (t, v) = (p.hop_t(), p.int_v());
    let num: Vec<CMat> = ops.iter().map(|(c, cd)| cd * c).collect();
    let hole: Vec<CMat> = num.iter().map(|x| &id - x).collect();
    let mut h = CMat::zeros(1 << n, 1 << n);
    for j in 0..n - 1 {
        let hop = &(&ops[j + 1].1 * &ops[j].0) + &(&ops[j].1 * &ops[j + 1].0);
        h = &h + &(&hop * faer::Scale(-t));
        let nn = &(&num[j + 1] * &num[j]) + &(&hole[j + 1] * &hole[j]);
        h = &h + &(&nn * faer::Scale(v));
    }
    let n0 = 0.5 * cot(p.psi_minus);
    h = &h + &(&(&hole[0] - &num[0]) * faer::Scale(n0));
    h = &h + &(&hole[n - 1] * faer::Scale(p.n_plus()));
    &h - &(&num[n - 1] * faer::Scale(p.n_minus()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XxzComparison {
    /// `‖H − H_XXZ − c·1‖_max` with `H` from [`polaron_from_images`].
    pub residual: f64,
    /// Identity shift `V(N−1)/2 − N−` that the spin form leaves out.
    pub constant: C64,
    /// `‖H − H_XXZ‖_max` without the shift.
    pub unshifted: f64,
    /// Set distance between the spectrum of [`hamiltonian`] and that of
    /// `H_XXZ + c·1`.
    pub spectrum: f64,
    /// `‖D H_fock D − H‖_max` with `D = diag((−1)^{Σ_j (j−1) n_j})`, relating
    /// the Fock-basis construction to the one from the images.
    pub fock: f64,
}

/// Compares the diagonal-boundary Hamiltonian with its XXZ image.
pub fn xxz_equivalence_check(p: &ModelParams) -> Result<XxzComparison> {
    if !p.amps.is_diagonal() {
        return Err(Error::InvalidArgument("the Jordan-Wigner map does not cover the off-diagonal boundary terms".into()));
    }
    p.validate()?;
    let h_fock = hamiltonian(p)?.body();
    let h = polaron_from_images(p);
    let x = xxz_hamiltonian(p);
    let constant = p.int_v() * (p.n as f64 - 1.0) / 2.0 - p.n_minus();
    let id = CMat::identity(h.nrows(), h.ncols());
    let unshifted = max_abs(&(&h - &x));
    let shifted = &x + &(&id * faer::Scale(constant));
    let residual = max_abs(&(&h - &shifted));
    let d = |s: usize| -> f64 {
        let k: u32 = (1..=p.n).filter(|&j| (s >> (j - 1)) & 1 == 1).map(|j| (j - 1) as u32).sum();
        if k.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    };
    let conj = CMat::from_fn(h.nrows(), h.ncols(), |i, j| h_fock[(i, j)] * d(i) * d(j));
    let fock = max_abs(&(&conj - &h));
    let a: Vec<C64> = body_eig(&h_fock)?.into_iter().map(|e| e.value).collect();
    let b: Vec<C64> = body_eig(&shifted)?.into_iter().map(|e| e.value).collect();
    Ok(XxzComparison { residual, constant, unshifted, spectrum: set_distance(&a, &b), fock })
}

/// Symmetric Hausdorff distance, plus a multiplicity check via greedy pairing.
pub fn set_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for &x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &y)| (j, (x - y).norm()))
            .min_by(|l, r| l.1.total_cmp(&r.1))
            .expect("same length");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}
