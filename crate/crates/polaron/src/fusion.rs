//! Fusion hierarchy, quantum determinant, truncation at roots of unity and the
//! vanishing-determinant representation of the eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{AlgebraElement, C64};
use crate::model::{det2, k_minus, k_plus, transfer, ModelParams};
use crate::superlinalg::SuperMatrix;
use crate::trig::{re, sin};

/// `η_n = (π/2)/(n+1)`.
pub fn eta_n(n: usize) -> f64 {
    std::f64::consts::FRAC_PI_2 / (n as f64 + 1.0)
}

/// Parameters moved to the truncation point `η_n`. At `n = 1` the default
/// `K+` normalization diverges and is replaced by `1/(2 sin ψ+)` unless one is
/// already set.
pub fn at_root_of_unity(p: &ModelParams, n: usize) -> ModelParams {
    let mut q = p.with_eta(re(eta_n(n)));
    if n == 1 && q.kplus_norm.is_none() {
        q.kplus_norm = Some(1.0 / (2.0 * sin(q.psi_plus)));
    }
    q
}

/// `Δ(u) = ζ^{2N}(u+2η) g(−2u−6η) g(2u+2η) det K+(u) det K−(u+2η)`.
pub fn quantum_determinant(u: C64, p: &ModelParams) -> AlgebraElement {
    let e = p.eta;
    let pre = p.zeta(u + 2.0 * e).powu(2 * p.n as u32) * p.g_fn(-2.0 * u - 6.0 * e) * p.g_fn(2.0 * u + 2.0 * e);
    (det2(&k_plus(u, p)) * det2(&k_minus(u + 2.0 * e, p))).scale(pre)
}

/// `Δ̃(u) = Δ(u)/ζ(2u+4η)`, reduced to its body (the soul vanishes identically).
pub fn tilde_delta(u: C64, p: &ModelParams) -> Result<C64> {
    let z = p.zeta(2.0 * u + 4.0 * p.eta);
    if z.norm() < 1e-13 {
        return Err(Error::Pole { what: "ζ(2u+4η) in Δ̃", at: u });
    }
    Ok(quantum_determinant(u, p).body() / z)
}

/// `h(u) = (sin(u+2η)/sin 2η)^{2N} sin(2u+4η)/sin(2u+2η) g−(u) g+(u)` with
/// `g∓(u) = ω∓ sin(u+ψ∓)`.
pub fn h_fn(u: C64, p: &ModelParams) -> C64 {
    let e = p.eta;
    (sin(u + 2.0 * e) / sin(2.0 * e)).powu(2 * p.n as u32) * sin(2.0 * u + 4.0 * e) / sin(2.0 * u + 2.0 * e)
        * p.omega_minus()
        * sin(u + p.psi_minus)
        * p.omega_plus()
        * sin(u + p.psi_plus)
}

/// `h̃(u) = h(−u−4η)`.
pub fn h_tilde(u: C64, p: &ModelParams) -> C64 {
    h_fn(-u - 4.0 * p.eta, p)
}

/// `t^(0), ..., t^(n)` at one spectral parameter, built by
/// `t^(m+1)(u) = t^(m)(u) t^(1)(u+2mη) + Δ̃(u+2(m−1)η) t^(m−1)(u)`, `t^(1) = −t`.
pub fn fused_hierarchy(n: usize, u: C64, p: &ModelParams) -> Result<Vec<SuperMatrix>> {
    let t1 = -&transfer(u, p)?;
    let mut out = vec![SuperMatrix::identity(t1.rows().clone()), t1];
    for m in 1..n {
        let step = -&transfer(u + 2.0 * m as f64 * p.eta, p)?;
        let d = tilde_delta(u + 2.0 * (m as f64 - 1.0) * p.eta, p)?;
        let next = &out[m].matmul(&step) + &out[m - 1].scale_c(d);
        out.push(next);
    }
    out.truncate(n + 1);
    Ok(out)
}

pub fn fused_transfer(n: usize, u: C64, p: &ModelParams) -> Result<SuperMatrix> {
    Ok(fused_hierarchy(n, u, p)?.pop().expect("level 0 always present"))
}

/// The same recursion on eigenvalues: `Λ^(0) = 1`, `Λ^(1)(u) = −Λ(u)`.
pub fn fused_eigenvalues(n: usize, u: C64, p: &ModelParams, lambda: impl Fn(C64) -> C64) -> Result<Vec<C64>> {
    let mut out = vec![re(1.0), -lambda(u)];
    for m in 1..n {
        let d = tilde_delta(u + 2.0 * (m as f64 - 1.0) * p.eta, p)?;
        let next = out[m] * -lambda(u + 2.0 * m as f64 * p.eta) + d * out[m - 1];
        out.push(next);
    }
    out.truncate(n + 1);
    Ok(out)
}

/// `φ^τ_n(u) = −h(u) h̃(u+2(n−1)η)`.
pub fn phi_tau(n: usize, u: C64, p: &ModelParams) -> C64 {
    -h_fn(u, p) * h_tilde(u + 2.0 * (n as f64 - 1.0) * p.eta, p)
}

/// `φ^id_n(u) = (−1)^{n+1} [Π_{k=0}^{n} h(u+2kη) + Π_{k=−1}^{n−1} h̃(u+2kη)]`.
pub fn phi_id(n: usize, u: C64, p: &ModelParams) -> C64 {
    let e2 = 2.0 * p.eta;
    let a: C64 = (0..=n as i64).map(|k| h_fn(u + k as f64 * e2, p)).product();
    let b: C64 = (-1..n as i64).map(|k| h_tilde(u + k as f64 * e2, p)).product();
    let s = if n % 2 == 1 { 1.0 } else { -1.0 };
    (a + b) * s
}

/// The `φ` pair as literally composed from `M_n`, `μ±_n`, `ν±_n`, with `δ{K}`
/// read as the scalar `K00 K11` and `ω±_n` as `ω±` at `η_n`. Kept for
/// diagnostics; [`truncation_residual`] uses [`phi_id`] and [`phi_tau`].
pub fn displayed_phis(n: usize, u: C64, p: &ModelParams) -> (C64, C64) {
    let e = p.eta;
    let s2 = sin(2.0 * e);
    let nn = p.n as u32;
    let m_n = |x: C64| (0.5 / s2).powu(n as u32) * sin((n as f64 + 1.0) * x) / s2;
    let mu = |pm: f64, x: C64| {
        let k = if pm > 0.0 { k_plus(-x - 2.0 * e, p) } else { k_minus(x - 2.0 * e, p) };
        let mut r = pm * (*k.get(0, 0) * *k.get(1, 1)).body() * s2 / sin(2.0 * x - 4.0 * e);
        for k in 2..=2 * n {
            r *= sin(2.0 * x + k as f64 * 2.0 * e) / s2;
        }
        r
    };
    let nu = |pm: f64, x: C64| {
        let (w, psi) = if pm > 0.0 { (p.omega_plus(), p.psi_plus) } else { (p.omega_minus(), p.psi_minus) };
        let mut r = -pm * w / mu(pm, x) * (w / 2.0).powu(n as u32) * sin((n as f64 + 1.0) * (x - pm * psi));
        for i in 1..=n {
            for j in 1..=i {
                r *= sin(2.0 * x + (i + j) as f64 * 2.0 * e) / s2;
            }
        }
        r
    };
    let pid = m_n(u).powu(2 * nn) * mu(1.0, u) * mu(-1.0, u) * (nu(1.0, -u) * nu(-1.0, u) + nu(1.0, u) * nu(-1.0, -u));
    let ptau = p.zeta(u).powu(2 * nn) * mu(1.0, u) * mu(-1.0, u);
    (pid, ptau)
}

/// Relative residual `‖t^(n+1)(u) − φ^id_n(u) + φ^τ_n(u) t^(n−1)(u+2η)‖ / ‖t^(n+1)(u)‖`.
/// The caller supplies parameters with `η = η_n`.
pub fn truncation_residual(n: usize, u: C64, p: &ModelParams) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("truncation needs n ≥ 1".into()));
    }
    if (p.eta - re(eta_n(n))).norm() > 1e-14 {
        return Err(Error::InvalidArgument(format!("η must equal η_{n} = {}", eta_n(n))));
    }
    let lhs = fused_transfer(n + 1, u, p)?;
    let low = fused_transfer(n - 1, u + 2.0 * p.eta, p)?;
    let id = SuperMatrix::identity(lhs.rows().clone());
    let rhs = &id.scale_c(phi_id(n, u, p)) - &low.scale_c(phi_tau(n, u, p));
    Ok((&lhs - &rhs).max_abs() / lhs.max_abs().max(f64::MIN_POSITIVE))
}

/// Determinant of the cyclic `(n+1)×(n+1)` matrix with `Λ(u+2kη)` on the
/// diagonal, `−h̃(u+2(k−1)η)` above and `−h(u+2kη)` below (indices mod n+1).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetRep {
    pub det: AlgebraElement,
    /// `max|det|` over components divided by the product of row max-norms.
    pub relative: f64,
}

pub fn det_rep_matrix(u: C64, p: &ModelParams, samples: &[AlgebraElement]) -> Vec<Vec<AlgebraElement>> {
    let m = samples.len();
    let e2 = 2.0 * p.eta;
    let mut a = vec![vec![AlgebraElement::ZERO; m]; m];
    for k in 0..m {
        let x = u + k as f64 * e2;
        a[k][k] += samples[k];
        a[k][(k + 1) % m] -= AlgebraElement::scalar(h_tilde(x - e2, p));
        a[k][(k + m - 1) % m] -= AlgebraElement::scalar(h_fn(x, p));
    }
    a
}

/// Leibniz expansion; the entries are even, so products commute.
pub fn algebra_det(a: &[Vec<AlgebraElement>]) -> AlgebraElement {
    let m = a.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut total = AlgebraElement::ZERO;
    permute(&mut perm, 0, &mut |p| {
        let inversions = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let mut x = AlgebraElement::one();
        for (i, &j) in p.iter().enumerate() {
            x *= a[i][j];
        }
        total = if inversions % 2 == 0 { total + x } else { total - x };
    });
    total
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Vanishing-determinant check for one eigenvalue, sampled as
/// `samples[k] = Λ(u + 2kη)`, `k = 0..=n`.
pub fn det_rep_residual(u: C64, p: &ModelParams, samples: &[AlgebraElement]) -> Result<DetRep> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need n+1 ≥ 2 samples".into()));
    }
    let a = det_rep_matrix(u, p, samples);
    let det = algebra_det(&a);
    let rows: f64 = a.iter().map(|r| r.iter().map(|x| x.max_abs()).fold(0.0, f64::max)).product();
    Ok(DetRep { det, relative: det.max_abs() / rows })
}

/// `κ(u) = ω−ω+ (−sin(u−2η)/sin 2η)^{2N} sin(2u−4η)/sin(2u−2η) sin(u−ψ−) sin(u−ψ+)`,
/// so that `h+(u) = κ(u+2η)`.
pub fn kappa(u: C64, p: &ModelParams) -> C64 {
    let e = p.eta;
    p.omega_minus() * p.omega_plus() * (-sin(u - 2.0 * e) / sin(2.0 * e)).powu(2 * p.n as u32) * sin(2.0 * u - 4.0 * e)
        / sin(2.0 * u - 2.0 * e)
        * sin(u - p.psi_minus)
        * sin(u - p.psi_plus)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QRecursion {
    pub grid: Vec<C64>,
    /// `levels[n][i] = Q^(n)(grid[i])`, `None` where `κ` vanished.
    pub levels: Vec<Vec<Option<C64>>>,
    /// `sup_i |Q^(n) − Q^(n−1)|` for `n ≥ 1`.
    pub successive: Vec<f64>,
}

/// `Q^(n)(u) = Λ^(n)(u − 2nη) / Π_{k=0}^{n} κ(u − 2kη)`, `n = 0..=n_max`.
pub fn q_recursion(n_max: usize, grid: &[C64], lambda: impl Fn(C64) -> C64, p: &ModelParams) -> Result<QRecursion> {
    let e2 = 2.0 * p.eta;
    let mut levels = vec![Vec::with_capacity(grid.len()); n_max + 1];
    for &u in grid {
        for n in 0..=n_max {
            let x = u - n as f64 * e2;
            let lam = fused_eigenvalues(n, x, p, &lambda)?[n];
            let den: C64 = (0..=n).map(|k| kappa(u - k as f64 * e2, p)).product();
            if den.norm() < 1e-300 || !den.is_finite() {
                log::warn!("κ vanishes at grid point {u}; skipped");
                levels[n].push(None);
            } else {
                levels[n].push(Some(lam / den));
            }
        }
    }
    let successive = (1..=n_max).map(|n| sup_diff(&levels[n], &levels[n - 1])).collect();
    Ok(QRecursion { grid: grid.to_vec(), levels, successive })
}

fn sup_diff(a: &[Option<C64>], b: &[Option<C64>]) -> f64 {
    a.iter().zip(b).filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).norm())).fold(0.0, f64::max)
}

impl QRecursion {
    /// `sup_i |Q^(n)(u_i) − Q(u_i)|` per level.
    pub fn distance_to(&self, q: impl Fn(C64) -> C64) -> Vec<f64> {
        let target: Vec<Option<C64>> = self.grid.iter().map(|&u| Some(q(u))).collect();
        self.levels.iter().map(|l| sup_diff(l, &target)).collect()
    }

    /// Scale-free distance: `Q^(n)` rescaled by the least-squares factor onto
    /// `Q`, then divided by `sup|Q|`.
    pub fn projective_distance_to(&self, q: impl Fn(C64) -> C64) -> Vec<f64> {
        let target: Vec<C64> = self.grid.iter().map(|&u| q(u)).collect();
        let scale = target.iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.levels
            .iter()
            .map(|l| {
                let pairs: Vec<(C64, C64)> = l.iter().zip(&target).filter_map(|(x, y)| Some((*x.as_ref()?, *y))).collect();
                let num: C64 = pairs.iter().map(|(x, y)| x.conj() * y).sum();
                let den: f64 = pairs.iter().map(|(x, _)| x.norm_sqr()).sum();
                if den == 0.0 {
                    return f64::INFINITY;
                }
                let c = num / den;
                pairs.iter().map(|(x, y)| (x * c - y).norm()).fold(0.0, f64::max) / scale
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::Amplitudes;
    use crate::trig::c;

    fn params(n: usize) -> ModelParams {
        ModelParams::new(n, c(0.3, 0.1), c(0.7, 0.2), c(1.1, -0.3), Amplitudes::default())
    }

    #[test]
    fn delta_has_no_soul() {
        let p = params(3);
        assert!(quantum_determinant(c(0.31, -0.2), &p).soul().max_abs() < 1e-14);
    }

    #[test]
    fn level_zero_and_one() {
        let p = params(2);
        let u = c(0.2, 0.1);
        let l = fused_hierarchy(1, u, &p).unwrap();
        assert_eq!(l.len(), 2);
        assert!((&l[1] + &transfer(u, &p).unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn det_of_identity_and_swap() {
        let one = AlgebraElement::one();
        let z = AlgebraElement::ZERO;
        assert!((algebra_det(&[vec![one, z], vec![z, one]]) - one).max_abs() < 1e-15);
        assert!((algebra_det(&[vec![z, one], vec![one, z]]) + one).max_abs() < 1e-15);
    }
}
