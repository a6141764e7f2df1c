//! Graded linear algebra over the Grassmann algebra.
//!
//! Index convention for tensor products: the first factor is the most
//! significant digit of a flattened index.

use std::ops::{Add, Mul, Neg, Sub};

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{AlgebraElement, Monomial, C64};

pub type CMat = Mat<C64>;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

fn sign(bit: u32) -> f64 {
    if bit.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Parity labels of a basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedSpace {
    parities: Vec<u8>,
}

impl GradedSpace {
    pub fn new(parities: Vec<u8>) -> Self {
        GradedSpace { parities: parities.into_iter().map(|p| p % 2).collect() }
    }

    /// The local space `C^{1|1}`: index 0 even, index 1 odd.
    pub fn local() -> Self {
        Self::new(vec![0, 1])
    }

    pub fn trivial() -> Self {
        Self::new(vec![0])
    }

    /// Purely even space of dimension `n`.
    pub fn even(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    /// `n`-fold graded product of local spaces.
    pub fn fock(n: usize) -> Self {
        Self::new((0..1usize << n).map(|i| (i.count_ones() % 2) as u8).collect())
    }

    pub fn dim(&self) -> usize {
        self.parities.len()
    }

    pub fn parity(&self, i: usize) -> u8 {
        self.parities[i]
    }

    pub fn parities(&self) -> &[u8] {
        &self.parities
    }

    pub fn product(&self, other: &GradedSpace) -> GradedSpace {
        let mut p = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.parities {
            for b in &other.parities {
                p.push((a + b) % 2);
            }
        }
        GradedSpace { parities: p }
    }
}

/// An ordered list of tensor factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    factors: Vec<GradedSpace>,
}

impl Layout {
    pub fn new(factors: Vec<GradedSpace>) -> Self {
        Layout { factors }
    }

    pub fn uniform(n: usize) -> Self {
        Layout { factors: vec![GradedSpace::local(); n] }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factor(&self, k: usize) -> &GradedSpace {
        &self.factors[k]
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).product()
    }

    pub fn space(&self) -> GradedSpace {
        self.factors.iter().fold(GradedSpace::trivial(), |acc, f| acc.product(f))
    }

    pub fn split(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for k in (0..self.len()).rev() {
            let d = self.factors[k].dim();
            out[k] = idx % d;
            idx /= d;
        }
        out
    }

    pub fn join(&self, parts: &[usize]) -> usize {
        parts.iter().zip(&self.factors).fold(0, |acc, (i, f)| acc * f.dim() + i)
    }

    pub fn without(&self, k: usize) -> Layout {
        let mut f = self.factors.clone();
        f.remove(k);
        Layout { factors: f }
    }
}

/// Dense matrix with Grassmann-valued entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperMatrix {
    rows: GradedSpace,
    cols: GradedSpace,
    data: Vec<AlgebraElement>,
}

impl SuperMatrix {
    pub fn zeros(rows: GradedSpace, cols: GradedSpace) -> Self {
        let n = rows.dim() * cols.dim();
        SuperMatrix { rows, cols, data: vec![AlgebraElement::ZERO; n] }
    }

    pub fn identity(space: GradedSpace) -> Self {
        let mut m = Self::zeros(space.clone(), space);
        let n = m.nrows();
        for i in 0..n {
            m.data[i * n + i] = AlgebraElement::one();
        }
        m
    }

    pub fn from_fn(rows: GradedSpace, cols: GradedSpace, f: impl Fn(usize, usize) -> AlgebraElement) -> Self {
        let nc = cols.dim();
        let data = (0..rows.dim() * nc).map(|k| f(k / nc, k % nc)).collect();
        SuperMatrix { rows, cols, data }
    }

    pub fn from_complex(rows: GradedSpace, cols: GradedSpace, m: &CMat) -> Self {
        Self::from_fn(rows, cols, |i, j| AlgebraElement::scalar(m[(i, j)]))
    }

    pub fn rows(&self) -> &GradedSpace {
        &self.rows
    }

    pub fn cols(&self) -> &GradedSpace {
        &self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows.dim()
    }

    pub fn ncols(&self) -> usize {
        self.cols.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> &AlgebraElement {
        &self.data[i * self.ncols() + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut AlgebraElement {
        let nc = self.ncols();
        &mut self.data[i * nc + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: AlgebraElement) {
        *self.get_mut(i, j) = x;
    }

    pub fn component(&self, m: Monomial) -> CMat {
        CMat::from_fn(self.nrows(), self.ncols(), |i, j| self.get(i, j).component(m))
    }

    pub fn body(&self) -> CMat {
        self.component(Monomial::ONE)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.max_abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_component(&self, m: Monomial) -> f64 {
        self.data.iter().map(|x| x.component(m).norm()).fold(0.0, f64::max)
    }

    /// Left multiplication of every entry by `x`.
    pub fn scale(&self, x: AlgebraElement) -> Self {
        SuperMatrix { rows: self.rows.clone(), cols: self.cols.clone(), data: self.data.iter().map(|e| x * *e).collect() }
    }

    pub fn scale_c(&self, z: C64) -> Self {
        SuperMatrix { rows: self.rows.clone(), cols: self.cols.clone(), data: self.data.iter().map(|e| e.scale(z)).collect() }
    }

    pub fn map(&self, f: impl Fn(&AlgebraElement) -> AlgebraElement) -> Self {
        SuperMatrix { rows: self.rows.clone(), cols: self.cols.clone(), data: self.data.iter().map(f).collect() }
    }

    pub fn matmul(&self, other: &SuperMatrix) -> SuperMatrix {
        assert_eq!(self.ncols(), other.nrows(), "shape mismatch in matmul");
        let (n, k, m) = (self.nrows(), self.ncols(), other.ncols());
        let mut out = SuperMatrix::zeros(self.rows.clone(), other.cols.clone());
        let body_only = self.is_body_only() && other.is_body_only();
        for i in 0..n {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a.max_abs() == 0.0 {
                    continue;
                }
                let row = &other.data[l * m..(l + 1) * m];
                let dst = &mut out.data[i * m..(i + 1) * m];
                if body_only {
                    let a0 = a.c[0];
                    for (d, b) in dst.iter_mut().zip(row) {
                        d.c[0] += a0 * b.c[0];
                    }
                } else {
                    for (d, b) in dst.iter_mut().zip(row) {
                        if b.max_abs() != 0.0 {
                            *d += a * *b;
                        }
                    }
                }
            }
        }
        out
    }

    fn is_body_only(&self) -> bool {
        self.data.iter().all(|x| x.c[1..].iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }

    pub fn apply(&self, v: &[AlgebraElement]) -> Vec<AlgebraElement> {
        assert_eq!(v.len(), self.ncols());
        (0..self.nrows())
            .map(|i| {
                let mut acc = AlgebraElement::ZERO;
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if a.max_abs() != 0.0 && x.max_abs() != 0.0 {
                        acc += *a * *x;
                    }
                }
                acc
            })
            .collect()
    }

    /// Row vector times matrix.
    pub fn apply_left(&self, w: &[AlgebraElement]) -> Vec<AlgebraElement> {
        assert_eq!(w.len(), self.nrows());
        (0..self.ncols())
            .map(|j| {
                let mut acc = AlgebraElement::ZERO;
                for (i, x) in w.iter().enumerate() {
                    let a = self.get(i, j);
                    if a.max_abs() != 0.0 && x.max_abs() != 0.0 {
                        acc += *x * *a;
                    }
                }
                acc
            })
            .collect()
    }

    pub fn commutator(&self, other: &SuperMatrix) -> SuperMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    /// Entry `(a, b)` has Grassmann parity `p(a) + p(b)`.
    pub fn is_grade_consistent(&self, tol: f64) -> bool {
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                let want = (self.rows.parity(i) + self.cols.parity(j)) % 2;
                let wrong = if want == 0 { crate::grassmann::Parity::Odd } else { crate::grassmann::Parity::Even };
                if self.get(i, j).parity_project(wrong).max_abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Ordinary trace.
    pub fn trace(&self) -> AlgebraElement {
        (0..self.nrows().min(self.ncols())).fold(AlgebraElement::ZERO, |acc, i| acc + *self.get(i, i))
    }

    pub fn entries(&self) -> &[AlgebraElement] {
        &self.data
    }
}

impl Add for &SuperMatrix {
    type Output = SuperMatrix;
    fn add(self, rhs: &SuperMatrix) -> SuperMatrix {
        assert_eq!((self.nrows(), self.ncols()), (rhs.nrows(), rhs.ncols()));
        SuperMatrix {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl Sub for &SuperMatrix {
    type Output = SuperMatrix;
    fn sub(self, rhs: &SuperMatrix) -> SuperMatrix {
        assert_eq!((self.nrows(), self.ncols()), (rhs.nrows(), rhs.ncols()));
        SuperMatrix {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl Neg for &SuperMatrix {
    type Output = SuperMatrix;
    fn neg(self) -> SuperMatrix {
        self.map(|x| -*x)
    }
}

impl Mul for &SuperMatrix {
    type Output = SuperMatrix;
    fn mul(self, rhs: &SuperMatrix) -> SuperMatrix {
        self.matmul(rhs)
    }
}

/// `(A ⊗ B)^{ac}_{bd} = (-1)^{(p(a)+p(b)) p(c)} A^a_b B^c_d`.
pub fn graded_tensor(a: &SuperMatrix, b: &SuperMatrix) -> SuperMatrix {
    let rows = a.rows.product(&b.rows);
    let cols = a.cols.product(&b.cols);
    let mut out = SuperMatrix::zeros(rows, cols);
    let (bn, bm) = (b.nrows(), b.ncols());
    for ia in 0..a.nrows() {
        for ja in 0..a.ncols() {
            let x = *a.get(ia, ja);
            if x.max_abs() == 0.0 {
                continue;
            }
            let pab = (a.rows.parity(ia) + a.cols.parity(ja)) as u32;
            for ib in 0..bn {
                let s = sign(pab * b.rows.parity(ib) as u32);
                for jb in 0..bm {
                    let y = *b.get(ib, jb);
                    if y.max_abs() == 0.0 {
                        continue;
                    }
                    out.set(ia * bn + ib, ja * bm + jb, (x * y).scale(C64::new(s, 0.0)));
                }
            }
        }
    }
    out
}

/// Embeds `op`, acting on the product of `sites` (in the listed order), into
/// the full space described by `layout`.
///
/// Equivalent to iterated [`graded_tensor`] with identities when `sites` is
/// increasing; other orders give the graded permutation of that.
pub fn graded_embed(op: &SuperMatrix, sites: &[usize], layout: &Layout) -> Result<SuperMatrix> {
    for (k, s) in sites.iter().enumerate() {
        if *s >= layout.len() {
            return Err(Error::SiteOutOfRange { site: *s, len: layout.len() });
        }
        if sites[..k].contains(s) {
            return Err(Error::InvalidArgument(format!("site {s} listed twice")));
        }
    }
    let local = Layout::new(sites.iter().map(|s| layout.factor(*s).clone()).collect());
    if local.dim() != op.nrows() || local.dim() != op.ncols() {
        return Err(Error::Shape(format!("operator is {}x{}, named sites span dimension {}", op.nrows(), op.ncols(), local.dim())));
    }
    let full = layout.space();
    let n = full.dim();
    let mut out = SuperMatrix::zeros(full.clone(), full);
    for row in 0..op.nrows() {
        let a = local.split(row);
        for col in 0..op.ncols() {
            let x = *op.get(row, col);
            if x.max_abs() == 0.0 {
                continue;
            }
            let b = local.split(col);
            // sign from expressing op as a graded tensor of elementary units
            let mut s = 0u32;
            for i in 0..sites.len() {
                let pab = (local.factor(i).parity(a[i]) + local.factor(i).parity(b[i])) as u32;
                for j in i + 1..sites.len() {
                    s += pab * local.factor(j).parity(a[j]) as u32;
                }
            }
            for jcol in 0..n {
                let mut st = layout.split(jcol);
                if sites.iter().zip(&b).any(|(f, bi)| st[*f] != *bi) {
                    continue;
                }
                // apply the single-factor units right to left
                let mut t = s;
                for i in (0..sites.len()).rev() {
                    let f = sites[i];
                    let pab = (layout.factor(f).parity(a[i]) + layout.factor(f).parity(b[i])) as u32;
                    let tail: u32 = (f + 1..layout.len()).map(|m| layout.factor(m).parity(st[m]) as u32).sum();
                    t += pab * tail;
                    st[f] = a[i];
                }
                let irow = layout.join(&st);
                *out.get_mut(irow, jcol) += x.scale(C64::new(sign(t), 0.0));
            }
        }
    }
    Ok(out)
}

/// `str M = Σ_a (-1)^{p(a)} M^a_a`.
pub fn supertrace(m: &SuperMatrix) -> Result<AlgebraElement> {
    if m.rows != m.cols {
        return Err(Error::Shape("supertrace of a non-square matrix".into()));
    }
    Ok((0..m.nrows()).fold(AlgebraElement::ZERO, |acc, i| acc + m.get(i, i).scale(C64::new(sign(m.rows.parity(i) as u32), 0.0))))
}

/// Supertrace over tensor factor `k`.
pub fn partial_supertrace(m: &SuperMatrix, k: usize, layout: &Layout) -> Result<SuperMatrix> {
    check_square_layout(m, layout)?;
    if k >= layout.len() {
        return Err(Error::SiteOutOfRange { site: k, len: layout.len() });
    }
    let rest = layout.without(k);
    let mut out = SuperMatrix::zeros(rest.space(), rest.space());
    let fk = layout.factor(k);
    for i in 0..rest.dim() {
        let ri = rest.split(i);
        for j in 0..rest.dim() {
            let rj = rest.split(j);
            let before: u32 = (0..k).map(|m| (rest.factor(m).parity(ri[m]) + rest.factor(m).parity(rj[m])) as u32).sum();
            let mut acc = AlgebraElement::ZERO;
            for a in 0..fk.dim() {
                let pa = fk.parity(a) as u32;
                let mut fi = ri.clone();
                fi.insert(k, a);
                let mut fj = rj.clone();
                fj.insert(k, a);
                let x = m.get(layout.join(&fi), layout.join(&fj));
                acc += x.scale(C64::new(sign(pa + pa * before), 0.0));
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

fn check_square_layout(m: &SuperMatrix, layout: &Layout) -> Result<()> {
    if m.nrows() != layout.dim() || m.ncols() != layout.dim() {
        return Err(Error::Shape(format!("matrix is {}x{}, layout has dimension {}", m.nrows(), m.ncols(), layout.dim())));
    }
    Ok(())
}

/// Partial supertranspose on factor `k`: `(M^{st})^a_b = (-1)^{(p(a)+1) p(b)} M^b_a`
/// on that factor, other indices untouched.
pub fn super_transpose(m: &SuperMatrix, k: usize, layout: &Layout) -> Result<SuperMatrix> {
    partial_transpose_with(m, k, layout, |pa, pb| (pa + 1) * pb)
}

/// Inverse of [`super_transpose`]: sign `(-1)^{p(a)(p(a)+p(b))}`.
pub fn super_transpose_inv(m: &SuperMatrix, k: usize, layout: &Layout) -> Result<SuperMatrix> {
    partial_transpose_with(m, k, layout, |pa, pb| pa * (pa + pb))
}

fn partial_transpose_with(m: &SuperMatrix, k: usize, layout: &Layout, exponent: impl Fn(u32, u32) -> u32) -> Result<SuperMatrix> {
    check_square_layout(m, layout)?;
    if k >= layout.len() {
        return Err(Error::SiteOutOfRange { site: k, len: layout.len() });
    }
    let n = layout.dim();
    let f = layout.factor(k);
    let mut out = SuperMatrix::zeros(m.rows.clone(), m.cols.clone());
    for i in 0..n {
        let ri = layout.split(i);
        for j in 0..n {
            let rj = layout.split(j);
            let (a, b) = (ri[k], rj[k]);
            let mut si = ri.clone();
            let mut sj = rj.clone();
            si[k] = b;
            sj[k] = a;
            let s = exponent(f.parity(a) as u32, f.parity(b) as u32);
            out.set(i, j, m.get(layout.join(&si), layout.join(&sj)).scale(C64::new(sign(s), 0.0)));
        }
    }
    Ok(out)
}

/// Eigenpair of a complex matrix with `y† M = λ y†` and `y† x = 1`.
#[derive(Clone, Debug)]
pub struct BodyEigenpair {
    pub value: C64,
    pub right: Vec<C64>,
    pub left: Vec<C64>,
}

/// Dense non-symmetric eigendecomposition; left vectors are the rows of the
/// inverse right-eigenvector matrix, so `Y† X = I`.
pub fn body_eig(m: &CMat) -> Result<Vec<BodyEigenpair>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape("body_eig needs a square matrix".into()));
    }
    if (0..n).any(|i| (0..n).any(|j| !m[(i, j)].re.is_finite() || !m[(i, j)].im.is_finite())) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let evd = m.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U().to_owned();
    let lu = u.partial_piv_lu();
    let uinv = lu.inverse();
    let mut out = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let right: Vec<C64> = (0..n).map(|i| u[(i, k)]).collect();
        // y† is row k of U^{-1}; store y itself
        let left: Vec<C64> = (0..n).map(|i| uinv[(k, i)].conj()).collect();
        let cond = norm(&right) * norm(&left);
        worst = worst.max(cond);
        out.push(BodyEigenpair { value: s.column_vector()[k], right, left });
    }
    if !worst.is_finite() || worst > 1e10 {
        return Err(Error::Eigen(format!(
            "eigenvector matrix is ill-conditioned (condition estimate {worst:.3e}); the matrix is close to defective"
        )));
    }
    Ok(out)
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(y: &[C64], x: &[C64]) -> C64 {
    y.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}

/// Options for [`graded_eig`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EigOptions {
    /// Relative clustering tolerance for body eigenvalues.
    pub cluster_tol: f64,
    /// Relative tolerance for consistency checks and residuals.
    pub tol: f64,
    /// Seed for the random combination used inside degenerate clusters.
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { cluster_tol: 1e-8, tol: 1e-9, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradedEigenpair {
    pub lambda_body: C64,
    pub lambda_soul: AlgebraElement,
    pub right: Vec<AlgebraElement>,
    pub left: Vec<AlgebraElement>,
    pub cluster: Option<usize>,
    /// Largest component of `M v - λ v`, relative to the largest entry of `M`.
    pub residual: f64,
    pub flagged: bool,
}

impl GradedEigenpair {
    pub fn lambda(&self) -> AlgebraElement {
        AlgebraElement::scalar(self.lambda_body) + self.lambda_soul
    }

    /// Eigenvalue of another member of a commuting family sharing this vector.
    pub fn eigenvalue_in(&self, m: &SuperMatrix) -> AlgebraElement {
        eigenvalue_on(m, &self.right)
    }
}

/// `(Mv)_i v_i^{-1}` at the largest body component of `v`. Exact when `v` is an
/// eigenvector with even eigenvalue.
pub fn eigenvalue_on(m: &SuperMatrix, v: &[AlgebraElement]) -> AlgebraElement {
    let i = (0..v.len()).max_by(|&a, &b| v[a].body().norm().total_cmp(&v[b].body().norm())).unwrap_or(0);
    let mv = m.apply(v);
    mv[i] * v[i].inverse().unwrap_or(AlgebraElement::ZERO)
}

/// A degenerate cluster whose soul couplings could not be diagonalized.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnresolvedCluster {
    pub members: Vec<usize>,
    /// `Y_S† V X_S`, one matrix per monomial, row-major.
    pub effective: Vec<(String, Vec<Vec<[f64; 2]>>)>,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradedEigenSystem {
    pub pairs: Vec<GradedEigenpair>,
    pub unresolved: Vec<UnresolvedCluster>,
}

/// Eigen-decomposition of a Grassmann-valued matrix, exact order by order in
/// Grassmann degree.
pub fn graded_eig(m: &SuperMatrix, opts: &EigOptions) -> Result<GradedEigenSystem> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape("graded_eig needs a square matrix".into()));
    }
    let n = m.nrows();
    let m0 = m.body();
    let base = body_eig(&m0)?;
    let scale = m.max_abs().max(1e-300);
    let spec_scale = base.iter().map(|p| p.value.norm()).fold(0.0, f64::max).max(scale);

    // cluster by body eigenvalue
    let mut cluster_of = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if cluster_of[i] != usize::MAX {
            continue;
        }
        let c = clusters.len();
        let mut members = vec![i];
        cluster_of[i] = c;
        for j in i + 1..n {
            if cluster_of[j] == usize::MAX && (base[i].value - base[j].value).norm() <= opts.cluster_tol * spec_scale {
                cluster_of[j] = c;
                members.push(j);
            }
        }
        clusters.push(members);
    }

    let mut pairs = Vec::with_capacity(n);
    let mut unresolved = Vec::new();
    let mut rng_state = opts.seed;
    for members in &clusters {
        let lambda0 = members.iter().map(|i| base[*i].value).sum::<C64>() / members.len() as f64;
        let (xs, ys, ok) = if members.len() == 1 {
            (vec![base[members[0]].right.clone()], vec![base[members[0]].left.clone()], None)
        } else {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            resolve_cluster(m, &base, members, lambda0, opts, scale, rng_state)
        };
        if let Some(reason) = ok {
            unresolved.push(UnresolvedCluster { members: members.clone(), effective: effective_dump(m, &base, members), reason });
            for &i in members {
                pairs.push(GradedEigenpair {
                    lambda_body: base[i].value,
                    lambda_soul: AlgebraElement::ZERO,
                    right: base[i].right.iter().map(|z| AlgebraElement::scalar(*z)).collect(),
                    left: base[i].left.iter().map(|z| AlgebraElement::scalar(z.conj())).collect(),
                    cluster: Some(unresolved.len() - 1),
                    residual: f64::NAN,
                    flagged: true,
                });
            }
            continue;
        }
        let cid = (members.len() > 1).then_some(pairs.len());
        for (x, y) in xs.iter().zip(&ys) {
            let pair = solve_pair(m, &base, members, lambda0, x, y, opts, scale, cid);
            pairs.push(pair);
        }
    }
    Ok(GradedEigenSystem { pairs, unresolved })
}

/// Reduced resolvent `Σ_{i∉S} x_i y_i† / (λ0 - λ_i)` applied to a vector.
fn reduced_resolvent(base: &[BodyEigenpair], members: &[usize], lambda0: C64, b: &[C64]) -> Vec<C64> {
    let n = b.len();
    let mut out = vec![czero(); n];
    for (i, p) in base.iter().enumerate() {
        if members.contains(&i) {
            continue;
        }
        let c = dotc(&p.left, b) / (lambda0 - p.value);
        for (o, x) in out.iter_mut().zip(&p.right) {
            *o += c * x;
        }
    }
    out
}

/// Row-vector version: `w R` with `R` the reduced resolvent.
fn reduced_resolvent_left(base: &[BodyEigenpair], members: &[usize], lambda0: C64, w: &[C64]) -> Vec<C64> {
    let n = w.len();
    let mut out = vec![czero(); n];
    for (i, p) in base.iter().enumerate() {
        if members.contains(&i) {
            continue;
        }
        let c: C64 = w.iter().zip(&p.right).map(|(a, b)| a * b).sum::<C64>() / (lambda0 - p.value);
        for (o, y) in out.iter_mut().zip(&p.left) {
            *o += c * y.conj();
        }
    }
    out
}

fn lift(v: &[C64]) -> Vec<AlgebraElement> {
    v.iter().map(|z| AlgebraElement::scalar(*z)).collect()
}

fn effective_dump(m: &SuperMatrix, base: &[BodyEigenpair], members: &[usize]) -> Vec<(String, Vec<Vec<[f64; 2]>>)> {
    let mut out = Vec::new();
    for mono in Monomial::ALL.iter().skip(1) {
        let vm = m.component(*mono);
        let mat: Vec<Vec<[f64; 2]>> = members
            .iter()
            .map(|&i| {
                members
                    .iter()
                    .map(|&j| {
                        let z = bilinear(&base[i].left, &vm, &base[j].right);
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        out.push((mono.key().to_string(), mat));
    }
    out
}

fn bilinear(y: &[C64], m: &CMat, x: &[C64]) -> C64 {
    let mut acc = czero();
    for i in 0..y.len() {
        let yi = y[i].conj();
        if yi.norm() == 0.0 {
            continue;
        }
        let mut row = czero();
        for j in 0..x.len() {
            row += m[(i, j)] * x[j];
        }
        acc += yi * row;
    }
    acc
}

type ClusterBasis = (Vec<Vec<C64>>, Vec<Vec<C64>>, Option<String>);

/// Chooses a basis of the cluster that diagonalizes the soul couplings.
fn resolve_cluster(
    m: &SuperMatrix,
    base: &[BodyEigenpair],
    members: &[usize],
    lambda0: C64,
    opts: &EigOptions,
    scale: f64,
    seed: u64,
) -> ClusterBasis {
    let k = members.len();
    let xs: Vec<Vec<C64>> = members.iter().map(|i| base[*i].right.clone()).collect();
    let ys: Vec<Vec<C64>> = members.iter().map(|i| base[*i].left.clone()).collect();
    // degree-1 couplings inside the cluster must vanish
    for g in Monomial::GENERATORS {
        let vg = m.component(g);
        for y in &ys {
            for x in &xs {
                if bilinear(y, &vg, x).norm() > opts.tol * scale {
                    return (xs, ys, Some(format!("odd coupling {g} inside a degenerate cluster")));
                }
            }
        }
    }
    // degree-2 effective matrix: Y† V2 X + Y† V1 R V1 X, in algebra arithmetic
    let mut eff = vec![vec![AlgebraElement::ZERO; k]; k];
    let n = m.nrows();
    for (b, x) in xs.iter().enumerate() {
        let v1x: Vec<AlgebraElement> = m.apply(&lift(x)).into_iter().map(|e| e.degree_part(1)).collect();
        // R applied componentwise
        let mut rv = vec![AlgebraElement::ZERO; n];
        for g in Monomial::GENERATORS {
            let comp: Vec<C64> = v1x.iter().map(|e| e.component(g)).collect();
            let r = reduced_resolvent(base, members, lambda0, &comp);
            for (o, z) in rv.iter_mut().zip(r) {
                o.c[g.index()] += z;
            }
        }
        let second: Vec<AlgebraElement> = m.apply(&rv).into_iter().map(|e| e.degree_part(2)).collect();
        let direct: Vec<AlgebraElement> = m.apply(&lift(x)).into_iter().map(|e| e.degree_part(2)).collect();
        for (a, y) in ys.iter().enumerate() {
            let mut acc = AlgebraElement::ZERO;
            for i in 0..n {
                let yi = y[i].conj();
                acc += (direct[i] + second[i]).scale(yi);
            }
            eff[a][b] = acc;
        }
    }
    let evens = [Monomial::AP_AM, Monomial::AP_BM, Monomial::BP_AM, Monomial::BP_BM];
    let mut rng = seed;
    let mut weights = [0.0; 4];
    for w in weights.iter_mut() {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *w = 0.5 + ((rng >> 11) as f64 / (1u64 << 53) as f64);
    }
    let comb = CMat::from_fn(k, k, |a, b| evens.iter().zip(weights).map(|(mo, w)| eff[a][b].component(*mo) * w).sum());
    let emax = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| eff[a][b].max_abs()).fold(0.0, f64::max);
    let (c, cinv) = if emax <= opts.tol * scale {
        (CMat::identity(k, k), CMat::identity(k, k))
    } else {
        let evd = match comb.eigen() {
            Ok(e) => e,
            Err(e) => return (xs, ys, Some(format!("cluster eigen failure: {e:?}"))),
        };
        let c = evd.U().to_owned();
        let cinv = c.partial_piv_lu().inverse();
        (c, cinv)
    };
    // check simultaneous diagonalization
    for mo in evens {
        let e = CMat::from_fn(k, k, |a, b| eff[a][b].component(mo));
        let d = &cinv * &e * &c;
        for a in 0..k {
            for b in 0..k {
                if a != b && d[(a, b)].norm() > opts.tol.sqrt() * scale.max(emax) {
                    return (xs, ys, Some(format!("degree-2 couplings ({mo}) not simultaneously diagonalizable")));
                }
            }
        }
    }
    let nx: Vec<Vec<C64>> = (0..k).map(|j| (0..n).map(|i| (0..k).map(|a| xs[a][i] * c[(a, j)]).sum()).collect()).collect();
    // new left vectors: y_j† = Σ_a cinv[j,a] y_a†
    let ny: Vec<Vec<C64>> =
        (0..k).map(|j| (0..n).map(|i| (0..k).map(|a| (cinv[(j, a)] * ys[a][i].conj()).conj()).sum()).collect()).collect();
    (nx, ny, None)
}

#[allow(clippy::too_many_arguments)]
fn solve_pair(
    m: &SuperMatrix,
    base: &[BodyEigenpair],
    members: &[usize],
    lambda0: C64,
    x: &[C64],
    y: &[C64],
    opts: &EigOptions,
    scale: f64,
    cluster: Option<usize>,
) -> GradedEigenpair {
    let n = x.len();
    let mut v = lift(x);
    let mut lam = AlgebraElement::scalar(lambda0);
    let mut flagged = false;
    for d in 1..=2u32 {
        let mv = m.apply(&v);
        let r: Vec<AlgebraElement> = mv.iter().zip(&v).map(|(a, b)| *a - lam * *b).collect();
        let mut dv = vec![AlgebraElement::ZERO; n];
        let mut dl = AlgebraElement::ZERO;
        for mo in Monomial::ALL.iter().filter(|mo| mo.degree() == d) {
            let rm: Vec<C64> = r.iter().map(|e| e.component(*mo)).collect();
            let lm = dotc(y, &rm);
            let rhs: Vec<C64> = x.iter().zip(&rm).map(|(xi, ri)| lm * xi - ri).collect();
            // (M0 - λ0) v = rhs  =>  v = -R rhs
            let sol = reduced_resolvent(base, members, lambda0, &rhs);
            for (o, z) in dv.iter_mut().zip(sol) {
                o.c[mo.index()] = -z;
            }
            dl.c[mo.index()] = lm;
        }
        for (a, b) in v.iter_mut().zip(dv) {
            *a += b;
        }
        lam += dl;
    }
    // left vector: w M = λ w
    let mut w: Vec<AlgebraElement> = y.iter().map(|z| AlgebraElement::scalar(z.conj())).collect();
    for d in 1..=2u32 {
        let wm = m.apply_left(&w);
        let r: Vec<AlgebraElement> = wm.iter().zip(&w).map(|(a, b)| *a - lam * *b).collect();
        let mut dw = vec![AlgebraElement::ZERO; n];
        for mo in Monomial::ALL.iter().filter(|mo| mo.degree() == d) {
            let rm: Vec<C64> = r.iter().map(|e| e.component(*mo)).collect();
            let lm = lam.component(*mo);
            let rhs: Vec<C64> = y.iter().zip(&rm).map(|(yi, ri)| lm * yi.conj() - ri).collect();
            let sol = reduced_resolvent_left(base, members, lambda0, &rhs);
            for (o, z) in dw.iter_mut().zip(sol) {
                o.c[mo.index()] = -z;
            }
        }
        for (a, b) in w.iter_mut().zip(dw) {
            *a += b;
        }
    }
    let mv = m.apply(&v);
    let residual = mv.iter().zip(&v).map(|(a, b)| (*a - lam * *b).max_abs()).fold(0.0, f64::max) / scale;
    let wm = m.apply_left(&w);
    let lres = wm.iter().zip(&w).map(|(a, b)| (*a - lam * *b).max_abs()).fold(0.0, f64::max) / scale;
    if residual > opts.tol || lres > opts.tol {
        flagged = true;
    }
    GradedEigenpair { lambda_body: lambda0, lambda_soul: lam.soul(), right: v, left: w, cluster, residual: residual.max(lres), flagged }
}
