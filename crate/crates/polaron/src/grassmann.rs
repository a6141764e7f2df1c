//! The nine-dimensional Grassmann algebra generated by the odd boundary
//! parameters `A+`, `B+`, `A-`, `B-` with `A+ B+ = A- B- = 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;

pub const DIM: usize = 9;

/// Bit masks of the generators, in canonical order.
const A_PLUS: u8 = 1;
const B_PLUS: u8 = 2;
const A_MINUS: u8 = 4;
const B_MINUS: u8 = 8;

const MASKS: [u8; DIM] = [0, A_PLUS, B_PLUS, A_MINUS, B_MINUS, A_PLUS | A_MINUS, A_PLUS | B_MINUS, B_PLUS | A_MINUS, B_PLUS | B_MINUS];

const KEYS: [&str; DIM] = ["1", "a+", "b+", "a-", "b-", "a+a-", "a+b-", "b+a-", "b+b-"];

/// One of the nine basis monomials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(u8);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);
    pub const AP: Monomial = Monomial(1);
    pub const BP: Monomial = Monomial(2);
    pub const AM: Monomial = Monomial(3);
    pub const BM: Monomial = Monomial(4);
    pub const AP_AM: Monomial = Monomial(5);
    pub const AP_BM: Monomial = Monomial(6);
    pub const BP_AM: Monomial = Monomial(7);
    pub const BP_BM: Monomial = Monomial(8);

    pub const ALL: [Monomial; DIM] =
        [Self::ONE, Self::AP, Self::BP, Self::AM, Self::BM, Self::AP_AM, Self::AP_BM, Self::BP_AM, Self::BP_BM];
    pub const GENERATORS: [Monomial; 4] = [Self::AP, Self::BP, Self::AM, Self::BM];

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Option<Monomial> {
        (i < DIM).then_some(Monomial(i as u8))
    }

    pub fn degree(self) -> u32 {
        MASKS[self.index()].count_ones()
    }

    pub fn parity(self) -> Parity {
        if self.degree().is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn key(self) -> &'static str {
        KEYS[self.index()]
    }

    pub fn from_key(key: &str) -> Option<Monomial> {
        KEYS.iter().position(|k| *k == key).map(|i| Monomial(i as u8))
    }

    fn from_mask(mask: u8) -> Option<Monomial> {
        MASKS.iter().position(|m| *m == mask).map(|i| Monomial(i as u8))
    }

    /// Product of two monomials: `None` if it vanishes, otherwise the result
    /// and the reordering sign.
    pub fn product(self, other: Monomial) -> Option<(Monomial, f64)> {
        let (a, b) = (MASKS[self.index()], MASKS[other.index()]);
        if a & b != 0 {
            return None;
        }
        let c = a | b;
        if c & (A_PLUS | B_PLUS) == A_PLUS | B_PLUS || c & (A_MINUS | B_MINUS) == A_MINUS | B_MINUS {
            return None;
        }
        // count pairs (x in a, y in b) with x after y in canonical order
        let mut swaps = 0;
        for x in 0..4 {
            if a & (1 << x) != 0 {
                swaps += (b & ((1u8 << x) - 1)).count_ones();
            }
        }
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        Monomial::from_mask(c).map(|m| (m, sign))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn from_bit(b: u8) -> Parity {
        if b.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Nonzero entries `(i, j, k, sign)` of the structure constants.
struct Table {
    entries: Vec<(usize, usize, usize, f64)>,
}

fn table() -> &'static Table {
    static TABLE: std::sync::OnceLock<Table> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let mut entries = Vec::new();
        for a in Monomial::ALL {
            for b in Monomial::ALL {
                if let Some((c, s)) = a.product(b) {
                    entries.push((a.index(), b.index(), c.index(), s));
                }
            }
        }
        Table { entries }
    })
}

/// An element of the algebra, stored as dense coefficients over [`Monomial::ALL`].
#[derive(Clone, Copy, PartialEq, Default)]
pub struct AlgebraElement {
    pub c: [C64; DIM],
}

impl AlgebraElement {
    pub const ZERO: AlgebraElement = AlgebraElement { c: [C64::new(0.0, 0.0); DIM] };

    pub fn zero() -> Self {
        Self::ZERO
    }

    pub fn one() -> Self {
        Self::scalar(C64::new(1.0, 0.0))
    }

    pub fn scalar(z: C64) -> Self {
        let mut x = Self::ZERO;
        x.c[0] = z;
        x
    }

    pub fn real(r: f64) -> Self {
        Self::scalar(C64::new(r, 0.0))
    }

    pub fn monomial(m: Monomial, z: C64) -> Self {
        let mut x = Self::ZERO;
        x.c[m.index()] = z;
        x
    }

    pub fn component(&self, m: Monomial) -> C64 {
        self.c[m.index()]
    }

    pub fn body(&self) -> C64 {
        self.c[0]
    }

    pub fn soul(&self) -> Self {
        let mut x = *self;
        x.c[0] = C64::new(0.0, 0.0);
        x
    }

    pub fn parity_project(&self, p: Parity) -> Self {
        let mut x = Self::ZERO;
        for m in Monomial::ALL {
            if m.parity() == p {
                x.c[m.index()] = self.c[m.index()];
            }
        }
        x
    }

    /// Part of Grassmann degree exactly `d`.
    pub fn degree_part(&self, d: u32) -> Self {
        let mut x = Self::ZERO;
        for m in Monomial::ALL {
            if m.degree() == d {
                x.c[m.index()] = self.c[m.index()];
            }
        }
        x
    }

    pub fn is_homogeneous(&self, tol: f64) -> bool {
        let even = self.parity_project(Parity::Even).max_abs();
        let odd = self.parity_project(Parity::Odd).max_abs();
        even <= tol || odd <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut x = *self;
        for v in x.c.iter_mut() {
            *v *= z;
        }
        x
    }

    /// Multiplicative inverse; requires an invertible body.
    pub fn inverse(&self) -> Option<Self> {
        let b = self.body();
        if b.norm() == 0.0 {
            return None;
        }
        let s = self.soul().scale(1.0 / b);
        // (1 + s)^-1 = 1 - s + s^2, since s^3 = 0
        Some((Self::one() - s + s * s).scale(1.0 / b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Monomial, C64)> + '_ {
        Monomial::ALL.iter().map(move |m| (*m, self.c[m.index()]))
    }
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, z) in self.iter() {
            if z.norm() == 0.0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "({z})·{m}")?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl Add for AlgebraElement {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for AlgebraElement {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
    }
}

impl Sub for AlgebraElement {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for AlgebraElement {
    fn sub_assign(&mut self, rhs: Self) {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
    }
}

impl Neg for AlgebraElement {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for AlgebraElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::ZERO;
        for &(i, j, k, s) in &table().entries {
            let (a, b) = (self.c[i], rhs.c[j]);
            if a.re == 0.0 && a.im == 0.0 || b.re == 0.0 && b.im == 0.0 {
                continue;
            }
            out.c[k] += a * b * s;
        }
        out
    }
}

impl MulAssign for AlgebraElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Mul<C64> for AlgebraElement {
    type Output = Self;
    fn mul(self, rhs: C64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<AlgebraElement> for C64 {
    type Output = AlgebraElement;
    fn mul(self, rhs: AlgebraElement) -> AlgebraElement {
        rhs.scale(self)
    }
}

impl From<C64> for AlgebraElement {
    fn from(z: C64) -> Self {
        Self::scalar(z)
    }
}

impl Serialize for AlgebraElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, [f64; 2]> = self.iter().filter(|(_, z)| z.norm() != 0.0).map(|(m, z)| (m.key(), [z.re, z.im])).collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map: BTreeMap<String, [f64; 2]> = BTreeMap::deserialize(d)?;
        let mut x = Self::ZERO;
        for (k, [re, im]) in map {
            let m = Monomial::from_key(&k).ok_or_else(|| D::Error::custom(format!("unknown monomial key `{k}`")))?;
            x.c[m.index()] = C64::new(re, im);
        }
        Ok(x)
    }
}

/// Complex amplitudes of the odd parameters: `alpha+ = a_plus * A+`, etc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub a_plus: C64,
    pub b_plus: C64,
    pub a_minus: C64,
    pub b_minus: C64,
}

impl Default for Amplitudes {
    fn default() -> Self {
        Self::uniform(C64::new(1.0, 0.0))
    }
}

impl Amplitudes {
    pub fn uniform(z: C64) -> Self {
        Amplitudes { a_plus: z, b_plus: z, a_minus: z, b_minus: z }
    }

    pub fn diagonal() -> Self {
        Self::uniform(C64::new(0.0, 0.0))
    }

    pub fn is_diagonal(&self) -> bool {
        [self.a_plus, self.b_plus, self.a_minus, self.b_minus].iter().all(|z| z.norm() == 0.0)
    }

    pub fn alpha_plus(&self) -> AlgebraElement {
        AlgebraElement::monomial(Monomial::AP, self.a_plus)
    }
    pub fn beta_plus(&self) -> AlgebraElement {
        AlgebraElement::monomial(Monomial::BP, self.b_plus)
    }
    pub fn alpha_minus(&self) -> AlgebraElement {
        AlgebraElement::monomial(Monomial::AM, self.a_minus)
    }
    pub fn beta_minus(&self) -> AlgebraElement {
        AlgebraElement::monomial(Monomial::BM, self.b_minus)
    }

    /// Coefficient `c` such that `G = c * g_unit` with `g_unit = {B+A-} - {A+B-}`
    /// when both products have equal weight; `None` otherwise.
    pub fn g_scale(&self) -> Option<C64> {
        let p = self.b_plus * self.a_minus;
        let q = self.a_plus * self.b_minus;
        ((p - q).norm() <= 1e-14 * (p.norm() + q.norm()).max(1e-300)).then_some(p)
    }
}

/// `G = beta+ alpha- - alpha+ beta-`.
pub fn grassmann_g(amps: &Amplitudes) -> AlgebraElement {
    let mut g = AlgebraElement::ZERO;
    g.c[Monomial::BP_AM.index()] = amps.b_plus * amps.a_minus;
    g.c[Monomial::AP_BM.index()] = -amps.a_plus * amps.b_minus;
    g
}

/// Decomposes a degree-2 element as `k * G`, returning `(k, leakage)` where
/// leakage is the largest degree-2 coefficient not explained by `G`.
pub fn g_component(x: &AlgebraElement, g: &AlgebraElement) -> (C64, f64) {
    let gx = [Monomial::AP_AM, Monomial::AP_BM, Monomial::BP_AM, Monomial::BP_BM];
    let num: C64 = gx.iter().map(|m| g.component(*m).conj() * x.component(*m)).sum();
    let den: f64 = gx.iter().map(|m| g.component(*m).norm_sqr()).sum();
    let k = if den > 0.0 { num / den } else { C64::new(0.0, 0.0) };
    let leak = gx.iter().map(|m| (x.component(*m) - k * g.component(*m)).norm()).fold(0.0, f64::max);
    (k, leak)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(m: Monomial) -> AlgebraElement {
        AlgebraElement::monomial(m, C64::new(1.0, 0.0))
    }

    #[test]
    fn generator_products() {
        assert_eq!(gen(Monomial::AP) * gen(Monomial::BM), gen(Monomial::AP_BM));
        assert_eq!(gen(Monomial::BM) * gen(Monomial::AP), -gen(Monomial::AP_BM));
        assert_eq!(gen(Monomial::AP) * gen(Monomial::BP), AlgebraElement::ZERO);
        assert_eq!(gen(Monomial::AP) * gen(Monomial::AP), AlgebraElement::ZERO);
        assert_eq!(gen(Monomial::AM) * gen(Monomial::BM), AlgebraElement::ZERO);
    }

    #[test]
    fn g_examples() {
        let g = grassmann_g(&Amplitudes::default());
        assert_eq!(g, gen(Monomial::BP_AM) - gen(Monomial::AP_BM));
        let amps =
            Amplitudes { a_plus: C64::new(2.0, 0.0), b_plus: C64::new(0.0, 0.0), a_minus: C64::new(3.0, 0.0), b_minus: C64::new(0.0, 0.0) };
        assert_eq!(grassmann_g(&amps), AlgebraElement::ZERO);
        assert_eq!(g * g, AlgebraElement::ZERO);
    }

    #[test]
    fn plumbing() {
        let x = gen(Monomial::AP_BM) + AlgebraElement::real(3.0);
        assert_eq!(x.component(Monomial::AP_BM), C64::new(1.0, 0.0));
        assert_eq!(x.body(), C64::new(3.0, 0.0));
        let y = gen(Monomial::AP) + AlgebraElement::one();
        assert_eq!(y.parity_project(Parity::Odd), gen(Monomial::AP));
        assert_eq!(x + x.scale(C64::new(-1.0, 0.0)), AlgebraElement::ZERO);
    }

    #[test]
    fn json_round_trip() {
        let x = gen(Monomial::BP_AM).scale(C64::new(0.5, -1.0)) + AlgebraElement::real(2.0);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"1":[2.0,0.0],"b+a-":[0.5,-1.0]}"#);
        let back: AlgebraElement = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<AlgebraElement>(r#"{"a+b+":[1,0]}"#).is_err());
    }

    #[test]
    fn inverse() {
        let x = AlgebraElement::real(2.0) + gen(Monomial::AP) + gen(Monomial::BP_AM).scale(C64::new(0.0, 3.0)) + gen(Monomial::AM);
        let y = x.inverse().unwrap();
        assert!((x * y - AlgebraElement::one()).max_abs() < 1e-15);
    }
}
