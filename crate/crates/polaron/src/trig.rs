//! Complex trigonometric shorthands.

use crate::grassmann::C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn sin(z: C64) -> C64 {
    z.sin()
}

pub fn cos(z: C64) -> C64 {
    z.cos()
}

pub fn cot(z: C64) -> C64 {
    z.cos() / z.sin()
}

pub fn csc(z: C64) -> C64 {
    1.0 / z.sin()
}

/// Relative closeness test used for pole guards.
pub fn near_zero(z: C64, tol: f64) -> bool {
    z.norm() <= tol
}
