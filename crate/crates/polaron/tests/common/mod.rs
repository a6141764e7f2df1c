#![allow(dead_code)]

use polaron::{Amplitudes, ModelParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(r: &mut ChaCha8Rng, lo: f64, hi: f64, im: f64) -> C64 {
    c(r.gen_range(lo..hi), r.gen_range(-im..im))
}

/// Generic nondiagonal parameters away from the resonances.
pub fn generic(n: usize, r: &mut ChaCha8Rng) -> ModelParams {
    let amps = Amplitudes {
        a_plus: rand_c(r, 0.6, 1.4, 0.3),
        b_plus: rand_c(r, 0.6, 1.4, 0.3),
        a_minus: rand_c(r, 0.6, 1.4, 0.3),
        b_minus: rand_c(r, 0.6, 1.4, 0.3),
    };
    ModelParams::new(n, rand_c(r, 0.2, 0.5, 0.15), rand_c(r, 0.4, 1.2, 0.3), rand_c(r, 0.4, 1.2, 0.3), amps)
}

pub fn fixed(n: usize) -> ModelParams {
    ModelParams::new(
        n,
        c(0.3, 0.1),
        c(0.7, 0.2),
        c(1.1, -0.3),
        Amplitudes { a_plus: c(0.9, 0.0), b_plus: c(1.2, 0.1), a_minus: c(0.8, -0.2), b_minus: c(1.3, 0.0) },
    )
}
