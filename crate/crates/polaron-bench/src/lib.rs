//! Parameter sets shared by the benchmarks.

use polaron::{Amplitudes, ModelParams, C64};

/// Generic nondiagonal point with `n` sites.
pub fn generic(n: usize) -> ModelParams {
    ModelParams::new(n, C64::new(0.3, 0.1), C64::new(0.7, 0.2), C64::new(1.1, -0.3), Amplitudes::default())
}
