//! Parameter initialization and seeded random streams.
//!
//! Initialization is not taken from any reference training recipe: convs and
//! the FC head use fan-in scaled uniform draws, GRU matrices and biases use
//! `U(-1/sqrt(hidden), 1/sqrt(hidden))`. Draws happen in `f64` and are then
//! narrowed, so `f32` and `f64` builds from one seed agree up to rounding.

use rand::Rng;
#[cfg(test)]
use rand::SeedableRng;
#[cfg(test)]
use rand_chacha::ChaCha8Rng;

pub use crate::rng::seeded_rng;
use crate::Real;

pub fn uniform<T: Real>(n: usize, bound: f64, rng: &mut impl Rng) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 }))
        .collect()
}

/// He-uniform bound `sqrt(6 / fan_in)`.
pub fn kaiming_uniform<T: Real>(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<T> {
    uniform(n, (6.0 / fan_in.max(1) as f64).sqrt(), rng)
}

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
