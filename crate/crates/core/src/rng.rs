//! Seeded randomness. Every random draw in the crate goes through a
//! [`SeededRng`] built from an explicit 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th independent sub-run of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

pub fn normal_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn uniform_vec(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let dist = Uniform::new(lo, hi).expect("valid uniform range");
    (0..n).map(|_| dist.sample(rng)).collect()
}
