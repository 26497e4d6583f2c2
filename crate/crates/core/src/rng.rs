//! Seed handling shared by every randomized component.
//!
//! All randomness flows from `u64` seeds through [`ChaCha8Rng`], which is
//! portable and stable across platforms. Independent streams are obtained by
//! mixing a domain tag into the seed so that, for example, the sensing matrix
//! and the measurement noise of one trial never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream tags for seed-domain separation.
pub mod domain {
    pub const OPERATOR: u64 = 0x4f50_4552;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const SIGNAL: u64 = 0x5349_474e;
    pub const DENOISER: u64 = 0x444e_5a52;
    pub const TRIAL: u64 = 0x5452_4941;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, tag)`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
