//! Deterministic seed derivation for independent random streams.
//!
//! A root seed plus a tuple of counters is mixed through splitmix64, so the
//! stream for `(root, a, b)` never depends on how many other streams were
//! drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a list of counters into a child seed.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(root: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(root, path))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream tags, so that e.g. profile draws and trial draws never collide.
pub mod tag {
    pub const PROFILE: u64 = 1;
    pub const TRIAL: u64 = 2;
    pub const ESTIMATOR: u64 = 3;
}
