//! Seeded inputs shared by the benchmarks.

use hetrob::seed;
use hetrob::CorruptionProfile;
use rand::Rng;

/// `n` rates drawn i.i.d. uniform on `[0, 1)`.
pub fn uniform_profile(n: usize, seed: u64) -> CorruptionProfile {
    let mut rng = seed::rng(seed);
    let lambdas = (0..n).map(|_| rng.random::<f64>()).collect();
    CorruptionProfile::new(lambdas).expect("rates lie in [0, 1)")
}

/// `n` points in `d` dimensions, i.i.d. uniform on `[-1, 1)^d`, row-major.
pub fn uniform_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()
}
