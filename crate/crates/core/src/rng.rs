//! Seeded substreams and order-fixed reductions.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(root seed, domain, index)`. Parallel code computes per-index values and
//! reduces them with [`pairwise_sum`], whose tree shape depends only on the
//! slice length, so results do not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

pub type Stream = ChaCha8Rng;

/// Domain tags separating independent uses of one root seed.
pub mod domain {
    pub const HADAMARD: u64 = 1;
    pub const CRN_BATCH: u64 = 2;
    pub const EVAL_BATCH: u64 = 3;
    pub const ASCENT_START: u64 = 4;
    pub const POWER_START: u64 = 5;
    pub const MASK_RESTART: u64 = 6;
    pub const BILINEAR: u64 = 7;
    pub const GENERATOR: u64 = 8;
    pub const SUITE: u64 = 9;
    pub const REMOVAL: u64 = 10;
    pub const DOMINATION: u64 = 11;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, domain, index)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Derives a child seed, for handing a seed to a nested estimator.
pub fn child_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain)) ^ index.wrapping_mul(0xA24B_AED4_963E_E407))
}

/// Pairwise (cascade) sum with a fixed split at the midpoint.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean (unbiased variance).
pub fn mean_and_stderr<T: Real>(xs: &[T]) -> (T, T) {
    let n = xs.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nt = T::lit(n as f64);
    let mean = pairwise_sum(xs) / nt;
    if n == 1 {
        return (mean, T::zero());
    }
    let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / T::lit((n - 1) as f64);
    (mean, (var / nt).sqrt())
}
