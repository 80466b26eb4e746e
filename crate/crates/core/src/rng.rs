//! Seeded randomness for synthetic inputs.
//!
//! All draws come from ChaCha8 (`rand_chacha`), seeded from a 64-bit seed
//! and split into independent streams by draw index. The stream is the same
//! on every platform, so a `(seed, index)` pair always yields the same values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator for draw `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| gaussian(rng)).collect()
}

/// Gaussian vector with every consecutive `stride`-chunk scaled to unit norm.
pub fn unit_subvectors<R: Rng>(rng: &mut R, len: usize, stride: usize) -> Vec<f64> {
    let mut v = gaussian_vec(rng, len);
    for chunk in v.chunks_mut(stride) {
        let n = chunk.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            chunk.iter_mut().for_each(|x| *x /= n);
        }
    }
    v
}

/// Uniform sample in `[lo, hi)`.
pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}
