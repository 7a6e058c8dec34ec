//! Reproducible Gaussian sampling.
//!
//! Every random matrix is drawn from a `ChaCha8` stream seeded with a 64-bit
//! integer, and standard normals come from the ziggurat sampler in
//! `rand_distr::StandardNormal`. Entries are generated column by column, so
//! the first `j` columns of an `n x k` draw equal an `n x j` draw with the
//! same seed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SketchRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SketchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for stream `index` under `base`, e.g. one trial of an experiment.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn gaussian_matrix(nrows: usize, ncols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    gaussian_matrix_from(&mut r, nrows, ncols)
}

pub fn gaussian_matrix_from<R: Rng>(r: &mut R, nrows: usize, ncols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..nrows * ncols).map(|_| r.sample(StandardNormal)).collect();
    DMatrix::from_vec(nrows, ncols, data)
}
