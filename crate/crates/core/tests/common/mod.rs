#![allow(dead_code)]

use flextrace::operators::{random_orthogonal, DenseOperator};
use flextrace::{DMatrix, DVector};

/// `V diag(lambda) V^T` with a random rotation and the given eigenvalues.
pub fn spsd_with(eigvals: &[f64], seed: u64) -> DMatrix<f64> {
    let n = eigvals.len();
    let v = random_orthogonal(n, seed);
    let mut vl = v.clone();
    for (j, mut c) in vl.column_iter_mut().enumerate() {
        c *= eigvals[j];
    }
    let a = &vl * v.transpose();
    (&a + a.transpose()) * 0.5
}

/// Random SPSD matrix of size `n` and rank `rank` with decay `rate`.
pub fn random_spsd(n: usize, rank: usize, rate: f64, seed: u64) -> DenseOperator {
    let eig: Vec<f64> = (0..n).map(|i| if i < rank { rate.powi(i as i32) } else { 0.0 }).collect();
    DenseOperator::new(spsd_with(&eig, seed)).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}

pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().max()
}

pub fn shuffled(k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut p: Vec<usize> = (0..k).collect();
    p.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    p
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
