//! Seeded stand-ins for the external datasets.

use std::collections::HashSet;

use flextrace::random::rng;
use flextrace::SparseMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

pub const RATINGS_USERS: usize = 943;
pub const RATINGS_ITEMS: usize = 1682;
pub const RATINGS_COUNT: usize = 100_000;
const MIN_PER_USER: usize = 20;
const LATENT_DIM: usize = 8;

/// Users x items ratings in 1..=5 with the same shape and count as the
/// 100k MovieLens release: skewed user activity (at least 20 ratings per
/// user), Zipf-like item popularity and a low-dimensional taste model.
pub fn synthetic_ratings(seed: u64) -> SparseMatrix {
    let mut r = rng(seed);
    let counts = user_counts(&mut r);

    let popularity: Vec<f64> = (0..RATINGS_ITEMS).map(|i| 1.0 / (1.0 + i as f64).powf(0.9)).collect();
    let pick = WeightedIndex::new(&popularity).expect("positive weights");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let latent = |r: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..LATENT_DIM).map(|_| normal.sample(r) / (LATENT_DIM as f64).sqrt()).collect()).collect()
    };
    let users = latent(&mut r, RATINGS_USERS);
    let items = latent(&mut r, RATINGS_ITEMS);
    let user_bias: Vec<f64> = (0..RATINGS_USERS).map(|_| 0.4 * normal.sample(&mut r)).collect();
    let item_bias: Vec<f64> = (0..RATINGS_ITEMS).map(|i| 0.5 * normal.sample(&mut r) + 0.3 * popularity[i].sqrt()).collect();

    let mut entries = Vec::with_capacity(RATINGS_COUNT);
    for (u, &c) in counts.iter().enumerate() {
        let mut seen = HashSet::with_capacity(c);
        while seen.len() < c {
            let i = pick.sample(&mut r);
            if seen.insert(i) {
                let taste: f64 = users[u].iter().zip(&items[i]).map(|(a, b)| a * b).sum();
                let raw = 3.5 + user_bias[u] + item_bias[i] + 1.2 * taste + 0.6 * normal.sample(&mut r);
                entries.push((u, i, raw.round().clamp(1.0, 5.0)));
            }
        }
    }
    entries.sort_by_key(|&(u, i, _)| (u, i));
    SparseMatrix::new(RATINGS_USERS, RATINGS_ITEMS, entries).expect("valid synthetic ratings")
}

/// Per-user rating counts: log-normal activity, floored, summing to the total.
fn user_counts(r: &mut impl Rng) -> Vec<usize> {
    let ln = LogNormal::new(0.0, 1.0).expect("log-normal");
    let raw: Vec<f64> = (0..RATINGS_USERS).map(|_| ln.sample(r)).collect();
    let spare = (RATINGS_COUNT - MIN_PER_USER * RATINGS_USERS) as f64;
    let total: f64 = raw.iter().sum();
    let cap = RATINGS_ITEMS / 2;
    let mut counts: Vec<usize> = raw
        .iter()
        .map(|w| (MIN_PER_USER + (spare * w / total).floor() as usize).min(cap))
        .collect();
    let mut missing = RATINGS_COUNT - counts.iter().sum::<usize>();
    let mut u = 0;
    while missing > 0 {
        if counts[u] < cap {
            counts[u] += 1;
            missing -= 1;
        }
        u = (u + 1) % RATINGS_USERS;
    }
    counts
}

/// Points in the unit square spread along random polyline "roads", with a
/// small perpendicular jitter.
pub fn road_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let roads = 40;
    let jitter = Normal::new(0.0, 0.002).expect("jitter");
    let mut polylines: Vec<Vec<[f64; 2]>> = Vec::with_capacity(roads);
    for _ in 0..roads {
        let mut p = [r.random::<f64>(), r.random::<f64>()];
        let mut heading = r.random::<f64>() * std::f64::consts::TAU;
        let mut line = vec![p];
        for _ in 0..6 {
            heading += 0.6 * (r.random::<f64>() - 0.5);
            let step = 0.03 + 0.07 * r.random::<f64>();
            p = [
                (p[0] + step * heading.cos()).clamp(0.0, 1.0),
                (p[1] + step * heading.sin()).clamp(0.0, 1.0),
            ];
            line.push(p);
        }
        polylines.push(line);
    }
    (0..n)
        .map(|_| {
            let line = &polylines[r.random_range(0..roads)];
            let s = r.random_range(0..line.len() - 1);
            let t: f64 = r.random();
            let (a, b) = (line[s], line[s + 1]);
            vec![
                (a[0] + t * (b[0] - a[0]) + jitter.sample(&mut r)).clamp(0.0, 1.0),
                (a[1] + t * (b[1] - a[1]) + jitter.sample(&mut r)).clamp(0.0, 1.0),
            ]
        })
        .collect()
}
