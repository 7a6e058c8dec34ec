//! Eigendecomposition of `diag(d) - b b^T` in `O(k^2)` via the secular
//! equation.
//!
//! The problem is negated into update form `diag(-d) + b b^T`, deflated,
//! solved root by root with a two-pole rational model safeguarded by
//! bisection, and the eigenvectors are rebuilt from Löwner weights
//! recomputed from the computed roots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_SECULAR_ITERS: usize = 128;

const DEFLATE_Z: f64 = 1e-14;
const DEFLATE_D: f64 = 1e-14;

/// Eigenpairs of `diag(d) - b b^T`, eigenvalues non-increasing.
#[derive(Clone, Debug)]
pub struct Dpr1Eig {
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
    /// Number of coordinates removed by deflation before the secular solve.
    pub deflated: usize,
}

impl Dpr1Eig {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigvecs * DMatrix::from_diagonal(&self.eigvals) * self.eigvecs.transpose()
    }
}

struct Rotation {
    p: usize,
    j: usize,
    c: f64,
    s: f64,
}

/// A secular root stored as an offset `tau` from the pole `origin`, so
/// that `dp[j] - lambda = (dp[j] - dp[origin]) - tau` keeps full accuracy.
#[derive(Clone, Copy)]
struct Root {
    origin: usize,
    tau: f64,
}

pub fn dpr1_downdate_eig(d: &[f64], b: &[f64]) -> Result<Dpr1Eig> {
    let k = d.len();
    if b.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: b.len() });
    }
    if d.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entry in DPR1 input"));
    }
    if k == 0 {
        return Ok(Dpr1Eig { eigvals: DVector::zeros(0), eigvecs: DMatrix::zeros(0, 0), deflated: 0 });
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let mut dp: Vec<f64> = order.iter().map(|&o| -d[o]).collect();
    let mut z: Vec<f64> = order.iter().map(|&o| b[o]).collect();

    let bnorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dmax = dp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ztol = DEFLATE_Z * bnorm;
    let dtol = DEFLATE_D * dmax;

    let mut rotations = Vec::new();
    let mut deflated = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for j in 0..k {
        if z[j].abs() <= ztol {
            z[j] = 0.0;
            deflated.push(j);
            continue;
        }
        if let Some(&p) = active.last() {
            if (dp[j] - dp[p]).abs() <= dtol {
                let r = z[p].hypot(z[j]);
                let c = z[j] / r;
                let s = z[p] / r;
                let (a, e) = (dp[p], dp[j]);
                dp[p] = c * c * a + s * s * e;
                dp[j] = s * s * a + c * c * e;
                z[p] = 0.0;
                z[j] = r;
                rotations.push(Rotation { p, j, c, s });
                active.pop();
                deflated.push(p);
            }
        }
        active.push(j);
    }

    let ad: Vec<f64> = active.iter().map(|&j| dp[j]).collect();
    let z2: Vec<f64> = active.iter().map(|&j| z[j] * z[j]).collect();
    let zsum: f64 = z2.iter().sum();
    let roots = (0..ad.len())
        .map(|i| secular_root(&ad, &z2, i, zsum))
        .collect::<Result<Vec<_>>>()?;

    let mut vals = Vec::with_capacity(k);
    let mut w = DMatrix::<f64>::zeros(k, k);
    for (col, &j) in deflated.iter().enumerate() {
        vals.push(-dp[j]);
        w[(j, col)] = 1.0;
    }
    let m = ad.len();
    let diff = |r: &Root, j: usize| (ad[j] - ad[r.origin]) - r.tau;
    let zhat: Vec<f64> = (0..m)
        .map(|j| {
            let mut prod = -diff(&roots[m - 1], j);
            for (i, root) in roots.iter().enumerate().take(m - 1) {
                let den = if i < j { ad[i] - ad[j] } else { ad[i + 1] - ad[j] };
                prod *= -diff(root, j) / den;
            }
            prod.max(0.0).sqrt().copysign(z[active[j]])
        })
        .collect();
    for (i, root) in roots.iter().enumerate() {
        let col = deflated.len() + i;
        vals.push(-ad[root.origin] - root.tau);
        let mut norm2 = 0.0;
        for (j, &row) in active.iter().enumerate() {
            let v = zhat[j] / diff(root, j);
            w[(row, col)] = v;
            norm2 += v * v;
        }
        let inv = 1.0 / norm2.sqrt();
        for &row in &active {
            w[(row, col)] *= inv;
        }
    }

    for rot in rotations.iter().rev() {
        for col in 0..k {
            let (wp, wj) = (w[(rot.p, col)], w[(rot.j, col)]);
            w[(rot.p, col)] = rot.c * wp + rot.s * wj;
            w[(rot.j, col)] = -rot.s * wp + rot.c * wj;
        }
    }

    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &c| vals[c].total_cmp(&vals[a]));
    let eigvals = DVector::from_iterator(k, idx.iter().map(|&i| vals[i]));
    let mut eigvecs = DMatrix::<f64>::zeros(k, k);
    for (col, &src) in idx.iter().enumerate() {
        for (row, &o) in order.iter().enumerate() {
            eigvecs[(o, col)] = w[(row, src)];
        }
    }
    Ok(Dpr1Eig { eigvals, eigvecs, deflated: deflated.len() })
}

/// Root `i` of `1 + sum_j z2[j] / (ad[j] - x)` for strictly increasing `ad`.
fn secular_root(ad: &[f64], z2: &[f64], i: usize, zsum: f64) -> Result<Root> {
    let m = ad.len();
    let last = i + 1 == m;
    let eps = f64::EPSILON;

    // psi collects poles at or left of i, phi those to the right.
    let eval = |origin: usize, tau: f64| {
        let (mut psi, mut dpsi, mut phi, mut dphi, mut mag) = (0.0, 0.0, 0.0, 0.0, 1.0);
        for j in 0..m {
            let inv = 1.0 / ((ad[j] - ad[origin]) - tau);
            let t = z2[j] * inv;
            mag += t.abs();
            if j <= i {
                psi += t;
                dpsi += t * inv;
            } else {
                phi += t;
                dphi += t * inv;
            }
        }
        (psi, dpsi, phi, dphi, mag)
    };

    let (origin, mut lo, mut hi) = if last {
        (i, 0.0, zsum)
    } else {
        let width = ad[i + 1] - ad[i];
        let (psi, _, phi, _, _) = eval(i, 0.5 * width);
        if 1.0 + psi + phi >= 0.0 {
            (i, 0.0, 0.5 * width)
        } else {
            (i + 1, -0.5 * width, 0.0)
        }
    };
    let a = ad[i] - ad[origin];
    let b = if last { f64::INFINITY } else { ad[i + 1] - ad[origin] };

    let mut tau = 0.5 * (lo + hi);
    for _ in 0..MAX_SECULAR_ITERS {
        let (psi, dpsi, phi, dphi, mag) = eval(origin, tau);
        let f = 1.0 + psi + phi;
        if f == 0.0 || f.abs() <= 4.0 * eps * m as f64 * mag {
            return Ok(Root { origin, tau });
        }
        if f < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= 2.0 * eps * lo.abs().max(hi.abs()) {
            return Ok(Root { origin, tau });
        }

        let q = dpsi * (a - tau) * (a - tau);
        let p = psi - q / (a - tau);
        let x = if last {
            let c = 1.0 + p;
            if c > 0.0 {
                a + q / c
            } else {
                f64::NAN
            }
        } else {
            let s = dphi * (b - tau) * (b - tau);
            let r = phi - s / (b - tau);
            two_pole_root(1.0 + p + r, q, s, a, b)
        };
        let inside = x > lo && (x < hi || (last && x <= hi));
        let next = if inside { x } else { 0.5 * (lo + hi) };
        if next == tau {
            return Ok(Root { origin, tau });
        }
        tau = next;
    }
    Err(Error::NoConvergence { interval: i })
}

/// Root in `(a, b)` of `c + q/(a - x) + s/(b - x)` with `q, s > 0`.
fn two_pole_root(c: f64, q: f64, s: f64, a: f64, b: f64) -> f64 {
    let bb = c * (a + b) + q + s;
    let cc = c * a * b + q * b + s * a;
    if c == 0.0 {
        return cc / bb;
    }
    let sq = (bb * bb - 4.0 * c * cc).max(0.0).sqrt();
    let (x1, x2) = if bb >= 0.0 {
        ((bb + sq) / (2.0 * c), 2.0 * cc / (bb + sq))
    } else {
        (2.0 * cc / (bb - sq), (bb - sq) / (2.0 * c))
    };
    if x2 > a && x2 < b {
        x2
    } else {
        x1
    }
}
