//! Dense kernels at sketch scale: thin QR, truncated pivoted Cholesky,
//! triangular solves, reference eigensolvers and the DPR1 downdate solver.

mod dpr1;

pub use dpr1::{dpr1_downdate_eig, Dpr1Eig, MAX_SECULAR_ITERS};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin QR `Y = QR` with the diagonal of `R` made non-negative.
pub fn thin_qr(y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = y.shape();
    assert!(k <= n, "thin_qr needs at least as many rows as columns");
    if k == 0 {
        return (DMatrix::zeros(n, 0), DMatrix::zeros(0, 0));
    }
    let qr = y.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).neg_mut();
            q.column_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Output of [`cholp`]: `P^T S P = C^T C` where `P e_j = e_{perm[j]}`.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    /// Upper-trapezoidal `rank x k` factor in pivoted column order.
    pub factor: DMatrix<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl PivotedCholesky {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Leading `rank x rank` triangle `C_1`.
    pub fn leading_block(&self) -> DMatrix<f64> {
        self.factor.columns(0, self.rank).into_owned()
    }

    /// `pos[i]` is the pivoted position of original index `i`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.perm.len()];
        for (p, &i) in self.perm.iter().enumerate() {
            pos[i] = p;
        }
        pos
    }

    /// `P C^T C P^T`, the approximation of `S` in its original ordering.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.dim();
        let ctc = self.factor.transpose() * &self.factor;
        DMatrix::from_fn(k, k, |i, j| {
            let pos = |x: usize| self.perm.iter().position(|&p| p == x).unwrap();
            ctc[(pos(i), pos(j))]
        })
    }
}

const INDEFINITE_SLACK: f64 = 4.0;

/// Truncated Cholesky with greedy diagonal pivoting and the default stop
/// tolerance `k * eps * max_i S_ii`.
pub fn cholp(s: &DMatrix<f64>) -> Result<PivotedCholesky> {
    cholp_with_tolerance(s, None)
}

pub fn cholp_with_tolerance(s: &DMatrix<f64>, tolerance: Option<f64>) -> Result<PivotedCholesky> {
    let k = s.nrows();
    if s.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: s.ncols() });
    }
    check_symmetric(s, 1e-12)?;
    let max_diag = (0..k).map(|i| s[(i, i)]).fold(0.0f64, f64::max);
    let tol = tolerance.unwrap_or(k as f64 * f64::EPSILON * max_diag);
    // Updated diagonals carry cancellation error of a few eps * max_diag
    // even for exactly semi-definite input.
    let indefinite = INDEFINITE_SLACK * tol.max(k as f64 * f64::EPSILON * max_diag);

    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag: Vec<f64> = (0..k).map(|i| s[(i, i)]).collect();
    let mut c = DMatrix::<f64>::zeros(k, k);
    let mut rank = 0;
    for j in 0..k {
        let (q, &dmax) = diag[j..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(q, v)| (q + j, v))
            .unwrap();
        if dmax <= tol {
            if dmax < -indefinite {
                return Err(Error::Indefinite { step: j, pivot: dmax, tolerance: indefinite });
            }
            break;
        }
        if q != j {
            perm.swap(j, q);
            diag.swap(j, q);
            c.swap_columns(j, q);
        }
        let cjj = dmax.sqrt();
        c[(j, j)] = cjj;
        let pj = perm[j];
        for i in j + 1..k {
            let mut v = s[(pj, perm[i])];
            for l in 0..j {
                v -= c[(l, j)] * c[(l, i)];
            }
            let cji = v / cjj;
            c[(j, i)] = cji;
            diag[i] -= cji * cji;
        }
        rank = j + 1;
    }
    let factor = c.rows(0, rank).into_owned();
    Ok(PivotedCholesky { factor, perm, rank })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Triangle {
    Upper,
    Lower,
}

/// Returns `M T^{-1}`, or `M T^{-T}` when `transpose` is set.
pub fn tri_solve_right(
    m: &DMatrix<f64>,
    t: &DMatrix<f64>,
    triangle: Triangle,
    transpose: bool,
) -> Result<DMatrix<f64>> {
    let k = t.nrows();
    if t.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: t.ncols() });
    }
    if m.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: m.ncols() });
    }
    let norm_inf = (0..k)
        .map(|i| t.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    for j in 0..k {
        if t[(j, j)].abs() <= 1e-14 * norm_inf || t[(j, j)] == 0.0 {
            return Err(Error::Singular { index: j });
        }
    }
    // Solve X E = M where E = T or T^T; `e(l, j)` reads E without copying.
    let e = |l: usize, j: usize| if transpose { t[(j, l)] } else { t[(l, j)] };
    let upper = (triangle == Triangle::Upper) != transpose;
    let mut x = m.clone();
    let nr = x.nrows();
    let data = x.as_mut_slice();
    let order: Vec<usize> = if upper { (0..k).collect() } else { (0..k).rev().collect() };
    for (step, &j) in order.iter().enumerate() {
        for &l in &order[..step] {
            let coef = e(l, j);
            if coef != 0.0 {
                for r in 0..nr {
                    data[j * nr + r] -= coef * data[l * nr + r];
                }
            }
        }
        let inv = 1.0 / e(j, j);
        for v in &mut data[j * nr..(j + 1) * nr] {
            *v *= inv;
        }
    }
    Ok(x)
}

fn check_symmetric(s: &DMatrix<f64>, rel: f64) -> Result<()> {
    let n = s.nrows();
    let scale = s.amax();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if worst > rel * scale {
        return Err(Error::NotSymmetric { asymmetry: worst });
    }
    Ok(())
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing.
pub fn sym_eig_dense(s: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.ncols() });
    }
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    check_symmetric(s, 1e-10)?;
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = eig.eigenvectors.select_columns(&order);
    Ok((vals, vecs))
}

/// Largest number of one-sided Jacobi sweeps before giving up on further
/// orthogonalization.
const JACOBI_MAX_SWEEPS: usize = 60;

/// Thin SVD `Z = U diag(sigma) W^T`; returns `U` and non-increasing `sigma`.
///
/// One-sided Jacobi on the columns of `Z`. Bidiagonal QR lost accuracy on
/// tightly clustered singular values, which sketches of flat spectra produce.
pub fn thin_svd(z: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let (m, r) = z.shape();
    if r == 0 || m == 0 {
        return (DMatrix::zeros(m, 0), DVector::zeros(0));
    }
    let mut a = z.clone();
    let tol = m as f64 * f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..r {
            for q in p + 1..r {
                let (alpha, beta, gamma) = {
                    let cp = a.column(p);
                    let cq = a.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let data = a.as_mut_slice();
                let (head, tail) = data.split_at_mut(q * m);
                let colp = &mut head[p * m..p * m + m];
                let colq = &mut tail[..m];
                for (x, y) in colp.iter_mut().zip(colq.iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..r).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma = DVector::from_iterator(r, order.iter().map(|&j| norms[j]));
    let floor = sigma[0] * f64::EPSILON * m as f64;
    let mut u = DMatrix::zeros(m, r);
    for (dst, &j) in order.iter().enumerate() {
        if norms[j] > floor && norms[j] > 0.0 {
            u.set_column(dst, &(a.column(j) / norms[j]));
        } else {
            u.set_column(dst, &complete_basis(&u, dst));
        }
    }
    (u, sigma)
}

/// A unit vector orthogonal to the first `filled` columns of `u`.
fn complete_basis(u: &DMatrix<f64>, filled: usize) -> DVector<f64> {
    let m = u.nrows();
    let mut best = DVector::zeros(m);
    let mut best_norm = -1.0;
    for e in 0..m {
        let mut v = DVector::zeros(m);
        v[e] = 1.0;
        for _ in 0..2 {
            for j in 0..filled {
                let proj = u.column(j).dot(&v);
                v.axpy(-proj, &u.column(j), 1.0);
            }
        }
        let nv = v.norm();
        if nv > best_norm {
            best_norm = nv;
            best = v;
        }
        if nv > 0.5 {
            break;
        }
    }
    best / best_norm
}
