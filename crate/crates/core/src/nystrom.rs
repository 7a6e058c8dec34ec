//! Gaussian sketching and the stabilized Nyström factorization
//! `A ~ U diag(lambda) U^T`, with leave-one-out downdates.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lakernels::{
    cholp_with_tolerance, dpr1_downdate_eig, thin_qr, thin_svd, tri_solve_right, Dpr1Eig,
    PivotedCholesky, Triangle,
};
use crate::operators::LinearOperator;
use crate::random::gaussian_matrix;
use crate::specfun::{clamp, SpectralFunction, CLAMP_RELATIVE};

/// Test matrix `Omega` and its image `Y = A Omega`.
#[derive(Clone, Debug)]
pub struct SketchPair {
    omega: DMatrix<f64>,
    y: DMatrix<f64>,
    seed: u64,
    matvec_units: usize,
}

impl SketchPair {
    pub fn new(omega: DMatrix<f64>, y: DMatrix<f64>, seed: u64, matvec_units: usize) -> Result<Self> {
        if omega.shape() != y.shape() {
            return Err(Error::DimensionMismatch { expected: omega.ncols(), found: y.ncols() });
        }
        if omega.ncols() > omega.nrows() {
            return Err(Error::invalid(format!(
                "sketch size {} exceeds dimension {}",
                omega.ncols(),
                omega.nrows()
            )));
        }
        Ok(Self { omega, y, seed, matvec_units })
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matvec_units(&self) -> usize {
        self.matvec_units
    }

    pub fn n(&self) -> usize {
        self.omega.nrows()
    }

    pub fn k(&self) -> usize {
        self.omega.ncols()
    }

    fn units_per_column(&self) -> usize {
        if self.k() == 0 {
            1
        } else {
            self.matvec_units / self.k()
        }
    }

    /// The first `k` columns. Equals a fresh sketch of size `k` with the
    /// same seed.
    pub fn prefix(&self, k: usize) -> SketchPair {
        assert!(k <= self.k());
        SketchPair {
            omega: self.omega.columns(0, k).into_owned(),
            y: self.y.columns(0, k).into_owned(),
            seed: self.seed,
            matvec_units: k * self.units_per_column(),
        }
    }

    /// Columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> SketchPair {
        SketchPair {
            omega: self.omega.select_columns(perm),
            y: self.y.select_columns(perm),
            seed: self.seed,
            matvec_units: self.matvec_units,
        }
    }

    pub fn without_column(&self, i: usize) -> SketchPair {
        SketchPair {
            omega: self.omega.clone().remove_column(i),
            y: self.y.clone().remove_column(i),
            seed: self.seed,
            matvec_units: self.matvec_units - self.units_per_column(),
        }
    }
}

/// `Omega` is `n x k` standard Gaussian from `seed` (see [`crate::random`]).
pub fn gaussian_sketch(op: &dyn LinearOperator, k: usize, seed: u64) -> Result<SketchPair> {
    let n = op.dim();
    if k == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("sketch size {k} exceeds dimension {n}")));
    }
    let omega = gaussian_matrix(n, k, seed);
    let y = op.apply(&omega);
    Ok(SketchPair { omega, y, seed, matvec_units: k * op.units_per_column() })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NystromOptions {
    /// Overrides the pivoted Cholesky stop tolerance.
    pub cholesky_tolerance: Option<f64>,
}

/// Output of the stabilized Nyström procedure.
#[derive(Debug)]
pub struct NystromFactorization {
    sketch: SketchPair,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    chol: PivotedCholesky,
    z: DMatrix<f64>,
    u_tilde: DMatrix<f64>,
    lambda: DVector<f64>,
    u_hat: OnceLock<DMatrix<f64>>,
}

pub fn nys_svd(sketch: &SketchPair) -> Result<NystromFactorization> {
    nys_svd_with(sketch, NystromOptions::default())
}

pub fn nys_svd_with(sketch: &SketchPair, opts: NystromOptions) -> Result<NystromFactorization> {
    let (q, r) = thin_qr(sketch.y());
    let gram = sketch.omega().tr_mul(sketch.y());
    NystromFactorization::from_parts(sketch.clone(), q, r, &gram, opts)
}

/// Factorizations of every prefix `sketch.prefix(k)` for `k` in `ks`,
/// sharing one QR of `Y` and one Gram product.
pub fn nys_svd_prefixes(
    sketch: &SketchPair,
    ks: &[usize],
    opts: NystromOptions,
) -> Result<Vec<NystromFactorization>> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let top = sketch.prefix(kmax);
    let (q, r) = thin_qr(top.y());
    let gram = top.omega().tr_mul(top.y());
    ks.iter()
        .map(|&k| {
            NystromFactorization::from_parts(
                top.prefix(k),
                q.columns(0, k).into_owned(),
                r.view((0, 0), (k, k)).into_owned(),
                &gram.view((0, 0), (k, k)).into_owned(),
                opts,
            )
        })
        .collect()
}

impl NystromFactorization {
    fn from_parts(
        sketch: SketchPair,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        gram: &DMatrix<f64>,
        opts: NystromOptions,
    ) -> Result<Self> {
        let sym = (gram + gram.transpose()) * 0.5;
        let chol = cholp_with_tolerance(&sym, opts.cholesky_tolerance)?;
        let rank = chol.rank;
        let rp = r.select_columns(&chol.perm[..rank]);
        let z = tri_solve_right(&rp, &chol.leading_block(), Triangle::Upper, false)?;
        let (u_tilde, sigma) = thin_svd(&z);
        let lambda = sigma.map(|s| s * s);
        Ok(Self { sketch, q, r, chol, z, u_tilde, lambda, u_hat: OnceLock::new() })
    }

    pub fn sketch(&self) -> &SketchPair {
        &self.sketch
    }

    pub fn k(&self) -> usize {
        self.sketch.k()
    }

    pub fn n(&self) -> usize {
        self.sketch.n()
    }

    pub fn rank(&self) -> usize {
        self.chol.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.k()
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn cholesky(&self) -> &PivotedCholesky {
        &self.chol
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn u_tilde(&self) -> &DMatrix<f64> {
        &self.u_tilde
    }

    /// `U = Q U~`, formed on first use.
    pub fn u_hat(&self) -> &DMatrix<f64> {
        self.u_hat.get_or_init(|| &self.q * &self.u_tilde)
    }

    /// Dense `U diag(lambda) U^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let u = self.u_hat();
        let mut ul = u.clone();
        for (j, mut c) in ul.column_iter_mut().enumerate() {
            c *= self.lambda[j];
        }
        &ul * u.transpose()
    }

    fn require_full_rank(&self) -> Result<()> {
        if !self.is_full_rank() {
            return Err(Error::RankDeficient { rank: self.rank(), k: self.k() });
        }
        Ok(())
    }

    /// Columns `b_i` of the leave-one-out downdates
    /// `A_{-i} = U (diag(lambda) - b_i b_i^T) U^T`.
    pub fn loo_vectors(&self) -> Result<DMatrix<f64>> {
        self.require_full_rank()?;
        let k = self.k();
        let c_inv = tri_solve_right(&DMatrix::identity(k, k), &self.chol.factor, Triangle::Upper, false)?;
        let pos = self.chol.positions();
        let mut s = DMatrix::zeros(k, k);
        for i in 0..k {
            let t = c_inv.row(pos[i]).transpose();
            let norm = t.norm();
            s.set_column(i, &(t / norm));
        }
        Ok(self.u_tilde.tr_mul(&self.z) * s)
    }

    /// `X = U^T Omega` through the sketch-sized factors. Falls back to the
    /// direct product when `R` is singular, signalled by the flag.
    pub fn x_matrix(&self) -> Result<(DMatrix<f64>, bool)> {
        self.require_full_rank()?;
        let m = self.chol.reconstruct();
        match tri_solve_right(&m.transpose(), &self.r, Triangle::Upper, false) {
            Ok(w) => Ok((self.u_tilde.tr_mul(&w.transpose()), false)),
            Err(Error::Singular { .. }) => Ok((self.u_hat().tr_mul(self.sketch.omega()), true)),
            Err(e) => Err(e),
        }
    }

    pub fn loo_downdate(&self, i: usize) -> Result<DowndateResult> {
        self.require_full_rank()?;
        if i >= self.k() {
            return Err(Error::invalid(format!("column index {i} out of range")));
        }
        let b = self.loo_vectors()?.column(i).into_owned();
        downdate(&self.lambda, i, b)
    }
}

/// Eigendecomposition of one leave-one-out downdate.
#[derive(Clone, Debug)]
pub struct DowndateResult {
    pub index: usize,
    pub b: DVector<f64>,
    pub eig: Dpr1Eig,
}

pub(crate) fn downdate(lambda: &DVector<f64>, index: usize, b: DVector<f64>) -> Result<DowndateResult> {
    let mut eig = dpr1_downdate_eig(lambda.as_slice(), b.as_slice())?;
    let scale = lambda.iter().fold(0.0f64, |m, v| m.max(*v));
    // Exact downdates are PSD; only roundoff below -1e-12 * lambda_1 is cleared.
    for v in eig.eigvals.iter_mut() {
        *v = clamp(&SpectralFunction::Identity, *v, scale)?;
    }
    // Dropping one sketch column lowers the rank by one, so the smallest
    // eigenvalue is structurally zero; roundoff there would leak through
    // functions with unbounded slope at 0.
    if let Some(last) = eig.eigvals.as_mut_slice().last_mut() {
        if last.abs() <= CLAMP_RELATIVE * scale {
            *last = 0.0;
        }
    }
    Ok(DowndateResult { index, b, eig })
}

/// `f(A) = U f(diag(lambda)) U^T` kept in factored form.
#[derive(Clone, Debug)]
pub struct FunNystrom {
    basis: DMatrix<f64>,
    values: DVector<f64>,
}

pub fn fun_nystrom(fact: &NystromFactorization, f: &SpectralFunction) -> Result<FunNystrom> {
    let scale = fact.lambda.iter().fold(0.0f64, |m, v| m.max(*v));
    let values = fact
        .lambda
        .iter()
        .map(|&l| f.eval_scaled(l, scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(FunNystrom { basis: fact.u_hat().clone(), values: DVector::from_vec(values) })
}

impl FunNystrom {
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = self.basis.tr_mul(block);
        for mut col in c.column_iter_mut() {
            col.component_mul_assign(&self.values);
        }
        &self.basis * c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_synthetic, DenseOperator, SpectrumProfile};

    fn diag_op(v: &[f64]) -> DenseOperator {
        DenseOperator::new(DMatrix::from_diagonal(&DVector::from_row_slice(v))).unwrap()
    }

    #[test]
    fn sketch_determinism_and_units() {
        let op = diag_op(&[1.0, 2.0, 3.0, 4.0]);
        let a = gaussian_sketch(&op, 3, 9).unwrap();
        let b = gaussian_sketch(&op, 3, 9).unwrap();
        assert_eq!(a.omega(), b.omega());
        assert_eq!(a.y(), b.y());
        assert!(gaussian_sketch(&op, 5, 9).is_err());
        assert_eq!(a.prefix(2).omega(), gaussian_sketch(&op, 2, 9).unwrap().omega());
    }

    #[test]
    fn exact_rank_one() {
        let op = diag_op(&[5.0, 0.0, 0.0]);
        let f = nys_svd(&gaussian_sketch(&op, 2, 1).unwrap()).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.lambda()[0] - 5.0).abs() < 1e-12);
        assert!((f.u_hat()[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_recovered() {
        let op = diag_op(&[1.0, 1.0, 1.0]);
        let f = nys_svd(&gaussian_sketch(&op, 3, 4).unwrap()).unwrap();
        assert!((f.reconstruct() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn loo_for_single_column() {
        let op = make_synthetic(&SpectrumProfile::exp(10), 0, false).unwrap();
        let f = nys_svd(&gaussian_sketch(&op, 1, 2).unwrap()).unwrap();
        let d = f.loo_downdate(0).unwrap();
        assert!(d.eig.eigvals.iter().all(|&v| v == 0.0));
        assert!((d.b.norm_squared() - f.lambda()[0]).abs() <= 1e-12 * f.lambda()[0]);
    }

    #[test]
    fn fun_nystrom_traces() {
        let op = diag_op(&[std::f64::consts::E - 1.0, 0.0, 0.0]);
        let f = nys_svd(&gaussian_sketch(&op, 2, 3).unwrap()).unwrap();
        let fl = fun_nystrom(&f, &SpectralFunction::Log1p).unwrap();
        assert!((fl.trace() - 1.0).abs() < 1e-12);
        let fi = fun_nystrom(&f, &SpectralFunction::Identity).unwrap();
        assert!((fi.trace() - f.lambda().sum()).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_rejects_downdate() {
        let op = diag_op(&[5.0, 0.0, 0.0]);
        let f = nys_svd(&gaussian_sketch(&op, 2, 1).unwrap()).unwrap();
        assert!(matches!(f.loo_downdate(0), Err(Error::RankDeficient { rank: 1, k: 2 })));
    }
}
