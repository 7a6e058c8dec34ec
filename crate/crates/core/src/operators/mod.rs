//! Matrix-free symmetric positive semi-definite operators.

mod kernel;
mod sparse;
mod synthetic;

pub use kernel::{build_kernel, kernel_matrix, read_points_csv, KernelKind, KernelOperator, KernelSpec};
pub use sparse::{
    gramian, parse_matrix_market, parse_movielens, read_matrix_market, read_movielens,
    write_matrix_market, GramianOperator, SparseMatrix,
};
pub use synthetic::{make_synthetic, random_orthogonal, SpectrumProfile, SyntheticOperator};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::random::gaussian_matrix;

/// Largest dimension for which dense oracles are built.
pub const DENSE_LIMIT: usize = 2000;

/// An `n x n` SPSD operator accessed only through block products.
///
/// `apply` must be deterministic and safe to call from several threads.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Returns `A B` for an `n x m` block `B`.
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64>;

    /// Matvec units charged per applied column.
    fn units_per_column(&self) -> usize {
        1
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        (**self).apply(block)
    }
    fn units_per_column(&self) -> usize {
        (**self).units_per_column()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        (**self).apply(block)
    }
    fn units_per_column(&self) -> usize {
        (**self).units_per_column()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        (**self).apply(block)
    }
    fn units_per_column(&self) -> usize {
        (**self).units_per_column()
    }
}

#[derive(Clone, Debug)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("dense operator must be square"));
        }
        if matrix.nrows() == 0 {
            return Err(Error::invalid("dense operator must be non-empty"));
        }
        let scale = matrix.amax();
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        &self.matrix * block
    }
}

#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    diag: DVector<f64>,
}

impl DiagonalOperator {
    pub fn new(diag: DVector<f64>) -> Self {
        Self { diag }
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diag
    }
}

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = block.clone();
        for mut col in out.column_iter_mut() {
            col.component_mul_assign(&self.diag);
        }
        out
    }
}

/// `U diag(values) U^T` for an `n x r` basis `U` with orthonormal columns.
#[derive(Clone, Debug)]
pub struct FactoredOperator {
    basis: DMatrix<f64>,
    values: DVector<f64>,
}

impl FactoredOperator {
    pub fn new(basis: DMatrix<f64>, values: DVector<f64>) -> Result<Self> {
        if basis.ncols() != values.len() {
            return Err(Error::DimensionMismatch { expected: basis.ncols(), found: values.len() });
        }
        Ok(Self { basis, values })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

impl LinearOperator for FactoredOperator {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }
    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = self.basis.tr_mul(block);
        for mut col in c.column_iter_mut() {
            col.component_mul_assign(&self.values);
        }
        &self.basis * c
    }
}

/// Forms the dense matrix of `op` by applying it to the identity.
pub fn materialize(op: &dyn LinearOperator) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    let a = op.apply(&DMatrix::identity(n, n));
    Ok((&a + a.transpose()) * 0.5)
}

/// Worst relative symmetry and positivity defects seen over random probes.
#[derive(Clone, Copy, Debug)]
pub struct ProbeReport {
    /// `max |u^T A v - v^T A u| / (|A u| |v|)`.
    pub asymmetry: f64,
    /// `min v^T A v / |v|^2`.
    pub min_quadratic: f64,
}

pub fn probe_spsd(op: &dyn LinearOperator, probes: usize, seed: u64) -> ProbeReport {
    let n = op.dim();
    let u = gaussian_matrix(n, probes, seed);
    let v = gaussian_matrix(n, probes, seed ^ 0x5bd1_e995);
    let au = op.apply(&u);
    let av = op.apply(&v);
    let mut asymmetry = 0.0f64;
    let mut min_quadratic = f64::INFINITY;
    for j in 0..probes {
        let (uj, vj) = (u.column(j), v.column(j));
        let (auj, avj) = (au.column(j), av.column(j));
        let denom = auj.norm() * vj.norm();
        let gap = (uj.dot(&avj) - vj.dot(&auj)).abs();
        if denom > 0.0 {
            asymmetry = asymmetry.max(gap / denom);
        } else if gap > 0.0 {
            asymmetry = f64::INFINITY;
        }
        min_quadratic = min_quadratic.min(vj.dot(&avj) / vj.norm_squared());
    }
    ProbeReport { asymmetry, min_quadratic }
}
