//! Matrix-free estimation of `tr f(A)` for symmetric positive semi-definite
//! operators from Gaussian sketches.
//!
//! The crate provides the stabilized Nyström factorization, leave-one-out
//! downdates backed by a diagonal-plus-rank-one eigensolver, the FlexTrace
//! family of exchangeable estimators and the closed-form error bounds.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod lakernels;
pub mod nystrom;
pub mod operators;
pub mod random;
pub mod specfun;

pub use error::{Error, Result};
pub use estimators::{EstimatorKind, FunctionOracle, TraceEstimate};
pub use lakernels::{Dpr1Eig, PivotedCholesky};
pub use nystrom::{DowndateResult, FunNystrom, NystromFactorization, SketchPair};
pub use operators::{
    KernelKind, KernelOperator, KernelSpec, LinearOperator, SparseMatrix, SpectrumProfile,
    SyntheticOperator,
};
pub use specfun::SpectralFunction;

pub use nalgebra::{DMatrix, DVector};
