//! Trace estimators built on one Gaussian sketch.
//!
//! Every estimator has a convenience form taking `(op, k, seed)` and a
//! `*_from` form taking a prebuilt sketch or factorization so that several
//! estimators can share the same randomness.

mod loo;

pub use loo::{
    flextrace_fast, flextrace_from, flextrace_naive, flextrace_naive_from, fun_nys_pp,
    fun_nys_pp_from, i_flextrace, i_flextrace_from, nystrom_pp, nystrom_pp_from, xnystrace,
    xnystrace_from, NAIVE_LIMIT,
};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lakernels::sym_eig_dense;
use crate::nystrom::{fun_nystrom, gaussian_sketch, NystromFactorization, SketchPair};
use crate::operators::{materialize, LinearOperator, SyntheticOperator, DENSE_LIMIT};
use crate::specfun::SpectralFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    GirardHutchinson,
    FunNys,
    NystromPP,
    XNysTrace,
    FunNystromPP,
    IFlexTrace,
    FlexTrace,
    FlexTraceNaive,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        EstimatorKind::GirardHutchinson,
        EstimatorKind::FunNys,
        EstimatorKind::NystromPP,
        EstimatorKind::XNysTrace,
        EstimatorKind::FunNystromPP,
        EstimatorKind::IFlexTrace,
        EstimatorKind::FlexTrace,
        EstimatorKind::FlexTraceNaive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::GirardHutchinson => "Hutchinson",
            EstimatorKind::FunNys => "FunNys",
            EstimatorKind::NystromPP => "Nystrom++",
            EstimatorKind::XNysTrace => "XNysTrace",
            EstimatorKind::FunNystromPP => "funNystrom++",
            EstimatorKind::IFlexTrace => "i-FlexTrace",
            EstimatorKind::FlexTrace => "FlexTrace",
            EstimatorKind::FlexTraceNaive => "FlexTrace-naive",
        }
    }

    /// Estimators that only target `tr A`.
    pub fn linear_only(&self) -> bool {
        matches!(
            self,
            EstimatorKind::GirardHutchinson | EstimatorKind::NystromPP | EstimatorKind::XNysTrace
        )
    }

    /// Estimators that need products with `f(A)`.
    pub fn needs_oracle(&self) -> bool {
        matches!(self, EstimatorKind::FunNystromPP | EstimatorKind::IFlexTrace)
    }

    pub fn min_k(&self) -> usize {
        match self {
            EstimatorKind::NystromPP
            | EstimatorKind::XNysTrace
            | EstimatorKind::FunNystromPP
            | EstimatorKind::IFlexTrace => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        EstimatorKind::ALL
            .into_iter()
            .find(|e| e.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "gh" | "girard-hutchinson" => Some(EstimatorKind::GirardHutchinson),
                "nystrompp" => Some(EstimatorKind::NystromPP),
                "funnystrompp" => Some(EstimatorKind::FunNystromPP),
                "iflextrace" => Some(EstimatorKind::IFlexTrace),
                _ => None,
            })
            .ok_or_else(|| Error::invalid(format!("unknown estimator '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct TraceEstimate {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub function: String,
    /// Sketch columns used.
    pub k: usize,
    pub matvec_units: usize,
    pub seed: u64,
    /// Per-index terms whose mean is `value`, when the estimator has them.
    pub loo_terms: Option<Vec<f64>>,
    /// The numerical rank fell below `k` and `tr f(A_nys)` was returned.
    pub short_circuit: bool,
    /// `U^T Omega` was formed directly because `R` was singular.
    pub x_fallback: bool,
    /// The estimate used products with `f(A)` beyond the sketch.
    pub multi_pass: bool,
}

impl TraceEstimate {
    pub(crate) fn new(estimator: EstimatorKind, f: &SpectralFunction, sketch: &SketchPair, value: f64) -> Self {
        Self {
            value,
            estimator,
            function: f.to_string(),
            k: sketch.k(),
            matvec_units: sketch.matvec_units(),
            seed: sketch.seed(),
            loo_terms: None,
            short_circuit: false,
            x_fallback: false,
            multi_pass: false,
        }
    }

    pub(crate) fn with_terms(mut self, terms: Vec<f64>) -> Self {
        self.value = mean(&terms);
        self.loo_terms = Some(terms);
        self
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Exact products with `f(A) = V diag(f(lambda)) V^T`.
#[derive(Clone, Debug)]
pub struct FunctionOracle {
    /// `None` stands for the identity basis of a diagonal operator.
    basis: Option<DMatrix<f64>>,
    values: DVector<f64>,
}

impl FunctionOracle {
    pub fn from_spectrum(basis: Option<DMatrix<f64>>, eigvals: &[f64], f: &SpectralFunction) -> Result<Self> {
        if let Some(b) = &basis {
            if b.ncols() != eigvals.len() {
                return Err(Error::DimensionMismatch { expected: b.ncols(), found: eigvals.len() });
            }
        }
        let scale = eigvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let values = eigvals
            .iter()
            .map(|&l| f.eval_scaled(l, scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, values: DVector::from_vec(values) })
    }

    pub fn from_synthetic(op: &SyntheticOperator, f: &SpectralFunction) -> Result<Self> {
        Self::from_spectrum(op.rotation().cloned(), op.eigenvalues(), f)
    }

    /// Dense eigendecomposition of the materialized operator.
    pub fn from_operator(op: &dyn LinearOperator, f: &SpectralFunction) -> Result<Self> {
        if op.dim() > DENSE_LIMIT {
            return Err(Error::TooLarge { n: op.dim(), limit: DENSE_LIMIT });
        }
        let (vals, vecs) = sym_eig_dense(&materialize(op)?)?;
        Self::from_spectrum(Some(vecs), vals.as_slice(), f)
    }

    /// `tr f(A)`.
    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl LinearOperator for FunctionOracle {
    fn dim(&self) -> usize {
        match &self.basis {
            Some(b) => b.nrows(),
            None => self.values.len(),
        }
    }

    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.basis {
            None => {
                let mut out = block.clone();
                for mut col in out.column_iter_mut() {
                    col.component_mul_assign(&self.values);
                }
                out
            }
            Some(v) => {
                let mut c = v.tr_mul(block);
                for mut col in c.column_iter_mut() {
                    col.component_mul_assign(&self.values);
                }
                v * c
            }
        }
    }
}

/// `(1/k) sum_i w_i^T y_i` from the sketch.
pub fn girard_hutchinson_from(sketch: &SketchPair) -> TraceEstimate {
    let k = sketch.k();
    let terms: Vec<f64> = (0..k).map(|i| sketch.omega().column(i).dot(&sketch.y().column(i))).collect();
    TraceEstimate::new(EstimatorKind::GirardHutchinson, &SpectralFunction::Identity, sketch, 0.0)
        .with_terms(terms)
}

pub fn girard_hutchinson(op: &dyn LinearOperator, k: usize, seed: u64) -> Result<TraceEstimate> {
    Ok(girard_hutchinson_from(&gaussian_sketch(op, k, seed)?))
}

/// `tr f(A_nys)`.
pub fn fun_nys_trace(fact: &NystromFactorization, f: &SpectralFunction) -> Result<TraceEstimate> {
    let value = fun_nystrom(fact, f)?.trace();
    Ok(TraceEstimate::new(EstimatorKind::FunNys, f, fact.sketch(), value))
}
