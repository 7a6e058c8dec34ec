use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{EstimatorKind, FunctionOracle, TraceEstimate};
use crate::error::{Error, Result};
use crate::nystrom::{downdate, gaussian_sketch, nys_svd, NystromFactorization, SketchPair};
use crate::operators::LinearOperator;
use crate::specfun::SpectralFunction;

/// Largest dimension accepted by the from-scratch reference implementation.
pub const NAIVE_LIMIT: usize = 500;

/// Index work above this many columns is spread over the thread pool.
const PARALLEL_MIN_K: usize = 16;

fn check_k(kind: EstimatorKind, k: usize) -> Result<()> {
    if k < kind.min_k() {
        return Err(Error::invalid(format!("{kind} needs k >= {}, got {k}", kind.min_k())));
    }
    Ok(())
}

fn check_oracle(fact: &NystromFactorization, oracle: &FunctionOracle) -> Result<()> {
    if oracle.dim() != fact.n() {
        return Err(Error::DimensionMismatch { expected: fact.n(), found: oracle.dim() });
    }
    Ok(())
}

fn f_lambda(fact: &NystromFactorization, f: &SpectralFunction) -> DVector<f64> {
    fact.lambda().map(|l| f.value(l))
}

fn short_circuit(kind: EstimatorKind, fact: &NystromFactorization, f: &SpectralFunction) -> TraceEstimate {
    let value = f_lambda(fact, f).sum();
    let mut est = TraceEstimate::new(kind, f, fact.sketch(), value);
    est.short_circuit = true;
    est
}

fn sq_weighted(w: &DVector<f64>, x: impl Iterator<Item = f64>) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b * b).sum()
}

fn map_indices<T: Send>(k: usize, work: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    if k >= PARALLEL_MIN_K {
        (0..k).into_par_iter().map(work).collect()
    } else {
        (0..k).map(work).collect()
    }
}

/// Per-index terms of the linear estimators, using only `lambda`, `b_i`
/// and `x_i = U^T w_i`; no eigensolves are needed when `f` is linear.
fn linear_terms(fact: &NystromFactorization, indices: &[usize]) -> Result<(Vec<f64>, bool)> {
    let b = fact.loo_vectors()?;
    let (x, fallback) = fact.x_matrix()?;
    let lam = fact.lambda();
    let total = lam.sum();
    let sk = fact.sketch();
    let terms = indices
        .iter()
        .map(|&i| {
            let bi = b.column(i);
            let xi = x.column(i);
            let trace_loo = total - bi.norm_squared();
            let quad_loo = sq_weighted(lam, xi.iter().copied()) - bi.dot(&xi).powi(2);
            let quad_a = sk.omega().column(i).dot(&sk.y().column(i));
            trace_loo + quad_a - quad_loo
        })
        .collect();
    Ok((terms, fallback))
}

pub fn nystrom_pp_from(fact: &NystromFactorization) -> Result<TraceEstimate> {
    let kind = EstimatorKind::NystromPP;
    check_k(kind, fact.k())?;
    let f = SpectralFunction::Identity;
    if !fact.is_full_rank() {
        return Ok(short_circuit(kind, fact, &f));
    }
    let (terms, fallback) = linear_terms(fact, &[0])?;
    let mut est = TraceEstimate::new(kind, &f, fact.sketch(), terms[0]);
    est.x_fallback = fallback;
    Ok(est)
}

pub fn nystrom_pp(op: &dyn LinearOperator, k: usize, seed: u64) -> Result<TraceEstimate> {
    check_k(EstimatorKind::NystromPP, k)?;
    nystrom_pp_from(&nys_svd(&gaussian_sketch(op, k, seed)?)?)
}

pub fn xnystrace_from(fact: &NystromFactorization) -> Result<TraceEstimate> {
    let kind = EstimatorKind::XNysTrace;
    check_k(kind, fact.k())?;
    let f = SpectralFunction::Identity;
    if !fact.is_full_rank() {
        return Ok(short_circuit(kind, fact, &f));
    }
    let all: Vec<usize> = (0..fact.k()).collect();
    let (terms, fallback) = linear_terms(fact, &all)?;
    let mut est = TraceEstimate::new(kind, &f, fact.sketch(), 0.0).with_terms(terms);
    est.x_fallback = fallback;
    Ok(est)
}

pub fn xnystrace(op: &dyn LinearOperator, k: usize, seed: u64) -> Result<TraceEstimate> {
    check_k(EstimatorKind::XNysTrace, k)?;
    xnystrace_from(&nys_svd(&gaussian_sketch(op, k, seed)?)?)
}

/// Downdated spectrum and the pieces of one index that do not depend on `f`.
struct LooIndex {
    mu: DVector<f64>,
    /// `V_i^T x_i`.
    proj: DVector<f64>,
}

fn loo_index(lambda: &DVector<f64>, b: &DMatrix<f64>, x: &DMatrix<f64>, i: usize) -> Result<LooIndex> {
    let d = downdate(lambda, i, b.column(i).into_owned())?;
    let proj = d.eig.eigvecs.tr_mul(&x.column(i));
    Ok(LooIndex { mu: d.eig.eigvals, proj })
}

/// `tr f(A_{-i}) - w_i^T f(A_{-i}) w_i`.
fn loo_part(ix: &LooIndex, f: &SpectralFunction) -> f64 {
    let fm = ix.mu.map(|m| f.value(m));
    fm.sum() - sq_weighted(&fm, ix.proj.iter().copied())
}

/// FlexTrace for several functions from one factorization. The downdates
/// and their eigendecompositions are shared by all functions.
pub fn flextrace_from(fact: &NystromFactorization, fs: &[SpectralFunction]) -> Result<Vec<TraceEstimate>> {
    let kind = EstimatorKind::FlexTrace;
    check_k(kind, fact.k())?;
    for f in fs {
        f.validate()?;
    }
    if !fact.is_full_rank() {
        return Ok(fs.iter().map(|f| short_circuit(kind, fact, f)).collect());
    }
    let k = fact.k();
    let b = fact.loo_vectors()?;
    let (x, fallback) = fact.x_matrix()?;
    let lam = fact.lambda();
    let flams: Vec<DVector<f64>> = fs.iter().map(|f| f_lambda(fact, f)).collect();

    let per_index = map_indices(k, |i| {
        let ix = loo_index(lam, &b, &x, i)?;
        Ok(fs
            .iter()
            .zip(&flams)
            .map(|(f, fl)| loo_part(&ix, f) + sq_weighted(fl, x.column(i).iter().copied()))
            .collect::<Vec<f64>>())
    })?;

    Ok(fs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let terms: Vec<f64> = per_index.iter().map(|t| t[j]).collect();
            let mut est = TraceEstimate::new(kind, f, fact.sketch(), 0.0).with_terms(terms);
            est.x_fallback = fallback;
            est
        })
        .collect())
}

pub fn flextrace_fast(
    op: &dyn LinearOperator,
    fs: &[SpectralFunction],
    k: usize,
    seed: u64,
) -> Result<Vec<TraceEstimate>> {
    let sketch = gaussian_sketch(op, k, seed)?;
    flextrace_from(&nys_svd(&sketch)?, fs)
}

fn oracle_estimate(
    kind: EstimatorKind,
    fact: &NystromFactorization,
    oracle: &FunctionOracle,
    f: &SpectralFunction,
    indices: &[usize],
) -> Result<TraceEstimate> {
    check_k(kind, fact.k())?;
    check_oracle(fact, oracle)?;
    f.validate()?;
    if !fact.is_full_rank() {
        let mut est = short_circuit(kind, fact, f);
        est.multi_pass = true;
        return Ok(est);
    }
    let b = fact.loo_vectors()?;
    let (x, fallback) = fact.x_matrix()?;
    let omega = fact.sketch().omega();
    let cols: Vec<usize> = indices.to_vec();
    let fw = oracle.apply(&omega.select_columns(&cols));
    let terms = map_indices(indices.len(), |j| {
        let i = indices[j];
        let ix = loo_index(fact.lambda(), &b, &x, i)?;
        Ok(loo_part(&ix, f) + omega.column(i).dot(&fw.column(j)))
    })?;
    let mut est = TraceEstimate::new(kind, f, fact.sketch(), 0.0).with_terms(terms);
    est.x_fallback = fallback;
    est.multi_pass = true;
    Ok(est)
}

/// `tr f(A_{-1}) + w_1^T (f(A) - f(A_{-1})) w_1`.
pub fn fun_nys_pp_from(
    fact: &NystromFactorization,
    oracle: &FunctionOracle,
    f: &SpectralFunction,
) -> Result<TraceEstimate> {
    let mut est = oracle_estimate(EstimatorKind::FunNystromPP, fact, oracle, f, &[0])?;
    est.loo_terms = None;
    Ok(est)
}

pub fn fun_nys_pp(
    op: &dyn LinearOperator,
    oracle: &FunctionOracle,
    f: &SpectralFunction,
    k: usize,
    seed: u64,
) -> Result<TraceEstimate> {
    check_k(EstimatorKind::FunNystromPP, k)?;
    fun_nys_pp_from(&nys_svd(&gaussian_sketch(op, k, seed)?)?, oracle, f)
}

/// Mean over `i` of `tr f(A_{-i}) + w_i^T (f(A) - f(A_{-i})) w_i`.
pub fn i_flextrace_from(
    fact: &NystromFactorization,
    oracle: &FunctionOracle,
    f: &SpectralFunction,
) -> Result<TraceEstimate> {
    let all: Vec<usize> = (0..fact.k()).collect();
    oracle_estimate(EstimatorKind::IFlexTrace, fact, oracle, f, &all)
}

pub fn i_flextrace(
    op: &dyn LinearOperator,
    oracle: &FunctionOracle,
    f: &SpectralFunction,
    k: usize,
    seed: u64,
) -> Result<TraceEstimate> {
    check_k(EstimatorKind::IFlexTrace, k)?;
    i_flextrace_from(&nys_svd(&gaussian_sketch(op, k, seed)?)?, oracle, f)
}

/// Reference FlexTrace that rebuilds the Nyström approximation from scratch
/// for every left-out column.
pub fn flextrace_naive_from(sketch: &SketchPair, fs: &[SpectralFunction]) -> Result<Vec<TraceEstimate>> {
    let kind = EstimatorKind::FlexTraceNaive;
    let (n, k) = (sketch.n(), sketch.k());
    if n > NAIVE_LIMIT {
        return Err(Error::TooLarge { n, limit: NAIVE_LIMIT });
    }
    check_k(kind, k)?;
    let fact = nys_svd(sketch)?;
    if !fact.is_full_rank() {
        return Ok(fs.iter().map(|f| short_circuit(kind, &fact, f)).collect());
    }
    let omega = sketch.omega();
    let proj_full = fact.u_hat().tr_mul(omega);
    let mut terms = vec![Vec::with_capacity(k); fs.len()];
    for i in 0..k {
        let reduced = if k > 1 { Some(nys_svd(&sketch.without_column(i))?) } else { None };
        let proj_loo = reduced.as_ref().map(|r| r.u_hat().tr_mul(&omega.column(i)));
        for (j, f) in fs.iter().enumerate() {
            let full = sq_weighted(&f_lambda(&fact, f), proj_full.column(i).iter().copied());
            let (tr_loo, quad_loo) = match (&reduced, &proj_loo) {
                (Some(r), Some(p)) => {
                    let fl = f_lambda(r, f);
                    (fl.sum(), sq_weighted(&fl, p.iter().copied()))
                }
                _ => (0.0, 0.0),
            };
            terms[j].push(tr_loo + full - quad_loo);
        }
    }
    Ok(fs
        .iter()
        .zip(terms)
        .map(|(f, t)| TraceEstimate::new(kind, f, sketch, 0.0).with_terms(t))
        .collect())
}

pub fn flextrace_naive(
    op: &dyn LinearOperator,
    f: &SpectralFunction,
    k: usize,
    seed: u64,
) -> Result<TraceEstimate> {
    if op.dim() > NAIVE_LIMIT {
        return Err(Error::TooLarge { n: op.dim(), limit: NAIVE_LIMIT });
    }
    let sketch = gaussian_sketch(op, k, seed)?;
    Ok(flextrace_naive_from(&sketch, std::slice::from_ref(f))?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_synthetic, SpectrumProfile};

    #[test]
    fn fast_matches_naive_small() {
        let op = make_synthetic(&SpectrumProfile::exp(60), 1, true).unwrap();
        let fs = [SpectralFunction::Log1p, SpectralFunction::Sqrt, SpectralFunction::Identity];
        let sketch = gaussian_sketch(&op, 8, 5).unwrap();
        let fast = flextrace_from(&nys_svd(&sketch).unwrap(), &fs).unwrap();
        let naive = flextrace_naive_from(&sketch, &fs).unwrap();
        for (a, b) in fast.iter().zip(&naive) {
            assert!((a.value - b.value).abs() <= 1e-10 * b.value.abs(), "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn identity_collapse() {
        let op = make_synthetic(&SpectrumProfile::poly(80), 2, false).unwrap();
        let fact = nys_svd(&gaussian_sketch(&op, 10, 3).unwrap()).unwrap();
        let x = xnystrace_from(&fact).unwrap().value;
        let ft = flextrace_from(&fact, &[SpectralFunction::Identity]).unwrap()[0].value;
        let oracle = FunctionOracle::from_synthetic(&op, &SpectralFunction::Identity).unwrap();
        let ift = i_flextrace_from(&fact, &oracle, &SpectralFunction::Identity).unwrap().value;
        assert!((x - ft).abs() <= 1e-10 * x.abs());
        assert!((x - ift).abs() <= 1e-10 * x.abs());
    }

    #[test]
    fn degenerate_single_column() {
        let op = make_synthetic(&SpectrumProfile::exp(20), 0, false).unwrap();
        let sketch = gaussian_sketch(&op, 1, 9).unwrap();
        let fact = nys_svd(&sketch).unwrap();
        let f = SpectralFunction::Log1p;
        let est = flextrace_from(&fact, &[f]).unwrap()[0].value;
        let x = fact.u_hat().tr_mul(sketch.omega())[(0, 0)];
        let want = f.value(fact.lambda()[0]) * x * x;
        assert!((est - want).abs() <= 1e-12 * want);
        let naive = flextrace_naive_from(&sketch, &[f]).unwrap()[0].value;
        assert!((naive - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn linear_estimators_need_two_columns() {
        let op = make_synthetic(&SpectrumProfile::exp(20), 0, false).unwrap();
        assert!(xnystrace(&op, 1, 0).is_err());
        assert!(nystrom_pp(&op, 1, 0).is_err());
    }
}
