//! Trial orchestration: one Gaussian sketch per trial, shared by every
//! estimator, function and sketch size of that trial.

use std::fmt;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use flextrace::estimators::{
    flextrace_from, flextrace_naive_from, fun_nys_pp_from, fun_nys_trace, girard_hutchinson_from,
    i_flextrace_from, nystrom_pp_from, xnystrace_from, NAIVE_LIMIT,
};
use flextrace::nystrom::{gaussian_sketch, nys_svd_prefixes, NystromOptions};
use flextrace::operators::{
    build_kernel, gramian, make_synthetic, read_matrix_market, read_movielens, read_points_csv, DENSE_LIMIT,
};
use flextrace::random::derive_seed;
use flextrace::{
    DMatrix, EstimatorKind, FunctionOracle, KernelOperator, KernelSpec, LinearOperator, SparseMatrix,
    SpectralFunction, SpectrumProfile, SyntheticOperator,
};
use rayon::prelude::*;

use crate::datasets;
use crate::error::{HarnessError, Result};
use crate::stats::{percentile, summarize, Summary};

/// Largest data matrix whose singular values are computed densely.
pub const SVD_LIMIT: (usize, usize) = (2000, 4000);

#[derive(Clone, Debug)]
pub enum MatrixSource {
    MatrixMarket(PathBuf),
    MovieLens(PathBuf),
    /// The seeded stand-in from [`datasets::synthetic_ratings`].
    SyntheticRatings { seed: u64 },
}

#[derive(Clone, Debug)]
pub enum PointsSource {
    Csv(PathBuf),
    /// The seeded stand-in from [`datasets::road_points`].
    Roads { n: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub enum OperatorSpec {
    Synthetic { profile: SpectrumProfile, rotated: bool, seed: u64 },
    /// `A = X X^T` for a data matrix `X`.
    Gramian(MatrixSource),
    /// `A = K / noise` for the log-determinant of `K + noise I`.
    Kernel { points: PointsSource, kernel: KernelSpec },
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub name: String,
    pub operator: OperatorSpec,
    pub functions: Vec<SpectralFunction>,
    pub estimators: Vec<EstimatorKind>,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    /// Report mean per-trial wall time; otherwise `wall_ms` is 0 so that
    /// output bytes depend only on the spec.
    pub record_timing: bool,
    /// Fail with [`HarnessError::NoTruth`] instead of falling back to
    /// estimate-only output.
    pub require_truth: bool,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.k_grid.is_empty() || self.k_grid[0] == 0 {
            return bad("k grid must be non-empty with positive entries".into());
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k grid must be strictly increasing".into());
        }
        if self.functions.is_empty() || self.estimators.is_empty() {
            return bad("at least one function and one estimator are required".into());
        }
        for f in &self.functions {
            f.validate()?;
        }
        for e in &self.estimators {
            if e.linear_only() {
                if let Some(f) = self.functions.iter().find(|f| !f.is_identity()) {
                    return bad(format!("{e} only estimates tr A, not tr {f}(A)"));
                }
            }
            if self.k_grid[0] < e.min_k() {
                return bad(format!("{e} needs k >= {}", e.min_k()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ExactSpectrum,
    DenseEigen,
    DenseSvd,
    DenseCholesky,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ExactSpectrum => "exact spectrum",
            Provenance::DenseEigen => "dense eigendecomposition",
            Provenance::DenseSvd => "dense SVD",
            Provenance::DenseCholesky => "dense Cholesky",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truth {
    pub value: f64,
    pub provenance: Provenance,
}

enum Source {
    Synthetic(SyntheticOperator),
    Gramian { data: SparseMatrix, op: flextrace::operators::GramianOperator },
    Kernel(KernelOperator),
}

/// An operator together with what is needed for ground truth and
/// function oracles.
pub struct Problem {
    source: Source,
    dense_eig: OnceLock<std::result::Result<(Vec<f64>, DMatrix<f64>), String>>,
}

impl Problem {
    pub fn build(spec: &OperatorSpec) -> Result<Self> {
        let source = match spec {
            OperatorSpec::Synthetic { profile, rotated, seed } => {
                Source::Synthetic(make_synthetic(profile, *seed, *rotated)?)
            }
            OperatorSpec::Gramian(m) => {
                let data = match m {
                    MatrixSource::MatrixMarket(p) => read_matrix_market(p)?,
                    MatrixSource::MovieLens(p) => read_movielens(p)?,
                    MatrixSource::SyntheticRatings { seed } => datasets::synthetic_ratings(*seed),
                };
                Self::gramian_source(data)?
            }
            OperatorSpec::Kernel { points, kernel } => {
                let pts = match points {
                    PointsSource::Csv(p) => read_points_csv(p)?,
                    PointsSource::Roads { n, seed } => datasets::road_points(*n, *seed),
                };
                Source::Kernel(build_kernel(&pts, kernel)?)
            }
        };
        Ok(Self { source, dense_eig: OnceLock::new() })
    }

    fn gramian_source(data: SparseMatrix) -> Result<Source> {
        let op = gramian(&data)?;
        Ok(Source::Gramian { data, op })
    }

    pub fn from_synthetic(op: SyntheticOperator) -> Self {
        Self { source: Source::Synthetic(op), dense_eig: OnceLock::new() }
    }

    pub fn from_gramian(data: SparseMatrix) -> Result<Self> {
        Ok(Self { source: Self::gramian_source(data)?, dense_eig: OnceLock::new() })
    }

    pub fn from_kernel(op: KernelOperator) -> Self {
        Self { source: Source::Kernel(op), dense_eig: OnceLock::new() }
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        match &self.source {
            Source::Synthetic(op) => op,
            Source::Gramian { op, .. } => op,
            Source::Kernel(op) => op,
        }
    }

    pub fn dim(&self) -> usize {
        self.operator().dim()
    }

    /// Constant added to estimates and truth of `f`: `n log noise` turns
    /// `tr log(I + K / noise)` into `logdet(K + noise I)`.
    pub fn offset(&self, f: &SpectralFunction) -> f64 {
        match (&self.source, f) {
            (Source::Kernel(k), SpectralFunction::Log1p) => k.logdet_offset(),
            _ => 0.0,
        }
    }

    fn eig(&self) -> Result<&(Vec<f64>, DMatrix<f64>)> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(HarnessError::NoTruth(format!("dimension {n} exceeds the dense limit {DENSE_LIMIT}")));
        }
        self.dense_eig
            .get_or_init(|| {
                let a = flextrace::operators::materialize(self.operator()).map_err(|e| e.to_string())?;
                let (vals, vecs) = flextrace::lakernels::sym_eig_dense(&a).map_err(|e| e.to_string())?;
                Ok((vals.iter().map(|v| v.max(0.0)).collect(), vecs))
            })
            .as_ref()
            .map_err(|e| HarnessError::NoTruth(e.clone()))
    }

    pub fn truth(&self, f: &SpectralFunction) -> Result<Truth> {
        let offset = self.offset(f);
        let t = match &self.source {
            Source::Synthetic(op) => Truth { value: op.exact_trace(f)?, provenance: Provenance::ExactSpectrum },
            Source::Gramian { data, .. } => {
                if data.rows() > SVD_LIMIT.0 || data.cols() > SVD_LIMIT.1 {
                    return Err(HarnessError::NoTruth(format!(
                        "{}x{} data matrix exceeds the dense SVD limit",
                        data.rows(),
                        data.cols()
                    )));
                }
                let sv = data.to_dense().singular_values();
                let eig: Vec<f64> = sv.iter().map(|s| s * s).collect();
                let value = match f {
                    SpectralFunction::Sqrt => sv.iter().sum(),
                    _ => f.trace_diag(&eig)?,
                };
                Truth { value, provenance: Provenance::DenseSvd }
            }
            Source::Kernel(k) if matches!(f, SpectralFunction::Log1p) => {
                if self.dim() > DENSE_LIMIT {
                    return Err(HarnessError::NoTruth("kernel too large for a dense Cholesky".into()));
                }
                Truth { value: k.exact_logdet()? - offset, provenance: Provenance::DenseCholesky }
            }
            Source::Kernel(_) => {
                let (vals, _) = self.eig()?;
                Truth { value: f.trace_diag(vals)?, provenance: Provenance::DenseEigen }
            }
        };
        Ok(Truth { value: t.value + offset, ..t })
    }

    pub fn oracle(&self, f: &SpectralFunction) -> Result<FunctionOracle> {
        match &self.source {
            Source::Synthetic(op) => Ok(FunctionOracle::from_synthetic(op, f)?),
            _ => {
                let (vals, vecs) = self.eig()?;
                Ok(FunctionOracle::from_spectrum(Some(vecs.clone()), vals, f)?)
            }
        }
    }
}

/// Statistics of one (estimator, function, k) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub estimator: EstimatorKind,
    pub function: String,
    pub k: usize,
    pub matvec_units: usize,
    /// `None` in estimate-only mode.
    pub summary: Option<Summary>,
    pub truth: Option<f64>,
    pub mean_estimate: f64,
    pub estimate_p05: f64,
    pub estimate_p95: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub name: String,
    pub rows: Vec<ResultRow>,
    /// Per function: display name and truth, when available.
    pub truths: Vec<(String, Option<Truth>)>,
}

impl ExperimentResult {
    pub fn estimate_only(&self) -> bool {
        self.rows.iter().any(|r| r.summary.is_none())
    }

    pub fn row(&self, e: EstimatorKind, f: &str, k: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.estimator == e && r.function == f && r.k == k)
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let problem = Problem::build(&spec.operator)?;
    run_on(&problem, spec)
}

/// Raw per-trial estimates, indexed `[cell][trial]`, where cells run over
/// estimators, then functions, then k.
pub struct TrialMatrix {
    pub values: Vec<Vec<f64>>,
    pub millis: Vec<Vec<f64>>,
}

pub fn run_on(problem: &Problem, spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let n = problem.dim();
    let kmax = *spec.k_grid.last().expect("validated grid");
    if kmax > n {
        return Err(HarnessError::Validation(format!("largest k {kmax} exceeds dimension {n}")));
    }
    if spec.estimators.contains(&EstimatorKind::FlexTraceNaive) && n > NAIVE_LIMIT {
        return Err(HarnessError::Validation(format!(
            "FlexTrace-naive is limited to n <= {NAIVE_LIMIT}, got {n}"
        )));
    }

    let truths: Vec<(String, Option<Truth>)> = spec
        .functions
        .iter()
        .map(|f| match problem.truth(f) {
            Ok(t) => Ok((f.to_string(), Some(t))),
            Err(HarnessError::NoTruth(_)) if !spec.require_truth => Ok((f.to_string(), None)),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let matrix = run_trials(problem, spec)?;
    let units = problem.operator().units_per_column();
    let nf = spec.functions.len();
    let nk = spec.k_grid.len();
    let mut rows = Vec::with_capacity(matrix.values.len());
    for (ei, &e) in spec.estimators.iter().enumerate() {
        for (fi, (fname, truth)) in truths.iter().enumerate() {
            for (ki, &k) in spec.k_grid.iter().enumerate() {
                let cell = (ei * nf + fi) * nk + ki;
                let vals = &matrix.values[cell];
                let mut sorted = vals.clone();
                sorted.sort_by(f64::total_cmp);
                let summary = truth.map(|t| summarize(vals, t.value)).transpose()?;
                let wall_ms = if spec.record_timing {
                    matrix.millis[cell].iter().sum::<f64>() / spec.trials as f64
                } else {
                    0.0
                };
                rows.push(ResultRow {
                    estimator: e,
                    function: fname.clone(),
                    k,
                    matvec_units: k * units,
                    summary,
                    truth: truth.map(|t| t.value),
                    mean_estimate: vals.iter().sum::<f64>() / vals.len() as f64,
                    estimate_p05: percentile(&sorted, 0.05),
                    estimate_p95: percentile(&sorted, 0.95),
                    wall_ms,
                });
            }
        }
    }
    Ok(ExperimentResult { name: spec.name.clone(), rows, truths })
}

/// Runs every trial and returns the per-cell estimates in trial order.
pub fn run_trials(problem: &Problem, spec: &ExperimentSpec) -> Result<TrialMatrix> {
    let oracles: Vec<Option<FunctionOracle>> = if spec.estimators.iter().any(|e| e.needs_oracle()) {
        spec.functions.iter().map(|f| problem.oracle(f).map(Some)).collect::<Result<_>>()?
    } else {
        vec![None; spec.functions.len()]
    };
    let per_trial: Vec<(Vec<f64>, Vec<f64>)> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(problem, spec, &oracles, derive_seed(spec.base_seed, t as u64)))
        .collect::<Result<_>>()?;
    let cells = spec.estimators.len() * spec.functions.len() * spec.k_grid.len();
    let mut values = vec![Vec::with_capacity(spec.trials); cells];
    let mut millis = vec![Vec::with_capacity(spec.trials); cells];
    for (v, m) in per_trial {
        for c in 0..cells {
            values[c].push(v[c]);
            millis[c].push(m[c]);
        }
    }
    Ok(TrialMatrix { values, millis })
}

fn run_trial(
    problem: &Problem,
    spec: &ExperimentSpec,
    oracles: &[Option<FunctionOracle>],
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let fs = &spec.functions;
    let (nf, nk) = (fs.len(), spec.k_grid.len());
    let kmax = *spec.k_grid.last().expect("validated grid");
    let sketch = gaussian_sketch(problem.operator(), kmax, seed)?;
    let needs_fact = spec
        .estimators
        .iter()
        .any(|e| !matches!(e, EstimatorKind::GirardHutchinson | EstimatorKind::FlexTraceNaive));
    let facts = if needs_fact {
        nys_svd_prefixes(&sketch, &spec.k_grid, NystromOptions::default())?
    } else {
        Vec::new()
    };
    let oracle = |fi: usize| oracles[fi].as_ref().expect("oracle built for oracle estimators");

    let mut values = vec![0.0; spec.estimators.len() * nf * nk];
    let mut millis = vec![0.0; values.len()];
    for (ei, &e) in spec.estimators.iter().enumerate() {
        for (ki, &k) in spec.k_grid.iter().enumerate() {
            let start = Instant::now();
            let per_f: Vec<f64> = match e {
                EstimatorKind::GirardHutchinson => {
                    let v = girard_hutchinson_from(&sketch.prefix(k)).value;
                    vec![v; nf]
                }
                EstimatorKind::NystromPP => vec![nystrom_pp_from(&facts[ki])?.value; nf],
                EstimatorKind::XNysTrace => vec![xnystrace_from(&facts[ki])?.value; nf],
                EstimatorKind::FunNys => fs
                    .iter()
                    .map(|f| Ok(fun_nys_trace(&facts[ki], f)?.value))
                    .collect::<Result<_>>()?,
                EstimatorKind::FlexTrace => flextrace_from(&facts[ki], fs)?.iter().map(|t| t.value).collect(),
                EstimatorKind::FlexTraceNaive => {
                    flextrace_naive_from(&sketch.prefix(k), fs)?.iter().map(|t| t.value).collect()
                }
                EstimatorKind::FunNystromPP => (0..nf)
                    .map(|fi| Ok(fun_nys_pp_from(&facts[ki], oracle(fi), &fs[fi])?.value))
                    .collect::<Result<_>>()?,
                EstimatorKind::IFlexTrace => (0..nf)
                    .map(|fi| Ok(i_flextrace_from(&facts[ki], oracle(fi), &fs[fi])?.value))
                    .collect::<Result<_>>()?,
            };
            let ms = start.elapsed().as_secs_f64() * 1e3 / nf as f64;
            for (fi, v) in per_f.into_iter().enumerate() {
                let cell = (ei * nf + fi) * nk + ki;
                values[cell] = v + problem.offset(&fs[fi]);
                millis[cell] = ms;
            }
        }
    }
    Ok((values, millis))
}
