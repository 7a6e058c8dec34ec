//! Closed-form MSE bounds against empirical MSE over a (profile, f, k) grid.

use flextrace::bounds::mse_bounds;
use flextrace::{EstimatorKind, SpectralFunction, SpectrumProfile};

use crate::error::{HarnessError, Result};
use crate::experiment::{run_trials, ExperimentSpec, OperatorSpec, Problem};
use crate::format::g17;
use crate::stats::mse_se;

pub const SWEEP_HEADER: &str = "profile,function,k,bound_iFT,bound_FT,bound_FN,empirical_MSE_iFT,se_iFT,empirical_MSE_FT,se_FT,empirical_MSE_FN,se_FN";

/// Estimators in bound order: i-FlexTrace, FlexTrace, FunNys.
const SWEPT: [EstimatorKind; 3] = [EstimatorKind::IFlexTrace, EstimatorKind::FlexTrace, EstimatorKind::FunNys];

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub profiles: Vec<(String, SpectrumProfile)>,
    pub functions: Vec<SpectralFunction>,
    pub k_grid: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

impl SweepSpec {
    /// Exp, Poly and Step at `n = 200`; identity, log1p, sqrt and
    /// `x / (x + 1)`; `k` in {6, 10, 16}; 5000 trials.
    pub fn standard(base_seed: u64) -> Self {
        let n = 200;
        Self {
            profiles: vec![
                ("exp".into(), SpectrumProfile::exp(n)),
                ("poly".into(), SpectrumProfile::poly(n)),
                ("step".into(), SpectrumProfile::step(n)),
            ],
            functions: vec![
                SpectralFunction::Identity,
                SpectralFunction::Log1p,
                SpectralFunction::Sqrt,
                SpectralFunction::Ratio(1.0),
            ],
            k_grid: vec![6, 10, 16],
            trials: 5000,
            base_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    /// `None` below the estimator's floor on `k`.
    pub bound: Option<f64>,
    pub mse: f64,
    pub se: f64,
}

impl Cell {
    /// One-sided check with `slack` standard errors; vacuous without a bound.
    pub fn within(&self, slack: f64) -> bool {
        self.bound.map_or(true, |b| self.mse <= b + slack * self.se)
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub profile: String,
    pub function: String,
    pub k: usize,
    /// i-FlexTrace, FlexTrace, FunNys.
    pub cells: [Cell; 3],
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.k_grid.first().is_some_and(|&k| k < 2) {
        return Err(HarnessError::Validation("bounds sweep needs k >= 2".into()));
    }
    let mut out = Vec::new();
    for (pi, (name, profile)) in spec.profiles.iter().enumerate() {
        let exp = ExperimentSpec {
            name: format!("bounds-{name}"),
            // Gaussian sketches are rotation invariant, so the diagonal
            // operator has the same error distribution as any rotation.
            operator: OperatorSpec::Synthetic { profile: profile.clone(), rotated: false, seed: 0 },
            functions: spec.functions.clone(),
            estimators: SWEPT.to_vec(),
            k_grid: spec.k_grid.clone(),
            trials: spec.trials,
            base_seed: spec.base_seed.wrapping_add(pi as u64),
            record_timing: false,
            require_truth: true,
            output_dir: None,
        };
        exp.validate()?;
        let problem = Problem::build(&exp.operator)?;
        let spectrum = profile.eigenvalues()?;
        let matrix = run_trials(&problem, &exp)?;
        let (nf, nk) = (spec.functions.len(), spec.k_grid.len());
        for (fi, f) in spec.functions.iter().enumerate() {
            let truth = problem.truth(f)?.value;
            for (ki, &k) in spec.k_grid.iter().enumerate() {
                let b = mse_bounds(&spectrum, f, k)?;
                let bounds = [b.ift, b.ft, b.fn_];
                let cells = std::array::from_fn(|ei| {
                    let errs: Vec<f64> = matrix.values[(ei * nf + fi) * nk + ki].iter().map(|v| v - truth).collect();
                    let (mse, se) = mse_se(&errs);
                    Cell { bound: bounds[ei], mse, se }
                });
                out.push(SweepRow { profile: name.clone(), function: f.to_string(), k, cells });
            }
        }
    }
    Ok(out)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let bounds: Vec<String> = r.cells.iter().map(|c| c.bound.map(g17).unwrap_or_default()).collect();
        let emp: Vec<String> = r.cells.iter().flat_map(|c| [g17(c.mse), g17(c.se)]).collect();
        s.push_str(&format!("{},{},{},{},{}\n", r.profile, r.function, r.k, bounds.join(","), emp.join(",")));
    }
    s
}
