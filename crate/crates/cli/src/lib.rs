//! Experiment harness for the `flextrace` estimators: seeded trials,
//! summary statistics, CSV and SVG reports, and the bounds sweep.

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod format;
pub mod output;
pub mod stats;
pub mod svg;
pub mod sweep;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentResult, ExperimentSpec, OperatorSpec, Problem, ResultRow};
