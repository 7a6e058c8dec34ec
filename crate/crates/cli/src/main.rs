use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flextrace::operators::{read_movielens, write_matrix_market};
use flextrace::{EstimatorKind, KernelSpec, SpectralFunction, SpectrumProfile};
use flextrace_cli::experiment::{MatrixSource, PointsSource};
use flextrace_cli::output::{emit_csv, emit_estimates, read_csv, rows, write};
use flextrace_cli::svg::emit_svg;
use flextrace_cli::sweep::{run_sweep, sweep_csv, SweepSpec};
use flextrace_cli::{run_experiment, ExperimentSpec, HarnessError, OperatorSpec, Result};

#[derive(Parser)]
#[command(name = "flextrace", version, about = "Trace estimation experiments for tr f(A)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Sketch sizes: `a:b:step` or a comma list.
    #[arg(long)]
    k_grid: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma list of `identity`, `log1p`, `sqrt`, `power:p=<v>`, `ratio:zeta=<v>`.
    #[arg(long)]
    functions: Option<String>,
    /// Comma list of estimator names.
    #[arg(long, default_value = "FunNys,FlexTrace")]
    estimators: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Record mean wall time per trial in the `wall_ms` column.
    #[arg(long)]
    timing: bool,
    /// Exit with code 3 when ground truth is unavailable instead of
    /// writing estimates only.
    #[arg(long)]
    require_truth: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic diagonal or rotated test matrices.
    Synthetic {
        #[arg(long, default_value = "exp")]
        profile: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Conjugate the spectrum by a seeded random rotation.
        #[arg(long)]
        rotated: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Nuclear norm of a data matrix X as tr sqrt(X X^T).
    NuclearNorm {
        /// MatrixMarket coordinate file.
        #[arg(long, conflicts_with = "movielens")]
        matrix: Option<PathBuf>,
        /// Tab-separated MovieLens ratings file.
        #[arg(long)]
        movielens: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// log det(K + noise I) for kernel matrices on a point cloud.
    KernelLogdet {
        /// CSV with one point per line; a seeded road-like set is used otherwise.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Size of the generated point set.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Kernel spec such as `se:l=0.025`; repeatable.
        #[arg(long)]
        kernel: Vec<String>,
        #[arg(long, default_value_t = 0.0025)]
        noise: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form MSE bounds against empirical MSE.
    Bounds {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value = "6,10,16")]
        k_grid: String,
        #[arg(long, default_value_t = 5000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results/bounds.csv")]
        out: PathBuf,
    },
    /// Re-render an error CSV as SVG.
    Report {
        csv: PathBuf,
        /// Defaults to the CSV path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
    /// Convert a MovieLens ratings file to MatrixMarket.
    ConvertMovielens { input: PathBuf, output: PathBuf },
}

fn parse_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || HarnessError::Validation(format!("bad k grid '{text}'"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || a > b {
                return Err(bad());
            }
            Ok((a..=b).step_by(step).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn parse_list<T: std::str::FromStr<Err = flextrace::Error>>(text: &str) -> Result<Vec<T>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(|s| Ok(s.parse::<T>()?)).collect()
}

fn spec(name: String, operator: OperatorSpec, common: &Common, grid: &str, trials: usize, fs: &str) -> Result<ExperimentSpec> {
    Ok(ExperimentSpec {
        name,
        operator,
        functions: parse_list::<SpectralFunction>(common.functions.as_deref().unwrap_or(fs))?,
        estimators: parse_list::<EstimatorKind>(&common.estimators)?,
        k_grid: parse_grid(common.k_grid.as_deref().unwrap_or(grid))?,
        trials: common.trials.unwrap_or(trials),
        base_seed: common.seed,
        record_timing: common.timing,
        require_truth: common.require_truth,
        output_dir: Some(common.out.clone()),
    })
}

/// Writes the error CSV and SVG, or an estimates CSV when some truth is
/// unavailable.
fn run_and_emit(spec: &ExperimentSpec) -> Result<()> {
    let result = run_experiment(spec)?;
    let dir = spec.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    for (f, t) in &result.truths {
        match t {
            Some(t) => eprintln!("{}: truth tr {f}(A) = {} ({})", spec.name, t.value, t.provenance),
            None => eprintln!("{}: no ground truth for {f}; writing estimates only", spec.name),
        }
    }
    let csv = dir.join(format!("{}.csv", spec.name));
    emit_csv(&result, &csv)?;
    emit_svg(&rows(&result), &spec.name, &dir.join(format!("{}.svg", spec.name)))?;
    if result.estimate_only() {
        emit_estimates(&result, &dir.join(format!("{}_estimates.csv", spec.name)))?;
    }
    eprintln!("wrote {}", csv.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synthetic { profile, n, rotated, common } => {
            let p = SpectrumProfile::named(&profile, n)?;
            let op = OperatorSpec::Synthetic { profile: p, rotated, seed: common.seed };
            let s = spec(format!("synthetic_{profile}_n{n}"), op, &common, "20:200:20", 100, "log1p")?;
            run_and_emit(&s)
        }
        Command::NuclearNorm { matrix, movielens, common } => {
            let (source, name) = match (matrix, movielens) {
                (Some(p), _) => (MatrixSource::MatrixMarket(p), "nuclear_norm"),
                (_, Some(p)) => (MatrixSource::MovieLens(p), "nuclear_norm_movielens"),
                _ => (MatrixSource::SyntheticRatings { seed: common.seed }, "nuclear_norm_synthetic"),
            };
            let s = spec(name.into(), OperatorSpec::Gramian(source), &common, "25:500:25", 10, "sqrt")?;
            run_and_emit(&s)
        }
        Command::KernelLogdet { points, n, kernel, noise, common } => {
            let kernels = if kernel.is_empty() {
                ["se:l=0.025", "rq:l=0.05,alpha=0.25", "matern32:l=0.1", "matern52:l=0.1"].map(String::from).to_vec()
            } else {
                kernel
            };
            let source = match points {
                Some(p) => PointsSource::Csv(p),
                None => PointsSource::Roads { n, seed: common.seed },
            };
            for text in &kernels {
                let k = KernelSpec::parse(text, noise)?;
                let tag: String = text.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
                let op = OperatorSpec::Kernel { points: source.clone(), kernel: k };
                let s = spec(format!("kernel_logdet_{tag}"), op, &common, "20:200:20", 20, "log1p")?;
                run_and_emit(&s)?;
            }
            Ok(())
        }
        Command::Bounds { n, k_grid, trials, seed, out } => {
            let mut s = SweepSpec::standard(seed);
            for (name, p) in &mut s.profiles {
                *p = SpectrumProfile::named(name, n)?;
            }
            s.k_grid = parse_grid(&k_grid)?;
            s.trials = trials;
            let rows = run_sweep(&s)?;
            write(&out, &sweep_csv(&rows))?;
            for r in &rows {
                if let Some(c) = r.cells.iter().find(|c| !c.within(4.0)) {
                    eprintln!("{} {} k={}: empirical MSE {} exceeds bound {:?}", r.profile, r.function, r.k, c.mse, c.bound);
                }
            }
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Report { csv, out, title } => {
            let rows = read_csv(&csv)?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            let title = title.unwrap_or_else(|| stem(&csv));
            emit_svg(&rows, &title, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::ConvertMovielens { input, output } => {
            let m = read_movielens(&input)?;
            write_matrix_market(&output, &m)?;
            eprintln!("{}x{} with {} ratings -> {}", m.rows(), m.cols(), m.nnz(), output.display());
            Ok(())
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
