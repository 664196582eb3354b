//! Command-line front end for the estimation library: validates datasets,
//! infers slice dependencies, runs the full weighting pipeline with
//! diagnostics, generates benchmark datasets, sweeps experiment axes, and
//! evaluates the finite-sample error bound.
//!
//! Exit codes are stable: 0 success, 1 input or validation failure, 2 solver
//! failure. A failing run writes `error.json` into the output directory with
//! the same code, message, and context printed to stderr. Every run writes
//! `manifest.json` capturing the command, configuration, and library
//! version; re-running the same command with the same configuration
//! reproduces all outputs byte for byte.
//!
//! The output directory is the only setting with an environment override:
//! `SLICEWEIGHT_OUT_DIR` supplies it when `--out` is absent (an explicit
//! `--out` wins).
//!
//! The classifier-based baseline here fits a ridge-penalized logistic model
//! on fixed feature vectors; the published variant that fine-tunes a deep
//! language model as the domain classifier is out of scope for this tool.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Parser)]
#[command(
    name = "sliceweight",
    version,
    about = "Slice-based estimation of model performance under distribution shift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check slice files, edges, correction tables, and losses for
    /// consistency without running anything.
    Validate(ValidateArgs),
    /// Infer a slice dependency matching from pooled source and target
    /// slices via the inverse-covariance heuristic.
    Edges(EdgesArgs),
    /// Estimate target-side mean loss by importance-weighting source losses.
    Estimate(EstimateArgs),
    /// Generate a synthetic benchmark bundle with ground truth.
    Synth(SynthArgs),
    /// Run estimators across an experiment axis and emit a results CSV.
    Sweep(SweepArgs),
    /// Evaluate the finite-sample error bound from user-supplied inputs.
    Bound(BoundArgs),
}

/// Estimation methods. `mandoline` is the slice-based density-ratio
/// estimator this library implements; the others are reference baselines on
/// real-valued features (`simple` reweights by raw slice-pattern frequency).
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Mandoline,
    Cbiw,
    Kmm,
    Ulsif,
    Simple,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Mandoline => "mandoline",
            Method::Cbiw => "cbiw",
            Method::Kmm => "kmm",
            Method::Ulsif => "ulsif",
            Method::Simple => "simple",
        }
    }
}

/// How to use the source sample: fit and estimate on all of it, or fit the
/// ratio on a seeded half and average losses over the held-out half.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Split {
    Half,
    None,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Half => "half",
            Split::None => "none",
        }
    }
}

/// Settings for the slice-based ratio solver.
#[derive(Args)]
struct SolverFlags {
    /// Iteration budget for the ratio fit.
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Gradient sup-norm at which the ratio fit stops.
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
}

/// Hyperparameters for the feature-based baselines.
#[derive(Args)]
struct BaselineFlags {
    /// Data-term scale of the classifier baseline's ridge-penalized logistic
    /// fit (larger means weaker regularization).
    #[arg(long, default_value_t = 1.0)]
    cbiw_c: f64,
    /// Gaussian kernel width for kernel mean matching.
    #[arg(long, default_value_t = 1.0)]
    kmm_width: f64,
    /// Per-weight upper bound for kernel mean matching.
    #[arg(long, default_value_t = 1000.0)]
    kmm_box: f64,
    /// Slack for the KMM mean constraint; defaults to (sqrt(n) - 1)/sqrt(n).
    #[arg(long)]
    kmm_eps: Option<f64>,
    /// Row cap above which each side is subsampled (seeded) before kernel
    /// mean matching, which materializes an n x n kernel matrix.
    #[arg(long, default_value_t = 10_000)]
    kmm_max_rows: usize,
    /// Number of Gaussian basis centers for the least-squares baseline
    /// (capped at the target sample size).
    #[arg(long, default_value_t = 100)]
    ulsif_basis: usize,
    /// Ridge strength for the least-squares baseline.
    #[arg(long, default_value_t = 0.1)]
    ulsif_lambda: f64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Source slice CSV (columns slice_0..slice_{k-1}, values in {-1,0,1}).
    #[arg(long)]
    source_slices: PathBuf,
    /// Target slice CSV.
    #[arg(long)]
    target_slices: PathBuf,
    /// Dependency edges JSON (list of [i, j] pairs). Default: no edges.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Correction tables JSON. Default: identity tables.
    #[arg(long)]
    correction: Option<PathBuf>,
    /// Source loss CSV (single `loss` column); checked against the source
    /// row count when given.
    #[arg(long)]
    loss: Option<PathBuf>,
    /// Output directory for validation.json and manifest.json.
    #[arg(long, env = "SLICEWEIGHT_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EdgesArgs {
    /// Source slice CSV.
    #[arg(long)]
    source_slices: PathBuf,
    /// Target slice CSV.
    #[arg(long)]
    target_slices: PathBuf,
    /// Maximum number of edges to select.
    #[arg(long, default_value_t = 4)]
    max_edges: usize,
    /// Output directory for edges.json and manifest.json.
    #[arg(long, env = "SLICEWEIGHT_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Estimation method.
    #[arg(long, value_enum)]
    method: Method,
    /// Source slice CSV. Required for mandoline and simple; for the feature
    /// baselines it doubles as features when no feature CSV is given.
    #[arg(long)]
    source_slices: Option<PathBuf>,
    /// Target slice CSV.
    #[arg(long)]
    target_slices: Option<PathBuf>,
    /// Source loss CSV, one value per source row.
    #[arg(long)]
    loss: PathBuf,
    /// Dependency edges JSON for mandoline. Default: no edges.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Correction tables JSON; required for mandoline unless
    /// --noise-unaware is set.
    #[arg(long)]
    correction: Option<PathBuf>,
    /// Source feature CSV for the feature baselines. Default: slice values
    /// cast to reals.
    #[arg(long)]
    source_features: Option<PathBuf>,
    /// Target feature CSV for the feature baselines.
    #[arg(long)]
    target_features: Option<PathBuf>,
    /// Force all correction tables to identity (treat observed slices as
    /// exact).
    #[arg(long)]
    noise_unaware: bool,
    /// Source-sample usage; `half` is only defined for mandoline.
    #[arg(long, value_enum, default_value_t = Split::None)]
    split: Split,
    /// Root seed for the half split and KMM subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    baselines: BaselineFlags,
    /// Output directory for estimate.json, weights.csv, diagnostics.json,
    /// solver_trace.json (mandoline only), and manifest.json.
    #[arg(long, env = "SLICEWEIGHT_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator name: support_shift, highdim, or noisy_slices.
    generator: String,
    /// support_shift: probability that a source example's spurious feature
    /// matches the target.
    #[arg(long)]
    p: Option<f64>,
    /// support_shift: examples per side.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// highdim: number of irrelevant features appended.
    #[arg(long)]
    d: Option<usize>,
    /// noisy_slices: latent-observed coupling strength.
    #[arg(long)]
    theta_ii: Option<f64>,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bundle directory to create.
    #[arg(long, env = "SLICEWEIGHT_OUT_DIR")]
    out: PathBuf,
}

/// Experiment axes: each value generates one synthetic bundle per seed.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Spurious-feature match probability (support-shift family).
    #[value(name = "p_spurious")]
    PSpurious,
    /// Count of irrelevant features (high-dimension family).
    #[value(name = "d_irrelevant")]
    DIrrelevant,
    /// Latent-observed coupling strength (noisy-slices family).
    #[value(name = "theta_ii")]
    ThetaIi,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::PSpurious => "p_spurious",
            Axis::DIrrelevant => "d_irrelevant",
            Axis::ThetaIi => "theta_ii",
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment axis.
    #[arg(long, value_enum)]
    axis: Axis,
    /// Axis values, comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Methods to run at every cell, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Seeds, comma separated; each (value, method, seed) cell runs once.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Also run a noise-unaware companion (identity correction tables) for
    /// every mandoline cell, reported as method `mandoline_unaware`.
    #[arg(long)]
    include_noise_unaware: bool,
    /// Worker threads for the cell pool. Default: one per CPU.
    #[arg(long)]
    workers: Option<usize>,
    /// support_shift: examples per side.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    baselines: BaselineFlags,
    /// Output directory for results.csv and manifest.json.
    #[arg(long, env = "SLICEWEIGHT_OUT_DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// JSON file with the bound inputs: per-slice correction error bounds
    /// (eta_s_min, eta_s_max, eta_t_min, eta_t_max), the density-ratio bound
    /// m_ratio, the unmodeled-shift term tv_term, the confidence level
    /// epsilon, and the loss constant c_s_loss.
    #[arg(long)]
    inputs: PathBuf,
    /// Source sample size entering the concentration term.
    #[arg(long)]
    n_source: usize,
    /// Largest fitted raw weight (reported as m_hat in diagnostics.json).
    #[arg(long)]
    m_hat: f64,
    /// Output directory for bound.json and manifest.json.
    #[arg(long, env = "SLICEWEIGHT_OUT_DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let ok = matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = err.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let (out, result) = match cli.command {
        Command::Validate(args) => (args.out.clone(), commands::run_validate(&args)),
        Command::Edges(args) => (args.out.clone(), commands::run_edges(&args)),
        Command::Estimate(args) => (args.out.clone(), commands::run_estimate(&args)),
        Command::Synth(args) => (args.out.clone(), commands::run_synth(&args)),
        Command::Sweep(args) => (args.out.clone(), commands::run_sweep(&args)),
        Command::Bound(args) => (args.out.clone(), commands::run_bound(&args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            failure.emit(&out);
            ExitCode::from(failure.code())
        }
    }
}
