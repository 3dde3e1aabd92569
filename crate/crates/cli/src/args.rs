use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use kerr_core::fock::TruncationPolicy;
use kerr_core::kernels::{Gamma, KernelKind};
use kerr_core::learn::{Evaluation, GradientMode};
use kerr_core::measure::LabelConvention;

/// `re` or `re,im`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected 're' or 're,im', got '{s}'")),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(z)
}

fn parse_kind(s: &str) -> Result<KernelKind, String> {
    s.parse().map_err(|e: kerr_core::KerrError| e.to_string())
}

fn parse_gamma(s: &str) -> Result<Gamma, String> {
    s.parse().map_err(|e: kerr_core::KerrError| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "kerr-qlm", version, about = "Kerr-kernel quantum learning machine: data, labels, kernels and training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Uniform points on the unit square; prints per-column statistics.
    GenData(GenData),
    /// Random displacement sets as JSON.
    SampleDisplacements(SampleDisplacements),
    /// Labels points with the two-mode displaced-parity decision function.
    Label(Label),
    /// Trains and evaluates an SVM on a labeled CSV.
    Train(Train),
    /// Predicts labels with a saved model.
    Predict(Predict),
    /// Decision function on a phase-space grid.
    Wigner(Wigner),
    /// Sequential single-mode learning trace.
    Sequential(Sequential),
    /// Gram matrix of a point set.
    Kernel(KernelCmd),
    /// Real-axis decision cross-sections under photon loss.
    LossSweep(LossSweep),
    /// Exhaustive search over C (and gamma for RBF).
    GridSearch(GridSearch),
}

/// Encoding amplitude, squeezing and number-basis truncation.
#[derive(Debug, Clone, Args)]
pub struct FockArgs {
    /// Fiducial displacement, `re` or `re,im`.
    #[arg(long, default_value = "1", value_parser = parse_complex, allow_hyphen_values = true)]
    pub alpha0: Complex64,
    /// Squeezing parameter of the fiducial state.
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    /// Highest number state kept per mode [default: 10 for two modes, 30 for one].
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Allowed norm outside the truncation [default: 1e-7 for two modes, 1e-8 for one].
    #[arg(long)]
    pub tail_tol: Option<f64>,
}

impl FockArgs {
    pub fn policy(&self, modes: usize) -> TruncationPolicy {
        let base = if modes == 1 {
            TruncationPolicy::single_mode()
        } else {
            TruncationPolicy::two_mode()
        };
        TruncationPolicy {
            cutoff: self.cutoff.unwrap_or(base.cutoff),
            tail_tol: self.tail_tol.unwrap_or(base.tail_tol),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Convention {
    Reference,
    Wigner,
}

impl From<Convention> for LabelConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Reference => LabelConvention::Reference,
            Convention::Wigner => LabelConvention::Wigner,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Gradient {
    FiniteDifference,
    Analytic,
}

impl From<Gradient> for GradientMode {
    fn from(g: Gradient) -> Self {
        match g {
            Gradient::FiniteDifference => GradientMode::FiniteDifference,
            Gradient::Analytic => GradientMode::Analytic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Sampled,
    Exact,
}

impl From<EvalMode> for Evaluation {
    fn from(e: EvalMode) -> Self {
        match e {
            EvalMode::Sampled => Evaluation::Sampled,
            EvalMode::Exact => Evaluation::Exact,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenData {
    #[arg(long, short)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleDisplacements {
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    /// Variance of each real component.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 3.0)]
    pub max_abs2: f64,
    /// Names are `<prefix>1`, `<prefix>2`, ...
    #[arg(long, default_value = "set")]
    pub prefix: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Label {
    /// Points CSV with `x1,x2` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Bundled set name (munu1..munu4), or the entry to pick from `--displacements`.
    #[arg(long)]
    pub set: Option<String>,
    /// Displacement JSON, one object or an array.
    #[arg(long)]
    pub displacements: Option<PathBuf>,
    #[command(flatten)]
    pub fock: FockArgs,
    #[arg(long, value_enum, default_value = "reference")]
    pub label_convention: Convention,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Label-count summary JSON; printed to stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Options shared by `train` and `grid-search`.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV with `x1,x2,label` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Name recorded in the report [default: file stem of --data].
    #[arg(long)]
    pub set_name: Option<String>,
    #[arg(long, value_parser = parse_kind, default_value = "kerr-coherent-2mode")]
    pub kernel: KernelKind,
    #[command(flatten)]
    pub fock: FockArgs,
    /// Keep only the first N rows.
    #[arg(long, default_value_t = 2000)]
    pub sample: usize,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Stopping tolerance of the SMO solver.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// SMO iteration budget, in multiples of the training-set size.
    #[arg(long, default_value_t = 200)]
    pub max_passes: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct Train {
    #[command(flatten)]
    pub common: TrainArgs,
    #[arg(long = "C", alias = "c", default_value_t = 1.0)]
    pub c: f64,
    /// RBF width, `scale` or a positive number.
    #[arg(long, value_parser = parse_gamma, default_value = "scale")]
    pub gamma: Gamma,
    /// Report or config JSON from an earlier run; replaces the model flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Trained model JSON for `predict`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Predicted labels on a 0.02 mesh over the unit square.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Predict {
    #[arg(long)]
    pub model: PathBuf,
    /// Points CSV with `x1,x2` columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value = "-2", allow_hyphen_values = true)]
    pub re_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub re_max: f64,
    #[arg(long, default_value = "-2", allow_hyphen_values = true)]
    pub im_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub im_max: f64,
    /// Samples per axis.
    #[arg(long, default_value_t = 81)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct Wigner {
    /// Single-mode encoding of x.
    #[arg(long, conflicts_with_all = ["x1", "x2"], required_unless_present = "x1")]
    pub x: Option<f64>,
    /// Two-mode encoding; the grid runs over mu at fixed --nu.
    #[arg(long, requires = "x2")]
    pub x1: Option<f64>,
    #[arg(long, requires = "x1")]
    pub x2: Option<f64>,
    #[arg(long, default_value = "0", value_parser = parse_complex, allow_hyphen_values = true)]
    pub nu: Complex64,
    #[command(flatten)]
    pub fock: FockArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Photon loss rate relative to the Kerr rate (single mode only).
    #[arg(long, conflicts_with = "x1")]
    pub gamma_over_chi: Option<f64>,
    #[arg(long, value_enum, default_value = "reference")]
    pub label_convention: Convention,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Sequential {
    #[arg(long, default_value_t = 0.25)]
    pub x: f64,
    /// True label, +1 or -1 [default: sign of cos(pi x)].
    #[arg(long, allow_hyphen_values = true)]
    pub label: Option<i8>,
    #[arg(long, default_value = "1", value_parser = parse_complex, allow_hyphen_values = true)]
    pub alpha0: Complex64,
    #[arg(long, default_value = "0", value_parser = parse_complex, allow_hyphen_values = true)]
    pub mu0: Complex64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Parity shots per estimate.
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Finite-difference probe offset in sampled mode.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "finite-difference")]
    pub gradient: Gradient,
    #[arg(long, value_enum, default_value = "sampled")]
    pub evaluation: EvalMode,
    #[arg(long, default_value_t = 30)]
    pub cutoff: usize,
    /// Required with `--evaluation sampled`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KernelCmd {
    /// CSV whose `x*` columns are the coordinates.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, value_parser = parse_kind, default_value = "kerr-coherent-2mode")]
    pub kernel: KernelKind,
    #[command(flatten)]
    pub fock: FockArgs,
    #[arg(long, value_parser = parse_gamma, default_value = "scale")]
    pub gamma: Gamma,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: EvalMode,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    /// Required with `--mode sampled`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LossSweep {
    #[arg(long, default_value_t = 0.25)]
    pub x: f64,
    #[arg(long, default_value = "1", value_parser = parse_complex, allow_hyphen_values = true)]
    pub alpha0: Complex64,
    /// Loss rates relative to the Kerr rate.
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2")]
    pub gammas: Vec<f64>,
    #[arg(long, default_value = "-2.5", allow_hyphen_values = true)]
    pub u_min: f64,
    #[arg(long, default_value_t = 2.5)]
    pub u_max: f64,
    #[arg(long, default_value_t = 201)]
    pub steps: usize,
    #[arg(long, default_value_t = 30)]
    pub cutoff: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridSearch {
    #[command(flatten)]
    pub common: TrainArgs,
    #[arg(long = "C-grid", alias = "c-grid", value_delimiter = ',', default_value = "0.1,1,10,100")]
    pub c_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_gamma, default_value = "scale")]
    pub gamma_grid: Vec<Gamma>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
