use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qdt::simulator::BlurKernel;
use qdt::{CostKind, TomographyConfig, UpdateRule};

/// Evolution times of the reference Rabi scan, in microseconds.
pub const DEFAULT_TIMES_US: [f64; 8] = [0.0, 2.52, 3.64, 5.6, 8.4, 12.6, 18.48, 28.0];

#[derive(Debug, Parser)]
#[command(
    name = "qdt",
    version,
    about = "Tomography of number-resolving atom detectors"
)]
pub struct Cli {
    /// Worker threads for replicas and grid cells (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Seed for every random draw; falls back to QDT_SEED.
    #[arg(long, global = true, env = "QDT_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample Rabi-scan histograms from a synthetic detector.
    Simulate(SimulateArgs),
    /// Reconstruct V, the number distribution and the Rabi frequency.
    Reconstruct(ReconstructArgs),
    /// Wigner functions, Fisher sweep and resolution statistics of a result.
    Analyze(AnalyzeArgs),
    /// Phase-estimation gain of squeezed states read out by a detector.
    Metrology(MetrologyArgs),
    /// Leave-one-out prediction of held-out histograms.
    LearnTest(LearnTestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    Sampled,
    BinIntegrated,
}

impl From<Kernel> for BlurKernel {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Sampled => BlurKernel::Sampled,
            Kernel::BinIntegrated => BlurKernel::BinIntegrated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Update {
    Projected,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cost {
    Hellinger,
    Kl,
}

/// Noise model of a synthetic detector.
#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Width of the Gaussian counting noise, in atoms.
    #[arg(long, default_value_t = 0.4)]
    pub sigma: f64,

    /// Mean number of Poissonian dark counts.
    #[arg(long, default_value_t = 0.27)]
    pub dark: f64,

    /// Per-atom probability of going undetected.
    #[arg(long, default_value_t = 0.0)]
    pub loss: f64,

    /// How the counting noise is discretized onto integers.
    #[arg(long, value_enum, default_value_t = Kernel::Sampled)]
    pub kernel: Kernel,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated evolution times in μs.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TIMES_US)]
    pub times: Vec<f64>,

    /// Shots per time.
    #[arg(long, default_value_t = 1100, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: u64,

    /// Rabi frequency in kHz (cyclic); converted to Ω_R = 2π·f rad/s.
    #[arg(long, default_value_t = 8.2)]
    pub omega_khz: f64,

    /// Mean of the Gaussian total atom number.
    #[arg(long, default_value_t = 35.4)]
    pub n_mean: f64,

    /// Standard deviation of the total atom number.
    #[arg(long, default_value_t = 6.4)]
    pub n_std: f64,

    #[command(flatten)]
    pub detector: DetectorArgs,

    /// Largest count the synthetic detector can report
    /// (default: 10 above the largest atom number).
    #[arg(long)]
    pub detector_nmax: Option<usize>,

    /// Output directory.
    #[arg(long, default_value = "sim")]
    pub out: PathBuf,
}

/// Optimizer settings shared by `reconstruct` and `learn-test`.
#[derive(Debug, Clone, Args)]
pub struct TomographyArgs {
    /// Stop once the summed cost falls to this value.
    #[arg(long, default_value_t = 0.01)]
    pub cutoff: f64,

    /// Step rule for the detector and number-distribution blocks
    #[arg(long, value_enum, default_value_t = Update::Multiplicative)]
    pub update: Update,

    /// Per-histogram distance summed into the cost
    #[arg(long, value_enum, default_value_t = Cost::Hellinger)]
    pub cost: Cost,

    /// Upper bound on outer iterations.
    #[arg(long, default_value_t = 5000)]
    pub max_outer: usize,

    /// Do not rescale the gradient of rarely excited detector columns.
    #[arg(long)]
    pub no_precondition: bool,
}

impl TomographyArgs {
    pub fn config(&self, seed: u64) -> TomographyConfig {
        TomographyConfig {
            cost_cutoff: self.cutoff,
            max_outer_iters: self.max_outer,
            update: match self.update {
                Update::Projected => UpdateRule::Projected,
                Update::Multiplicative => UpdateRule::Multiplicative,
            },
            cost: match self.cost {
                Cost::Hellinger => CostKind::Hellinger,
                Cost::Kl => CostKind::KullbackLeibler,
            },
            precondition_v: !self.no_precondition,
            rng_seed: seed,
            ..TomographyConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Histogram dataset (`.csv` or `.json`).
    #[arg(long)]
    pub data: PathBuf,

    /// Output directory.
    #[arg(long, default_value = "result")]
    pub out: PathBuf,

    #[command(flatten)]
    pub tomography: TomographyArgs,

    /// Bootstrap replicas resampled from the fitted model.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,

    /// Also run the learning test: `all` or comma-separated time indices.
    #[arg(long, num_args = 0..=1, default_missing_value = "all")]
    pub learn_test: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `reconstruct`.
    #[arg(long)]
    pub result: PathBuf,

    /// Compute the Fisher column without detection noise.
    #[arg(long)]
    pub ideal: bool,

    /// Outcomes whose Wigner function is tabulated.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 5, 10])]
    pub wigner: Vec<usize>,

    /// Grid points per phase-space axis on [-6, 6].
    #[arg(long, default_value_t = qdt::analysis::WIGNER_POINTS)]
    pub wigner_points: usize,

    /// Start of the Fisher sweep in rotation angle (rad)
    #[arg(long, default_value_t = 0.05)]
    pub theta_min: f64,

    /// End of the Fisher sweep (rad)
    #[arg(long, default_value_t = 3.1)]
    pub theta_max: f64,

    #[arg(long, default_value_t = 121)]
    pub theta_points: usize,

    /// Output directory (default: the result directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["detector", "synthetic", "ideal"])]
pub struct MetrologyArgs {
    /// Reconstructed detector matrix (`v.csv`).
    #[arg(long)]
    pub detector: Option<PathBuf>,

    /// Build the detector from the noise flags below.
    #[arg(long)]
    pub synthetic: bool,

    /// Noise-free detection.
    #[arg(long)]
    pub ideal: bool,

    #[command(flatten)]
    pub noise: DetectorArgs,

    /// Column copied along the diagonal when a detector is too small for
    /// the largest atom number (default: half its n_max).
    #[arg(long)]
    pub template: Option<usize>,

    /// Mean atom number of the working point.
    #[arg(long, default_value_t = 36.0)]
    pub n_mean: f64,

    /// Atom-number fluctuation of the working point.
    #[arg(long, default_value_t = 6.0)]
    pub dn: f64,

    /// Squeezing values for the gain-versus-s sweep (default: 25 on a log
    /// grid from 0.01 to 1).
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,

    /// Points per axis of the gain map: squeezing (log grid on [0.01, 1]).
    #[arg(long, default_value_t = 25)]
    pub map_s_points: usize,

    /// Largest ΔN of the gain map.
    #[arg(long, default_value_t = 6.0)]
    pub map_dn_max: f64,

    /// Points per axis of the gain map: ΔN (linear grid from 0)
    #[arg(long, default_value_t = 13)]
    pub map_dn_points: usize,

    /// Mean atom numbers of the scaling sweep, each with ΔN = √N̄.
    #[arg(long, value_delimiter = ',', default_values_t = [30.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0])]
    pub scaling_n: Vec<f64>,

    /// Skip the gain map
    #[arg(long)]
    pub no_map: bool,

    /// Skip the scaling sweep
    #[arg(long)]
    pub no_scaling: bool,

    /// Output directory.
    #[arg(long, default_value = "metrology")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearnTestArgs {
    /// Histogram dataset (`.csv` or `.json`).
    #[arg(long)]
    pub data: PathBuf,

    /// Time indices to hold out: `all` or comma-separated.
    #[arg(long, default_value = "all")]
    pub held_out: String,

    #[command(flatten)]
    pub tomography: TomographyArgs,

    /// Output directory.
    #[arg(long, default_value = "learning")]
    pub out: PathBuf,
}
