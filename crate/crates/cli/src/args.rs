//! Command-line flags and their resolution into a [`Job`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use freqbias::flow::{FlowConfig, Variant};
use freqbias::seqtrain::{OptimizerKind, StripeConfig};
use freqbias::transfer::DEFAULT_TV_POINTS;

use crate::error::{CliError, Result};
use crate::jobs::{
    read_json, AnalyzeConfig, ApplyConfig, FlowJob, Job, LandscapeConfig, PassrateConfig, ScalingConfig, WavesConfig,
};

#[derive(Debug, Parser)]
#[command(name = "freqbias", version, about = "Frequency-bias experiments for diagonal SSM layers")]
pub struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Worker threads; 1 runs serially, 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tail total variation of a model against its analytic bounds.
    Analyze(AnalyzeArgs),
    /// Discretization scaling report for an alpha-scaled HiPPO system.
    Scaling(ScalingArgs),
    /// Run a sequence through a model with the FFT pipeline.
    Apply(ApplyArgs),
    /// Gradient flow from a grid of initial imaginary parts.
    Flow(FlowArgs),
    /// Loss values on a (y, xi) grid.
    Landscape(LandscapeArgs),
    /// Train the toy model on the three-wave magnitude task.
    Waves(WavesArgs),
    /// Low/high pass-rate ratios of trained stripe autoencoders.
    Passrate(PassrateArgs),
    /// Re-run the job recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Model file with fields x, y, xi, zeta, d.
    pub model: PathBuf,
    /// Frequency cutoff B; must exceed every |y_j|.
    #[arg(long = "b", allow_hyphen_values = true)]
    pub cutoff_b: f64,
    /// Also report the total variation of the filtered response.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Grid points per tail for the numeric total variation.
    #[arg(long, default_value_t = DEFAULT_TV_POINTS)]
    pub grid: usize,
    /// Failure probability for the HiPPO bound.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Sequence length L.
    #[arg(long = "len", default_value_t = 4096)]
    pub seq_len: usize,
    /// Index of the pole to report in detail.
    #[arg(long, default_value_t = 0)]
    pub pole: usize,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Model file with fields x, y, xi, zeta, d.
    pub model: PathBuf,
    /// CSV file with a header row holding the input sequence.
    pub input: PathBuf,
    #[arg(long, default_value = "u")]
    pub column: String,
    #[arg(long)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Target transfer function: main or appendixD.
    #[arg(long, default_value = "main")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Initial y values as lo:hi:count.
    #[arg(long = "y0-grid", default_value = "-80:80:41", allow_hyphen_values = true, value_parser = parse_grid)]
    pub y0_grid: (f64, f64, usize),
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub xi0: f64,
    /// Also write every accepted integrator step.
    #[arg(long)]
    pub paths: bool,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    #[arg(long, default_value = "main")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// As lo:hi.
    #[arg(long = "y-range", default_value = "-80:80", allow_hyphen_values = true, value_parser = parse_range)]
    pub y_range: (f64, f64),
    /// As lo:hi.
    #[arg(long = "xi-range", default_value = "-2:8", allow_hyphen_values = true, value_parser = parse_range)]
    pub xi_range: (f64, f64),
    /// Grid points as NY:NXI.
    #[arg(long, default_value = "81:41", value_parser = parse_resolution)]
    pub resolution: (usize, usize),
}

#[derive(Debug, Args)]
pub struct WavesArgs {
    /// JSON file with optional model, train and data sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub train_beta: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub states: Option<usize>,
    /// Sequence length; dt follows as 2 pi / L unless --dt is given.
    #[arg(long = "seq-len")]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Comma-separated wave frequencies.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub freqs: Option<Vec<f64>>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
}

#[derive(Debug, Args)]
pub struct PassrateArgs {
    /// JSON file with a stripe experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated alpha grid.
    #[arg(long, default_value = "0.1,1,10", value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Comma-separated beta grid.
    #[arg(long, default_value = "-1,0,1", value_delimiter = ',', allow_hyphen_values = true)]
    pub betas: Vec<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub images: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub states: Option<usize>,
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse::<usize>().map_err(|_| format!("not a count: {s:?}"))
}

pub fn parse_grid(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    match s.split(':').collect::<Vec<_>>()[..] {
        [lo, hi, n] => Ok((parse_f64(lo)?, parse_f64(hi)?, parse_usize(n)?)),
        _ => Err(format!("expected lo:hi:count, got {s:?}")),
    }
}

pub fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    match s.split(':').collect::<Vec<_>>()[..] {
        [lo, hi] => Ok((parse_f64(lo)?, parse_f64(hi)?)),
        _ => Err(format!("expected lo:hi, got {s:?}")),
    }
}

pub fn parse_resolution(s: &str) -> std::result::Result<(usize, usize), String> {
    match s.split(':').collect::<Vec<_>>()[..] {
        [a, b] => Ok((parse_usize(a)?, parse_usize(b)?)),
        _ => Err(format!("expected NY:NXI, got {s:?}")),
    }
}

impl Command {
    /// Resolve flags and config files into a self-contained job. `None` for
    /// `replay`, whose job comes from the manifest.
    pub fn resolve(&self, seed: u64) -> Result<Option<Job>> {
        let job = match self {
            Command::Analyze(a) => Job::Analyze(AnalyzeConfig {
                model: a.model.clone(),
                cutoff_b: a.cutoff_b,
                beta: a.beta,
                grid: a.grid,
                delta: a.delta,
            }),
            Command::Scaling(a) => Job::Scaling(ScalingConfig {
                n: a.n,
                alpha: a.alpha,
                dt: a.dt,
                seq_len: a.seq_len,
                pole: a.pole,
                seed,
            }),
            Command::Apply(a) => Job::Apply(ApplyConfig {
                model: a.model.clone(),
                input: a.input.clone(),
                column: a.column.clone(),
                dt: a.dt,
                beta: a.beta,
            }),
            Command::Flow(a) => Job::Flow(FlowJob {
                variant: a.variant,
                xi0: a.xi0,
                y0_grid: a.y0_grid,
                paths: a.paths,
                flow: FlowConfig::with_beta(a.beta),
            }),
            Command::Landscape(a) => Job::Landscape(LandscapeConfig {
                variant: a.variant,
                beta: a.beta,
                y_range: a.y_range,
                xi_range: a.xi_range,
                resolution: a.resolution,
            }),
            Command::Waves(a) => Job::Waves(a.resolve(seed)?),
            Command::Passrate(a) => Job::Passrate(a.resolve(seed)?),
            Command::Replay { .. } => return Ok(None),
        };
        Ok(Some(job))
    }
}

impl WavesArgs {
    fn resolve(&self, seed: u64) -> Result<WavesConfig> {
        let mut c: WavesConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => WavesConfig::default(),
        };
        let m = &mut c.model;
        if let Some(v) = self.alpha {
            m.alpha = v;
        }
        if let Some(v) = self.beta {
            m.beta = v;
        }
        if self.train_beta {
            m.train_beta = true;
        }
        if let Some(v) = self.channels {
            m.channels = v;
        }
        if let Some(v) = self.states {
            m.states = v;
        }
        if let Some(v) = self.seq_len {
            m.seq_len = v;
            m.dt = 2.0 * std::f64::consts::PI / v as f64;
        }
        if let Some(v) = self.dt {
            m.dt = v;
        }
        if let Some(v) = self.epochs {
            c.train.epochs = v;
        }
        if let Some(v) = self.optimizer {
            c.train.optimizer = v;
        }
        if let Some(v) = self.samples {
            c.data.count = v;
        }
        if let Some(v) = &self.freqs {
            c.data.freqs = v.clone();
        }
        c.model.outputs = c.data.freqs.len();
        c.model.seed = seed;
        c.train.seed = seed;
        c.data.seed = seed;
        Ok(c)
    }
}

impl PassrateArgs {
    fn resolve(&self, seed: u64) -> Result<PassrateConfig> {
        let mut s: StripeConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => StripeConfig::default(),
        };
        if let Some(v) = self.steps {
            s.steps = v;
        }
        if let Some(v) = self.images {
            s.images = v;
        }
        if let Some(v) = self.channels {
            s.channels = v;
        }
        if let Some(v) = self.states {
            s.states = v;
        }
        s.seed = seed;
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(CliError::Config("alpha and beta grids must be nonempty".into()));
        }
        Ok(PassrateConfig {
            alphas: self.alphas.clone(),
            betas: self.betas.clone(),
            stripes: s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grids() {
        assert_eq!(parse_grid("-80:80:41").unwrap(), (-80.0, 80.0, 41));
        assert!(parse_grid("1:2").is_err());
        assert_eq!(parse_range("-2:8").unwrap(), (-2.0, 8.0));
        assert_eq!(parse_resolution("2:3").unwrap(), (2, 3));
    }

    #[test]
    fn negative_values_parse_as_values() {
        let cli = Cli::try_parse_from(["freqbias", "flow", "--beta", "-2", "--y0-grid", "-10:10:3"]).unwrap();
        match cli.command {
            Command::Flow(a) => {
                assert_eq!(a.beta, -2.0);
                assert_eq!(a.y0_grid, (-10.0, 10.0, 3));
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn lists_split_on_commas() {
        let cli = Cli::try_parse_from(["freqbias", "passrate", "--betas", "-1,0.5"]).unwrap();
        match cli.command {
            Command::Passrate(a) => {
                assert_eq!(a.betas, vec![-1.0, 0.5]);
                assert_eq!(a.alphas, vec![0.1, 1.0, 10.0]);
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn seed_reaches_every_waves_draw() {
        let cli = Cli::try_parse_from(["freqbias", "--seed", "7", "waves", "--seq-len", "64"]).unwrap();
        let Some(Job::Waves(c)) = cli.command.resolve(cli.seed).unwrap() else {
            panic!("expected a waves job");
        };
        assert_eq!((c.model.seed, c.train.seed, c.data.seed), (7, 7, 7));
        assert_eq!(c.model.dt, 2.0 * std::f64::consts::PI / 64.0);
        assert_eq!(c.model.outputs, 3);
    }
}
