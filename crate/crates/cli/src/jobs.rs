//! Resolved configurations and the runners behind each subcommand.
//!
//! A run is a pure function of its [`Job`]: the manifest stores the job, and
//! replaying it writes bit-identical artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use freqbias::flow::{
    default_quadrature, illustrative_target, landscape_grid, region_boundary, run_flow_with, uniform_grid,
    FlowConfig, FlowLoss, TerminalClass, Variant,
};
use freqbias::init::{frequency_nodes, hippo_alpha, scaling_report};
use freqbias::seqtrain::{
    make_wave_dataset, stripe_passrate_experiment, train, ModelConfig, StripeConfig, ToySsmModel, TrainConfig,
};
use freqbias::spectral::{multiplier, SpectralPlan};
use freqbias::transfer::{hippo_tail_bound, numeric_tail_tv, total_variation_numeric_with, tv_tail_bound};
use freqbias::{DiagonalLti, Exec, FrequencyNode, InitConfig, SobolevFilter, TailSide};

use crate::error::{CliError, Result};
use crate::output::{num, Artifacts};

macro_rules! progress {
    ($($arg:tt)*) => { eprintln!("[freqbias] {}", format_args!($($arg)*)) };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "config", rename_all = "lowercase")]
pub enum Job {
    Analyze(AnalyzeConfig),
    Scaling(ScalingConfig),
    Apply(ApplyConfig),
    Flow(FlowJob),
    Landscape(LandscapeConfig),
    Waves(WavesConfig),
    Passrate(PassrateConfig),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Analyze(_) => "analyze",
            Job::Scaling(_) => "scaling",
            Job::Apply(_) => "apply",
            Job::Flow(_) => "flow",
            Job::Landscape(_) => "landscape",
            Job::Waves(_) => "waves",
            Job::Passrate(_) => "passrate",
        }
    }

    pub fn config_value(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        Ok(v["config"].take())
    }

    pub fn from_parts(subcommand: &str, config: serde_json::Value) -> Result<Self> {
        let tagged = serde_json::json!({ "subcommand": subcommand, "config": config });
        serde_json::from_value(tagged).map_err(|e| CliError::Config(format!("manifest config for {subcommand}: {e}")))
    }

    pub fn run(&self, out: &mut Artifacts, exec: Exec) -> Result<()> {
        match self {
            Job::Analyze(c) => analyze(c, out, exec),
            Job::Scaling(c) => scaling(c, out),
            Job::Apply(c) => apply(c, out),
            Job::Flow(c) => flow(c, out, exec),
            Job::Landscape(c) => landscape(c, out, exec),
            Job::Waves(c) => waves(c, out, exec),
            Job::Passrate(c) => passrate(c, out, exec),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

// ------------------------------------------------------------------ analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub model: PathBuf,
    pub cutoff_b: f64,
    pub beta: f64,
    pub grid: usize,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
struct TailReport {
    numeric_tv: f64,
    bound: f64,
    satisfied: bool,
    /// Numeric total variation of the filtered response, when `beta != 0`.
    filtered_tv: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    n: usize,
    cutoff_b: f64,
    max_abs_y: f64,
    beta: f64,
    left: TailReport,
    right: TailReport,
    /// Probabilistic bound for HiPPO systems with Gaussian residues.
    hippo_bound: Option<f64>,
    hippo_bound_note: Option<String>,
}

fn analyze(c: &AnalyzeConfig, out: &mut Artifacts, exec: Exec) -> Result<()> {
    let sys: DiagonalLti = read_json(&c.model)?;
    let tail = |side: TailSide| -> Result<TailReport> {
        let bound = tv_tail_bound(&sys, c.cutoff_b, side)?;
        let numeric_tv = numeric_tail_tv(&sys, c.cutoff_b, side, c.grid, exec)?;
        let filtered_tv = if c.beta != 0.0 {
            Some(total_variation_numeric_with(&sys, c.beta, side.window(c.cutoff_b)?, c.grid, exec)?)
        } else {
            None
        };
        Ok(TailReport {
            numeric_tv,
            bound,
            satisfied: numeric_tv <= bound,
            filtered_tv,
        })
    };
    let left = tail(TailSide::Left)?;
    let right = tail(TailSide::Right)?;
    let (hippo_bound, hippo_bound_note) = match hippo_tail_bound(sys.n(), c.cutoff_b, c.delta) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    progress!(
        "analyze: n = {}, tail TV {:.4e} / {:.4e} against bounds {:.4e} / {:.4e}",
        sys.n(),
        left.numeric_tv,
        right.numeric_tv,
        left.bound,
        right.bound
    );
    out.json(
        "analyze.json",
        &AnalyzeReport {
            n: sys.n(),
            cutoff_b: c.cutoff_b,
            max_abs_y: sys.max_abs_y(),
            beta: c.beta,
            left,
            right,
            hippo_bound,
            hippo_bound_note,
        },
    )?;
    Ok(())
}

// ------------------------------------------------------------------ scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub n: usize,
    pub alpha: f64,
    pub dt: f64,
    pub seq_len: usize,
    pub pole: usize,
    pub seed: u64,
}

fn scaling(c: &ScalingConfig, out: &mut Artifacts) -> Result<()> {
    let sys = hippo_alpha(&InitConfig::new(c.n, c.alpha, c.seed))?;
    let grid = frequency_nodes(c.seq_len, c.dt)?;
    let report = scaling_report(c.pole, &sys, &grid)?;
    progress!(
        "scaling: |y| dt / ||g||_2 = {:.4e}, alpha cap {:.4e}",
        report.rule1_ratio,
        report.rule2_alpha_max
    );
    out.json("scaling.json", &report)?;
    Ok(())
}

// ------------------------------------------------------------------ apply

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyConfig {
    pub model: PathBuf,
    pub input: PathBuf,
    pub column: String,
    pub dt: f64,
    pub beta: f64,
}

/// Read one numeric column from a CSV file with a header row. A file with a
/// single column is accepted whatever its header says.
fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let idx = match headers.iter().position(|h| h.trim() == column) {
        Some(i) => i,
        None if headers.len() == 1 => 0,
        None => {
            return Err(CliError::Config(format!(
                "{}: no column {column:?} among {:?}",
                path.display(),
                headers.iter().collect::<Vec<_>>()
            )))
        }
    };
    rdr.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            let field = rec.get(idx).unwrap_or("").trim();
            field
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("{}: row {}: not a number: {field:?}", path.display(), row + 2)))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ApplySummary {
    len: usize,
    dt: f64,
    beta: f64,
    /// Largest imaginary part left after the inverse transform.
    imag_residue: f64,
}

fn apply(c: &ApplyConfig, out: &mut Artifacts) -> Result<()> {
    let sys: DiagonalLti = read_json(&c.model)?;
    let u = read_column(&c.input, &c.column)?;
    let filter = SobolevFilter::new(c.beta)?;
    let grid = frequency_nodes(u.len(), c.dt)?;
    let m = multiplier(&sys, filter, &grid);
    let (y, imag_residue) = SpectralPlan::new(u.len()).filter(&u, &m);
    progress!("apply: {} samples, imaginary residue {imag_residue:.2e}", u.len());
    out.csv(
        "apply.csv",
        &["t", "u", "y"],
        u.iter()
            .zip(&y)
            .enumerate()
            .map(|(i, (a, b))| vec![num(i as f64 * c.dt), num(*a), num(*b)]),
    )?;
    out.csv(
        "multiplier.csv",
        &["k", "s", "multiplier"],
        grid.nodes().iter().zip(&m).enumerate().map(|(k, (node, m))| {
            let s = match node {
                FrequencyNode::Finite(s) => num(*s),
                FrequencyNode::Infinity => "inf".to_string(),
            };
            vec![k.to_string(), s, num(*m)]
        }),
    )?;
    out.json(
        "apply.json",
        &ApplySummary {
            len: u.len(),
            dt: c.dt,
            beta: c.beta,
            imag_residue,
        },
    )?;
    Ok(())
}

// ------------------------------------------------------------------ flow

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowJob {
    pub variant: Variant,
    pub xi0: f64,
    /// `(lo, hi, count)` for the grid of initial `y`.
    pub y0_grid: (f64, f64, usize),
    pub paths: bool,
    pub flow: FlowConfig,
}

#[derive(Debug, Serialize)]
struct FlowSummary {
    beta: f64,
    left_mode: usize,
    right_mode: usize,
    stuck: usize,
    left_edge: Option<f64>,
    right_edge: Option<f64>,
    boundary: Option<f64>,
}

fn flow(c: &FlowJob, out: &mut Artifacts, exec: Exec) -> Result<()> {
    let target = illustrative_target(c.variant);
    let grid = uniform_grid(c.y0_grid.0, c.y0_grid.1, c.y0_grid.2)?;
    progress!("flow: {} trajectories at beta = {}", grid.len(), c.flow.beta);
    let start = Instant::now();
    let report = region_boundary(&target, c.xi0, &grid, &c.flow, exec)?;
    progress!("flow: done in {:.1}s", start.elapsed().as_secs_f64());
    out.csv(
        "flow.csv",
        &["y0", "xi0", "tau", "y", "xi", "loss", "terminal_class"],
        report.outcomes.iter().map(|o| {
            vec![
                num(o.y0),
                num(c.xi0),
                num(o.tau_final),
                num(o.y_final),
                num(o.xi_final),
                num(o.loss_final),
                o.terminal_class.to_string(),
            ]
        }),
    )?;
    if c.paths {
        let problem = FlowLoss::new(&target, c.flow.beta, &c.flow.quad)?;
        let runs = exec.map_slice(&grid, |&y0| run_flow_with(&problem, &target, y0, c.xi0, &c.flow));
        let mut rows = Vec::new();
        for (run, &y0) in runs.into_iter().zip(&grid) {
            for p in run?.path {
                rows.push(vec![num(y0), num(p.tau), num(p.y), num(p.xi), num(p.loss)]);
            }
        }
        out.csv("flow_paths.csv", &["y0", "tau", "y", "xi", "loss"], rows)?;
    }
    out.json(
        "flow.json",
        &FlowSummary {
            beta: c.flow.beta,
            left_mode: report.count(TerminalClass::LeftMode),
            right_mode: report.count(TerminalClass::RightMode),
            stuck: report.count(TerminalClass::Stuck),
            left_edge: report.left_edge,
            right_edge: report.right_edge,
            boundary: report.boundary,
        },
    )?;
    Ok(())
}

// ------------------------------------------------------------------ landscape

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub variant: Variant,
    pub beta: f64,
    pub y_range: (f64, f64),
    pub xi_range: (f64, f64),
    pub resolution: (usize, usize),
}

fn landscape(c: &LandscapeConfig, out: &mut Artifacts, exec: Exec) -> Result<()> {
    let target = illustrative_target(c.variant);
    let grid = landscape_grid(
        &target,
        c.beta,
        c.y_range,
        c.xi_range,
        c.resolution,
        &default_quadrature(),
        exec,
    )?;
    let (y, xi, loss) = grid.argmin();
    progress!("landscape: minimum {loss:.4e} at (y, xi) = ({y:.3}, {xi:.3})");
    let rows = grid
        .ys
        .iter()
        .zip(&grid.loss)
        .flat_map(|(y, row)| grid.xis.iter().zip(row).map(move |(xi, l)| vec![num(*y), num(*xi), num(*l)]));
    out.csv("landscape.csv", &["y", "xi", "loss"], rows)?;
    Ok(())
}

// ------------------------------------------------------------------ waves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveData {
    pub count: usize,
    pub freqs: Vec<f64>,
    pub amp_range: [f64; 2],
    pub seed: u64,
}

impl Default for WaveData {
    fn default() -> Self {
        WaveData {
            count: 2048,
            freqs: vec![1.0, 16.0, 256.0],
            amp_range: [0.0, 1.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WavesConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: WaveData,
}

#[derive(Debug, Serialize)]
struct WavesSummary {
    freqs: Vec<f64>,
    final_errors: Vec<f64>,
    final_loss: f64,
    /// Error on the lowest frequency is below the error on the highest.
    low_below_high: bool,
    deltas: freqbias::seqtrain::GroupDeltas,
}

fn freq_label(f: f64) -> String {
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("err_f{}", f as i64)
    } else {
        format!("err_f{f}")
    }
}

fn waves(c: &WavesConfig, out: &mut Artifacts, exec: Exec) -> Result<()> {
    if c.model.outputs != c.data.freqs.len() {
        return Err(CliError::Config(format!(
            "model has {} outputs but the data has {} frequencies",
            c.model.outputs,
            c.data.freqs.len()
        )));
    }
    let data = make_wave_dataset(
        c.data.count,
        c.model.seq_len,
        c.model.dt,
        &c.data.freqs,
        c.data.amp_range,
        c.data.seed,
    )?;
    let mut model = ToySsmModel::new(&c.model)?;
    progress!(
        "waves: {} samples, {} epochs, alpha = {}, beta = {}",
        data.len(),
        c.train.epochs,
        c.model.alpha,
        c.model.beta
    );
    let start = Instant::now();
    let log = train(&mut model, &data, &c.train, exec)?;
    progress!("waves: done in {:.1}s", start.elapsed().as_secs_f64());

    let mut header = vec!["epoch".to_string()];
    header.extend(c.data.freqs.iter().map(|&f| freq_label(f)));
    header.push("loss".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(
        "waves.csv",
        &header,
        log.records.iter().map(|r| {
            let mut row = vec![r.epoch.to_string()];
            row.extend(r.label_errors.iter().map(|&e| num(e)));
            row.push(num(r.loss));
            row
        }),
    )?;
    out.json("waves_checkpoint.json", &model.to_checkpoint()?)?;
    let last = log.last();
    let (lo, hi) = lowest_highest(&c.data.freqs);
    out.json(
        "waves.json",
        &WavesSummary {
            freqs: c.data.freqs.clone(),
            final_errors: last.label_errors.clone(),
            final_loss: last.loss,
            low_below_high: last.label_errors[lo] < last.label_errors[hi],
            deltas: log.deltas,
        },
    )?;
    Ok(())
}

fn lowest_highest(freqs: &[f64]) -> (usize, usize) {
    let by = |better: fn(f64, f64) -> bool| {
        (0..freqs.len()).fold(0, |best, i| if better(freqs[i], freqs[best]) { i } else { best })
    };
    (by(|a, b| a < b), by(|a, b| a > b))
}

// ------------------------------------------------------------------ passrate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassrateConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub stripes: StripeConfig,
}

#[derive(Debug, Serialize)]
struct PassrateSummary {
    low_bin: usize,
    high_bin: usize,
    ratios: Vec<Vec<f64>>,
    strictly_decreasing: bool,
}

fn passrate(c: &PassrateConfig, out: &mut Artifacts, exec: Exec) -> Result<()> {
    progress!(
        "passrate: {} x {} autoencoders, {} steps each",
        c.alphas.len(),
        c.betas.len(),
        c.stripes.steps
    );
    let start = Instant::now();
    let report = stripe_passrate_experiment(&c.alphas, &c.betas, &c.stripes, exec)?;
    progress!("passrate: done in {:.1}s", start.elapsed().as_secs_f64());
    out.csv(
        "passrate.csv",
        &["alpha", "beta", "low", "high", "ratio", "train_loss"],
        report.cells.iter().flatten().map(|cell| {
            vec![
                num(cell.alpha),
                num(cell.beta),
                num(cell.low),
                num(cell.high),
                num(cell.ratio),
                num(cell.train_loss),
            ]
        }),
    )?;
    out.json(
        "passrate.json",
        &PassrateSummary {
            low_bin: report.low_bin,
            high_bin: report.high_bin,
            ratios: report.ratios(),
            strictly_decreasing: report.strictly_decreasing(),
        },
    )?;
    Ok(())
}
