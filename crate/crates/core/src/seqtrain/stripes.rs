//! Stripe-noise pass rates of a skip-free linear autoencoder trained on
//! smooth synthetic images flattened in row-major order.
//!
//! A pixel `(r, c)` of an `h x w` image sits at `t = r w + c`. A pattern with
//! period `w` along the flattened sequence, `cos(2 pi t / w)`, is the pure
//! bin-`h` sinusoid (low frequency); `cos(2 pi t (w/2 - 1) / w)` alternates
//! almost every pixel and is the pure bin `L/2 - h` sinusoid (high
//! frequency). The pass rate of each is the output/input RMS ratio.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Checkpoint, Group, ModelConfig, ToySsmModel};
use super::optim::{LearningRates, Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectral::{SequenceSignal, SpectralPlan};
use crate::transfer::DiagonalLti;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeConfig {
    pub image_h: usize,
    pub image_w: usize,
    pub channels: usize,
    pub states: usize,
    /// Clean training images.
    pub images: usize,
    /// Full-batch optimizer steps.
    pub steps: usize,
    pub rates: LearningRates,
    /// Sample spacing of the flattened image.
    pub dt: f64,
    pub seed: u64,
}

impl Default for StripeConfig {
    fn default() -> Self {
        StripeConfig {
            image_h: 32,
            image_w: 32,
            channels: 8,
            states: 16,
            images: 64,
            steps: 1000,
            rates: LearningRates::default(),
            dt: 0.5,
            seed: 0,
        }
    }
}

impl StripeConfig {
    pub fn seq_len(&self) -> usize {
        self.image_h * self.image_w
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn low_bin(&self) -> usize {
        self.image_h
    }

    pub fn high_bin(&self) -> usize {
        self.seq_len() / 2 - self.image_h
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_h == 0 || self.image_w < 6 || !self.image_w.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "need image_h >= 1 and an even image_w >= 6, got {} x {}",
                self.image_h, self.image_w
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.channels == 0 || self.images == 0 {
            return Err(Error::InvalidArgument("channels and images must be positive".into()));
        }
        self.rates.validate()
    }
}

/// Row-major flattening of an `h x w` image given by `f(r, c)`.
pub fn flatten_image(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            out.push(f(r, c));
        }
    }
    out
}

/// Stripes of period `w` in flattened order: the pure bin-`h` sinusoid.
pub fn horizontal_stripes(h: usize, w: usize) -> Vec<f64> {
    flatten_image(h, w, |r, c| (2.0 * PI * (r * w + c) as f64 / w as f64).cos())
}

/// Stripes of period `w / (w/2 - 1)` pixels: the pure bin `L/2 - h` sinusoid.
pub fn vertical_stripes(h: usize, w: usize) -> Vec<f64> {
    let q = (w / 2 - 1) as f64;
    flatten_image(h, w, |r, c| (2.0 * PI * q * (r * w + c) as f64 / w as f64).cos())
}

/// Smooth random image: a few low 2-D spatial frequencies with random
/// amplitudes and phases.
pub fn smooth_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut modes = Vec::new();
    for p in 0..3 {
        for q in 0..3 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            modes.push((p as f64, q as f64, a, phi));
        }
    }
    flatten_image(h, w, |r, c| {
        modes
            .iter()
            .map(|&(p, q, a, phi)| {
                a * (2.0 * PI * (p * r as f64 / h as f64 + q * c as f64 / w as f64) + phi).cos()
            })
            .sum()
    })
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Output/input RMS ratio of `noise` through the autoencoder.
pub fn passrate_of(model: &ToySsmModel, noise: &[f64], dt: f64) -> Result<f64> {
    let u = SequenceSignal::new(noise.to_vec(), dt)?;
    let out = model.reconstruct(&u)?;
    Ok(rms(out.samples()) / rms(noise))
}

/// Low and high stripe pass rates of one model and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripeCell {
    pub alpha: f64,
    pub beta: f64,
    pub low: f64,
    pub high: f64,
    pub ratio: f64,
    pub train_loss: f64,
}

pub fn measure_stripes(model: &ToySsmModel, cfg: &StripeConfig) -> Result<(f64, f64)> {
    let (h, w) = (cfg.image_h, cfg.image_w);
    let low = passrate_of(model, &horizontal_stripes(h, w), cfg.dt())?;
    let high = passrate_of(model, &vertical_stripes(h, w), cfg.dt())?;
    Ok((low, high))
}

/// The all-pass control: one skip-only channel with `d = 1`.
pub fn identity_autoencoder(cfg: &StripeConfig) -> Result<ToySsmModel> {
    ToySsmModel::from_checkpoint(&Checkpoint {
        channels: vec![DiagonalLti::skip(1.0)],
        encoder: vec![1.0],
        head: vec![vec![1.0]],
        bias: vec![0.0],
        beta: 0.0,
        train_beta: false,
        train_skip: false,
        seq_len: cfg.seq_len(),
        dt: cfg.dt(),
    })
}

/// Mean power spectrum of the clean training images, restricted to bins
/// that carry energy.
pub fn clean_power(cfg: &StripeConfig) -> Result<(Vec<usize>, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = cfg.seq_len();
    let plan = SpectralPlan::new(l);
    let mut mean = vec![0.0; l];
    for _ in 0..cfg.images {
        let img = smooth_image(cfg.image_h, cfg.image_w, &mut rng);
        for (m, v) in mean.iter_mut().zip(plan.forward(&img)) {
            *m += v.norm_sqr() / cfg.images as f64;
        }
    }
    let total: f64 = mean.iter().sum();
    let (mut bins, mut power) = (Vec::new(), Vec::new());
    for (k, p) in mean.into_iter().enumerate() {
        if p > super::data::POWER_FLOOR * total {
            bins.push(k);
            power.push(p);
        }
    }
    Ok((bins, power))
}

/// Train a skip-free autoencoder with HiPPO(`alpha`) poles and Sobolev
/// exponent `beta` on the clean images and measure its stripe pass rates.
pub fn train_autoencoder(
    alpha: f64,
    beta: f64,
    cfg: &StripeConfig,
    clean: &(Vec<usize>, Vec<f64>),
) -> Result<(ToySsmModel, f64)> {
    cfg.validate()?;
    let mut model = ToySsmModel::new(&ModelConfig {
        channels: cfg.channels,
        states: cfg.states,
        outputs: 1,
        seq_len: cfg.seq_len(),
        dt: cfg.dt(),
        alpha,
        beta,
        train_beta: false,
        skip: false,
        seed: cfg.seed,
    })?;
    let mut opt = Optimizer::new(OptimizerKind::Adam, cfg.rates, &model.params);
    for step in 0..cfg.steps {
        let bg = model.reconstruction_grad(&clean.0, &clean.1)?;
        if !bg.loss.is_finite() || !bg.grad.all_finite() {
            return Err(Error::Divergence {
                step,
                what: format!("non-finite reconstruction loss {}", bg.loss),
            });
        }
        opt.step(&mut model.params, &bg.grad, model_trainable);
        model.params.check_update(step)?;
    }
    let loss = model.reconstruction_grad(&clean.0, &clean.1)?.loss;
    Ok((model, loss))
}

fn model_trainable(g: Group) -> bool {
    !matches!(g, Group::D | Group::Beta | Group::Bias)
}

/// Ratio matrix `ratios[i][j]` for `alpha_grid[i]` and `beta_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeReport {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub cells: Vec<Vec<StripeCell>>,
    pub low_bin: usize,
    pub high_bin: usize,
}

impl StripeReport {
    pub fn ratios(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.ratio).collect())
            .collect()
    }

    /// Strictly decreasing along every row (in beta) and every column (in
    /// alpha).
    pub fn strictly_decreasing(&self) -> bool {
        let r = self.ratios();
        let rows = r.iter().all(|row| row.windows(2).all(|p| p[1] < p[0]));
        let cols = (0..self.betas.len()).all(|j| r.windows(2).all(|p| p[1][j] < p[0][j]));
        rows && cols
    }
}

pub fn stripe_passrate_experiment(
    alpha_grid: &[f64],
    beta_grid: &[f64],
    cfg: &StripeConfig,
    exec: Exec,
) -> Result<StripeReport> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::InvalidArgument("alpha and beta grids must be nonempty".into()));
    }
    let clean = clean_power(cfg)?;
    let jobs: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let results = exec.map_slice(&jobs, |&(alpha, beta)| -> Result<StripeCell> {
        let (model, train_loss) = train_autoencoder(alpha, beta, cfg, &clean)?;
        let (low, high) = measure_stripes(&model, cfg)?;
        Ok(StripeCell {
            alpha,
            beta,
            low,
            high,
            ratio: low / high,
            train_loss,
        })
    });
    let mut cells = Vec::with_capacity(alpha_grid.len());
    let mut it = results.into_iter();
    for _ in alpha_grid {
        cells.push(it.by_ref().take(beta_grid.len()).collect::<Result<Vec<_>>>()?);
    }
    Ok(StripeReport {
        alphas: alpha_grid.to_vec(),
        betas: beta_grid.to_vec(),
        cells,
        low_bin: cfg.low_bin(),
        high_bin: cfg.high_bin(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft_power(u: &[f64]) -> Vec<f64> {
        let l = u.len();
        (0..l)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in u.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / l as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn pure_bin(u: &[f64], bin: usize) {
        let l = u.len();
        let p = dft_power(u);
        let total: f64 = p.iter().sum();
        let on = p[bin] + p[(l - bin) % l];
        assert!(on > (1.0 - 1e-12) * total, "bin {bin}: {on} of {total}");
    }

    #[test]
    fn stripes_flatten_to_pure_bins() {
        for (h, w) in [(8, 8), (6, 10), (16, 12)] {
            pure_bin(&horizontal_stripes(h, w), h);
            pure_bin(&vertical_stripes(h, w), h * w / 2 - h);
        }
    }

    #[test]
    fn identity_control_has_unit_ratio() {
        let cfg = StripeConfig::default();
        let model = identity_autoencoder(&cfg).unwrap();
        let (low, high) = measure_stripes(&model, &cfg).unwrap();
        assert!((low - 1.0).abs() < 1e-12);
        assert!((high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn passrate_matches_response() {
        let cfg = StripeConfig {
            image_h: 8,
            image_w: 8,
            steps: 0,
            ..StripeConfig::default()
        };
        let clean = clean_power(&cfg).unwrap();
        let (model, _) = train_autoencoder(1.0, 0.5, &cfg, &clean).unwrap();
        let (low, high) = measure_stripes(&model, &cfg).unwrap();
        assert!((low - model.response(cfg.low_bin()).unwrap().abs()).abs() < 1e-9 * low);
        assert!((high - model.response(cfg.high_bin()).unwrap().abs()).abs() < 1e-9 * high);
    }

    #[test]
    fn reconstruction_loss_is_mean_squared_error() {
        let cfg = StripeConfig {
            image_h: 6,
            image_w: 8,
            steps: 0,
            ..StripeConfig::default()
        };
        let clean = clean_power(&StripeConfig { images: 1, ..cfg.clone() }).unwrap();
        let (model, loss) = train_autoencoder(1.0, 0.0, &cfg, &clean).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let img = smooth_image(6, 8, &mut rng);
        let out = model
            .reconstruct(&SequenceSignal::new(img.clone(), cfg.dt()).unwrap())
            .unwrap();
        let mse = out
            .samples()
            .iter()
            .zip(&img)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / img.len() as f64;
        assert!((mse - loss).abs() < 1e-9 * mse.max(1e-300), "{mse} vs {loss}");
    }

    #[test]
    fn reconstruction_grad_matches_finite_differences() {
        let cfg = StripeConfig {
            image_h: 4,
            image_w: 8,
            channels: 2,
            states: 3,
            steps: 0,
            ..StripeConfig::default()
        };
        let clean = clean_power(&cfg).unwrap();
        for beta in [-1.0, 0.0, 1.0] {
            let (model, _) = train_autoencoder(1.0, beta, &cfg, &clean).unwrap();
            let an = model.reconstruction_grad(&clean.0, &clean.1).unwrap();
            for g in [Group::Nu, Group::Y, Group::Xi, Group::Zeta, Group::Encoder, Group::Head] {
                for i in 0..model.params.group(g).len() {
                    let v = model.params.group(g)[i];
                    let h = 1e-6 * v.abs().max(1.0);
                    let eval = |t: f64| {
                        let mut m = model.clone();
                        m.params.group_mut(g)[i] = t;
                        m.reconstruction_grad(&clean.0, &clean.1).unwrap().loss
                    };
                    let fd = (eval(v + h) - eval(v - h)) / (2.0 * h);
                    let a = an.grad.group(g)[i];
                    assert!(
                        (a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()) + 1e-9,
                        "beta {beta} {g:?}[{i}]: {a} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn training_lowers_reconstruction_loss() {
        let cfg = StripeConfig {
            image_h: 8,
            image_w: 8,
            steps: 100,
            ..StripeConfig::default()
        };
        let clean = clean_power(&cfg).unwrap();
        let (_, before) = train_autoencoder(1.0, 0.0, &StripeConfig { steps: 0, ..cfg.clone() }, &clean).unwrap();
        let (_, after) = train_autoencoder(1.0, 0.0, &cfg, &clean).unwrap();
        assert!(after < 0.5 * before, "{after} vs {before}");
    }

    #[test]
    fn empty_grids_rejected() {
        let cfg = StripeConfig::default();
        assert!(stripe_passrate_experiment(&[], &[0.0], &cfg, Exec::Serial).is_err());
        assert!(stripe_passrate_experiment(&[1.0], &[], &cfg, Exec::Serial).is_err());
    }
}
