//! Encoder, per-channel LTI bank, RMS pooling and linear head.
//!
//! For one input `u` with DFT `U`, channel `h` produces
//! `y_h = iDFT(m_h . DFT(e_h u))` where `m_h` is the node multiplier of the
//! channel system, so by Parseval the pooled feature is
//! `f_h = sqrt(mean_t y_h^2) = |e_h| sqrt(sum_k m_h(k)^2 |U_k|^2) / L`.
//! The head is `out_k = b_k + sum_h W[h][k] f_h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::data::SpectralSample;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grad::pole_partials;
use crate::init::{frequency_nodes, hippo_alpha, FrequencyGrid, FrequencyNode, InitConfig};
use crate::spectral::{apply, node_multiplier, SequenceSignal, SobolevFilter};
use crate::transfer::{sobolev_weight, DiagonalLti};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub channels: usize,
    pub states: usize,
    pub outputs: usize,
    pub seq_len: usize,
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub train_beta: bool,
    /// Keep a trainable skip term `d`; otherwise `d` is fixed at zero.
    #[serde(default)]
    pub skip: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 16,
            states: 32,
            outputs: 3,
            seq_len: 4096,
            dt: 2.0 * std::f64::consts::PI / 4096.0,
            alpha: 1.0,
            beta: 0.0,
            train_beta: false,
            skip: false,
            seed: 0,
        }
    }
}

/// Trainable parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Nu,
    Y,
    Xi,
    Zeta,
    D,
    Encoder,
    Head,
    Bias,
    Beta,
}

impl Group {
    pub const ALL: [Group; 9] = [
        Group::Nu,
        Group::Y,
        Group::Xi,
        Group::Zeta,
        Group::D,
        Group::Encoder,
        Group::Head,
        Group::Bias,
        Group::Beta,
    ];
}

/// All trainable values, channel-major (`nu[h * n + j]`, `head[h * K + k]`).
/// Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: Vec<f64>,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub d: Vec<f64>,
    pub encoder: Vec<f64>,
    pub head: Vec<f64>,
    pub bias: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ModelParams {
    pub fn zeros_like(other: &ModelParams) -> Self {
        let z = |v: &Vec<f64>| vec![0.0; v.len()];
        ModelParams {
            nu: z(&other.nu),
            y: z(&other.y),
            xi: z(&other.xi),
            zeta: z(&other.zeta),
            d: z(&other.d),
            encoder: z(&other.encoder),
            head: z(&other.head),
            bias: z(&other.bias),
            beta: z(&other.beta),
        }
    }

    pub fn group(&self, g: Group) -> &[f64] {
        match g {
            Group::Nu => &self.nu,
            Group::Y => &self.y,
            Group::Xi => &self.xi,
            Group::Zeta => &self.zeta,
            Group::D => &self.d,
            Group::Encoder => &self.encoder,
            Group::Head => &self.head,
            Group::Bias => &self.bias,
            Group::Beta => &self.beta,
        }
    }

    pub fn group_mut(&mut self, g: Group) -> &mut [f64] {
        match g {
            Group::Nu => &mut self.nu,
            Group::Y => &mut self.y,
            Group::Xi => &mut self.xi,
            Group::Zeta => &mut self.zeta,
            Group::D => &mut self.d,
            Group::Encoder => &mut self.encoder,
            Group::Head => &mut self.head,
            Group::Bias => &mut self.bias,
            Group::Beta => &mut self.beta,
        }
    }

    pub fn all_finite(&self) -> bool {
        Group::ALL
            .iter()
            .all(|&g| self.group(g).iter().all(|v| v.is_finite()))
    }

    /// `Divergence` at `step` if any parameter is non-finite or a pole real
    /// part `-exp(nu)` has underflowed to zero or overflowed.
    pub fn check_update(&self, step: usize) -> Result<()> {
        if !self.all_finite() {
            return Err(Error::Divergence {
                step,
                what: "non-finite parameter after update".into(),
            });
        }
        if let Some(nu) = self.nu.iter().find(|v| !(v.exp() > 0.0 && v.exp().is_finite())) {
            return Err(Error::Divergence {
                step,
                what: format!("pole real part left the stable range (nu = {nu})"),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        Group::ALL
            .iter()
            .flat_map(|&g| self.group(g).iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySsmModel {
    channels: usize,
    states: usize,
    outputs: usize,
    seq_len: usize,
    dt: f64,
    train_beta: bool,
    train_skip: bool,
    grid: FrequencyGrid,
    pub params: ModelParams,
}

/// JSON checkpoint: the channel systems plus encoder, head and beta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub channels: Vec<DiagonalLti>,
    pub encoder: Vec<f64>,
    pub head: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub beta: f64,
    #[serde(default)]
    pub train_beta: bool,
    #[serde(default = "default_true")]
    pub train_skip: bool,
    pub seq_len: usize,
    pub dt: f64,
}

fn default_true() -> bool {
    true
}

/// Loss value and gradient of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGrad {
    pub loss: f64,
    pub grad: ModelParams,
}

impl ToySsmModel {
    /// HiPPO-initialized bank; channel `h` draws its residues from its own
    /// seed, the head from `N(0, 1/H^2)`.
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        if cfg.channels == 0 || cfg.outputs == 0 {
            return Err(Error::InvalidArgument(
                "channels and outputs must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut systems = Vec::with_capacity(cfg.channels);
        for _ in 0..cfg.channels {
            let seed: u64 = rng.random();
            let sys = if cfg.states == 0 {
                DiagonalLti::skip(0.0)
            } else {
                let s = hippo_alpha(&InitConfig::new(cfg.states, cfg.alpha, seed))?;
                let d = if cfg.skip { s.d() } else { 0.0 };
                DiagonalLti::new(s.x().to_vec(), s.y().to_vec(), s.xi().to_vec(), s.zeta().to_vec(), d)?
            };
            systems.push(sys);
        }
        let scale = 1.0 / cfg.channels as f64;
        let head = (0..cfg.channels)
            .map(|_| {
                (0..cfg.outputs)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Self::from_checkpoint(&Checkpoint {
            channels: systems,
            encoder: vec![1.0; cfg.channels],
            head,
            bias: vec![0.0; cfg.outputs],
            beta: cfg.beta,
            train_beta: cfg.train_beta,
            train_skip: cfg.skip,
            seq_len: cfg.seq_len,
            dt: cfg.dt,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let h = ck.channels.len();
        if h == 0 {
            return Err(Error::InvalidArgument("at least one channel is required".into()));
        }
        let n = ck.channels[0].n();
        if let Some(bad) = ck.channels.iter().find(|s| s.n() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: bad.n(),
            });
        }
        if ck.encoder.len() != h {
            return Err(Error::LengthMismatch {
                expected: h,
                got: ck.encoder.len(),
            });
        }
        if ck.head.len() != h {
            return Err(Error::LengthMismatch {
                expected: h,
                got: ck.head.len(),
            });
        }
        let k = ck.bias.len();
        if k == 0 {
            return Err(Error::InvalidArgument("at least one output is required".into()));
        }
        if let Some(row) = ck.head.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch {
                expected: k,
                got: row.len(),
            });
        }
        let grid = frequency_nodes(ck.seq_len, ck.dt)?;
        let mut p = ModelParams {
            nu: Vec::with_capacity(h * n),
            y: Vec::with_capacity(h * n),
            xi: Vec::with_capacity(h * n),
            zeta: Vec::with_capacity(h * n),
            d: Vec::with_capacity(h),
            encoder: ck.encoder.clone(),
            head: ck.head.iter().flatten().copied().collect(),
            bias: ck.bias.clone(),
            beta: vec![ck.beta],
        };
        for sys in &ck.channels {
            p.nu.extend(sys.x().iter().map(|x| (-x).ln()));
            p.y.extend_from_slice(sys.y());
            p.xi.extend_from_slice(sys.xi());
            p.zeta.extend_from_slice(sys.zeta());
            p.d.push(sys.d());
        }
        if !p.all_finite() {
            return Err(Error::InvalidArgument("non-finite model weight".into()));
        }
        Ok(ToySsmModel {
            channels: h,
            states: n,
            outputs: k,
            seq_len: ck.seq_len,
            dt: ck.dt,
            train_beta: ck.train_beta,
            train_skip: ck.train_skip,
            grid,
            params: p,
        })
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let k = self.outputs;
        Ok(Checkpoint {
            channels: (0..self.channels)
                .map(|h| self.channel(h))
                .collect::<Result<_>>()?,
            encoder: self.params.encoder.clone(),
            head: self.params.head.chunks(k).map(|r| r.to_vec()).collect(),
            bias: self.params.bias.clone(),
            beta: self.beta(),
            train_beta: self.train_beta,
            train_skip: self.train_skip,
            seq_len: self.seq_len,
            dt: self.dt,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn states(&self) -> usize {
        self.states
    }
    pub fn outputs(&self) -> usize {
        self.outputs
    }
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn beta(&self) -> f64 {
        self.params.beta[0]
    }
    pub fn train_beta(&self) -> bool {
        self.train_beta
    }
    pub fn set_train_beta(&mut self, on: bool) {
        self.train_beta = on;
    }
    pub fn train_skip(&self) -> bool {
        self.train_skip
    }
    pub fn set_train_skip(&mut self, on: bool) {
        self.train_skip = on;
    }
    /// Whether a group is updated by training.
    pub fn is_trainable(&self, g: Group) -> bool {
        match g {
            Group::Beta => self.train_beta,
            Group::D => self.train_skip,
            _ => true,
        }
    }
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// The real parts `x = -exp(nu)` of all poles.
    pub fn real_parts(&self) -> Vec<f64> {
        self.params.nu.iter().map(|v| -v.exp()).collect()
    }

    /// The system of channel `h`.
    pub fn channel(&self, h: usize) -> Result<DiagonalLti> {
        if h >= self.channels {
            return Err(Error::IndexOutOfRange {
                index: h,
                len: self.channels,
            });
        }
        let r = h * self.states..(h + 1) * self.states;
        let p = &self.params;
        DiagonalLti::new(
            p.nu[r.clone()].iter().map(|v| -v.exp()).collect(),
            p.y[r.clone()].to_vec(),
            p.xi[r.clone()].to_vec(),
            p.zeta[r].to_vec(),
            p.d[h],
        )
    }

    fn systems(&self) -> Result<Vec<DiagonalLti>> {
        (0..self.channels).map(|h| self.channel(h)).collect()
    }

    /// Multipliers `m_h(bin)` for every channel over a sorted bin list,
    /// stored `table[h * bins.len() + b]`.
    fn multiplier_table(&self, systems: &[DiagonalLti], bins: &[usize]) -> Vec<f64> {
        let beta = self.beta();
        let mut table = Vec::with_capacity(systems.len() * bins.len());
        for sys in systems {
            for &k in bins {
                table.push(node_multiplier(sys, beta, self.grid.node(k)));
            }
        }
        table
    }

    fn check_sample(&self, s: &SpectralSample, need_labels: bool) -> Result<()> {
        if let Some(&k) = s.bins.iter().find(|&&k| k >= self.seq_len) {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.seq_len,
            });
        }
        if need_labels && s.labels.len() != self.outputs {
            return Err(Error::LengthMismatch {
                expected: self.outputs,
                got: s.labels.len(),
            });
        }
        Ok(())
    }

    /// Pooled features `f_h` of one sample.
    fn features(&self, s: &SpectralSample, bins: &[usize], table: &[f64]) -> Vec<f64> {
        let nb = bins.len();
        let l2 = (self.seq_len as f64).powi(2);
        (0..self.channels)
            .map(|h| {
                let row = &table[h * nb..(h + 1) * nb];
                let energy: f64 = s
                    .bins
                    .iter()
                    .zip(&s.power)
                    .map(|(k, p)| {
                        let m = row[bins.binary_search(k).expect("bin in table")];
                        m * m * p
                    })
                    .sum();
                self.params.encoder[h].abs() * (energy / l2).sqrt()
            })
            .collect()
    }

    fn head_out(&self, feat: &[f64]) -> Vec<f64> {
        let k = self.outputs;
        let mut out = self.params.bias.clone();
        for (h, f) in feat.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(&self.params.head[h * k..(h + 1) * k]) {
                *o += w * f;
            }
        }
        out
    }

    /// Predictions for cached spectra.
    pub fn predict_spectral(&self, batch: &[SpectralSample], exec: Exec) -> Result<Vec<Vec<f64>>> {
        for s in batch {
            self.check_sample(s, false)?;
        }
        let bins = union_bins(batch.iter());
        let table = self.multiplier_table(&self.systems()?, &bins);
        Ok(exec.map_slice(batch, |s| self.head_out(&self.features(s, &bins, &table))))
    }

    /// Forward pass through the literal time-domain pipeline: filter each
    /// encoder-scaled copy of `u`, take the RMS over time, apply the head.
    pub fn forward(&self, u: &SequenceSignal) -> Result<Vec<f64>> {
        if u.len() != self.seq_len {
            return Err(Error::LengthMismatch {
                expected: self.seq_len,
                got: u.len(),
            });
        }
        let filter = SobolevFilter::new(self.beta())?;
        let mut feat = Vec::with_capacity(self.channels);
        for h in 0..self.channels {
            let e = self.params.encoder[h];
            let scaled = SequenceSignal::new(u.samples().iter().map(|v| e * v).collect(), u.dt())?;
            let y = apply(&self.channel(h)?, filter, &scaled);
            let ms = y.samples().iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
            feat.push(ms.sqrt());
        }
        Ok(self.head_out(&feat))
    }

    /// Batch MSE `mean_{b,k} (out_bk - a_bk)^2`.
    pub fn loss(&self, batch: &[SpectralSample], exec: Exec) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Precondition("batch is empty".into()));
        }
        for s in batch {
            self.check_sample(s, true)?;
        }
        let preds = self.predict_spectral(batch, exec)?;
        let count = (batch.len() * self.outputs) as f64;
        Ok(exec.sum(batch.len(), |b| {
            preds[b]
                .iter()
                .zip(&batch[b].labels)
                .map(|(o, a)| (o - a) * (o - a))
                .sum::<f64>()
                / count
        }))
    }

    /// Loss and analytic gradient of the batch MSE.
    ///
    /// Per sample the upstream gradient reaches each channel as a weight on
    /// `m_h(k)` for every active bin; these weights are summed over the batch
    /// and then chained once through the pole partials at the nodes.
    pub fn backward(&self, batch: &[&SpectralSample], exec: Exec) -> Result<BatchGrad> {
        if batch.is_empty() {
            return Err(Error::Precondition("batch is empty".into()));
        }
        for s in batch {
            self.check_sample(s, true)?;
        }
        let (hh, kk, n) = (self.channels, self.outputs, self.states);
        let systems = self.systems()?;
        let bins = union_bins(batch.iter().copied());
        let nb = bins.len();
        let table = self.multiplier_table(&systems, &bins);
        let l2 = (self.seq_len as f64).powi(2);
        let count = (batch.len() * kk) as f64;

        // [loss | head | bias | encoder | bin weights]
        let o_head = 1;
        let o_bias = o_head + hh * kk;
        let o_enc = o_bias + kk;
        let o_bin = o_enc + hh;
        let dim = o_bin + hh * nb;
        let acc = exec.sum_into(batch.len(), dim, |b, acc| {
            let s = batch[b];
            let feat = self.features(s, &bins, &table);
            let out = self.head_out(&feat);
            let mut delta = vec![0.0; kk];
            for k in 0..kk {
                let r = out[k] - s.labels[k];
                acc[0] += r * r / count;
                delta[k] = 2.0 * r / count;
                acc[o_bias + k] += delta[k];
            }
            for h in 0..hh {
                let w = &self.params.head[h * kk..(h + 1) * kk];
                let mut gf = 0.0;
                for k in 0..kk {
                    acc[o_head + h * kk + k] += delta[k] * feat[h];
                    gf += delta[k] * w[k];
                }
                if feat[h] <= 0.0 {
                    continue;
                }
                // f = |e| sqrt(E) / L with E = sum m^2 P
                let e = self.params.encoder[h];
                let ge = gf * feat[h] / e;
                acc[o_enc + h] += if e == 0.0 { 0.0 } else { ge };
                let gm = gf * e * e / (feat[h] * l2);
                let row = &table[h * nb..(h + 1) * nb];
                for (k, p) in s.bins.iter().zip(&s.power) {
                    let i = bins.binary_search(k).expect("bin in table");
                    acc[o_bin + h * nb + i] += gm * row[i] * p;
                }
            }
        });

        let mut grad = ModelParams::zeros_like(&self.params);
        grad.head.copy_from_slice(&acc[o_head..o_bias]);
        grad.bias.copy_from_slice(&acc[o_bias..o_enc]);
        grad.encoder.copy_from_slice(&acc[o_enc..o_bin]);
        let beta = self.beta();
        let mut gbeta = 0.0;
        for (h, sys) in systems.iter().enumerate() {
            let r = h * n..(h + 1) * n;
            let chain = ChannelGrad {
                nu: &mut grad.nu[r.clone()],
                y: &mut grad.y[r.clone()],
                xi: &mut grad.xi[r.clone()],
                zeta: &mut grad.zeta[r],
                d: &mut grad.d[h],
                beta: &mut gbeta,
            };
            let weights = &acc[o_bin + h * nb..o_bin + (h + 1) * nb];
            accumulate_channel(sys, beta, &self.grid, &bins, weights, chain);
        }
        if self.train_beta {
            grad.beta[0] = gbeta;
        }
        if !self.train_skip {
            grad.d.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(BatchGrad {
            loss: acc[0],
            grad,
        })
    }
}

/// Autoencoder view of a single-output model: the output sequence is
/// `sum_h W[h][0] e_h y_h`, a linear filter with per-bin response
/// `M(k) = sum_h W[h][0] e_h m_h(k)`. The bias is not used.
impl ToySsmModel {
    fn check_autoencoder(&self) -> Result<()> {
        if self.outputs != 1 {
            return Err(Error::Precondition(format!(
                "autoencoder use needs exactly one output, model has {}",
                self.outputs
            )));
        }
        Ok(())
    }

    /// `M(k)` at one bin.
    pub fn response(&self, bin: usize) -> Result<f64> {
        self.check_autoencoder()?;
        if bin >= self.seq_len {
            return Err(Error::IndexOutOfRange {
                index: bin,
                len: self.seq_len,
            });
        }
        let node = self.grid.node(bin);
        let mut acc = 0.0;
        for h in 0..self.channels {
            let m = node_multiplier(&self.channel(h)?, self.beta(), node);
            acc += self.params.head[h] * self.params.encoder[h] * m;
        }
        Ok(acc)
    }

    /// Output sequence through the literal pipeline.
    pub fn reconstruct(&self, u: &SequenceSignal) -> Result<SequenceSignal> {
        self.check_autoencoder()?;
        if u.len() != self.seq_len {
            return Err(Error::LengthMismatch {
                expected: self.seq_len,
                got: u.len(),
            });
        }
        let filter = SobolevFilter::new(self.beta())?;
        let mut out = vec![0.0; u.len()];
        for h in 0..self.channels {
            let e = self.params.encoder[h];
            let scaled = SequenceSignal::new(u.samples().iter().map(|v| e * v).collect(), u.dt())?;
            let y = apply(&self.channel(h)?, filter, &scaled);
            for (o, v) in out.iter_mut().zip(y.samples()) {
                *o += self.params.head[h] * v;
            }
        }
        SequenceSignal::new(out, u.dt())
    }

    /// Reconstruction loss `(1/L^2) sum_k (M(k) - 1)^2 P_k`, the mean
    /// squared reconstruction error of inputs with power spectrum `P`, and
    /// its gradient.
    pub fn reconstruction_grad(&self, bins: &[usize], power: &[f64]) -> Result<BatchGrad> {
        self.check_autoencoder()?;
        if bins.len() != power.len() {
            return Err(Error::LengthMismatch {
                expected: bins.len(),
                got: power.len(),
            });
        }
        if let Some(&k) = bins.iter().find(|&&k| k >= self.seq_len) {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.seq_len,
            });
        }
        let (hh, n, nb) = (self.channels, self.states, bins.len());
        let systems = self.systems()?;
        let table = self.multiplier_table(&systems, bins);
        let l2 = (self.seq_len as f64).powi(2);
        let mut loss = 0.0;
        // dL/dM(k)
        let mut gm = vec![0.0; nb];
        for b in 0..nb {
            let m: f64 = (0..hh)
                .map(|h| self.params.head[h] * self.params.encoder[h] * table[h * nb + b])
                .sum();
            loss += (m - 1.0).powi(2) * power[b] / l2;
            gm[b] = 2.0 * (m - 1.0) * power[b] / l2;
        }
        let mut grad = ModelParams::zeros_like(&self.params);
        let beta = self.beta();
        let mut gbeta = 0.0;
        for (h, sys) in systems.iter().enumerate() {
            let row = &table[h * nb..(h + 1) * nb];
            let (w, e) = (self.params.head[h], self.params.encoder[h]);
            let dot: f64 = gm.iter().zip(row).map(|(g, m)| g * m).sum();
            grad.head[h] = e * dot;
            grad.encoder[h] = w * dot;
            let weights: Vec<f64> = gm.iter().map(|g| g * w * e).collect();
            let r = h * n..(h + 1) * n;
            let chain = ChannelGrad {
                nu: &mut grad.nu[r.clone()],
                y: &mut grad.y[r.clone()],
                xi: &mut grad.xi[r.clone()],
                zeta: &mut grad.zeta[r],
                d: &mut grad.d[h],
                beta: &mut gbeta,
            };
            accumulate_channel(sys, beta, &self.grid, bins, &weights, chain);
        }
        if self.train_beta {
            grad.beta[0] = gbeta;
        }
        if !self.train_skip {
            grad.d.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(BatchGrad { loss, grad })
    }
}

struct ChannelGrad<'a> {
    nu: &'a mut [f64],
    y: &'a mut [f64],
    xi: &'a mut [f64],
    zeta: &'a mut [f64],
    d: &'a mut f64,
    beta: &'a mut f64,
}

/// Add `sum_b weights[b] * dm(bins[b])/dtheta` for one channel, with
/// `m = w(s) (G~(is) + G~(-is)) / 2`, `dx/dnu = x` and
/// `dm/dbeta = ln(1 + |s|) m`.
fn accumulate_channel(
    sys: &DiagonalLti,
    beta: f64,
    grid: &FrequencyGrid,
    bins: &[usize],
    weights: &[f64],
    out: ChannelGrad<'_>,
) {
    for (&k, &c) in bins.iter().zip(weights) {
        if c == 0.0 {
            continue;
        }
        let s = match grid.node(k) {
            FrequencyNode::Infinity => {
                *out.d += c;
                continue;
            }
            FrequencyNode::Finite(s) => s,
        };
        let w = sobolev_weight(beta, s);
        let cw = 0.5 * c * w;
        *out.d += c * w;
        *out.beta += c * (1.0 + s.abs()).ln() * node_multiplier(sys, beta, FrequencyNode::Finite(s));
        for j in 0..sys.n() {
            let (x, y, xi, zeta) = (sys.x()[j], sys.y()[j], sys.xi()[j], sys.zeta()[j]);
            let p = pole_partials(x, y, xi, zeta, s);
            let q = pole_partials(x, y, xi, zeta, -s);
            out.nu[j] += cw * (p.x + q.x) * x;
            out.y[j] += cw * (p.y + q.y);
            out.xi[j] += cw * (p.xi + q.xi);
            out.zeta[j] += cw * (p.zeta + q.zeta);
        }
    }
}

fn union_bins<'a>(samples: impl Iterator<Item = &'a SpectralSample>) -> Vec<usize> {
    let mut bins: Vec<usize> = samples.flat_map(|s| s.bins.iter().copied()).collect();
    bins.sort_unstable();
    bins.dedup();
    bins
}
