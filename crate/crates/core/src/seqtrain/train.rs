//! Mini-batch training loop and its log.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{spectral_dataset, SpectralSample, WaveSample};
use super::model::{ModelParams, ToySsmModel};
use super::optim::{LearningRates, Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub rates: LearningRates,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            rates: LearningRates::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        self.rates.validate()
    }
}

/// Dataset metrics after an epoch; epoch 0 is the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean `|a_k - a~_k|` per label over the dataset.
    pub label_errors: Vec<f64>,
    pub loss: f64,
}

/// Relative change `|theta0 - theta_final| / |theta0|` per parameter group
/// (absolute change when `theta0 = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDeltas {
    /// Real parts `x` of the poles.
    pub re_a: f64,
    /// Imaginary parts `y` of the poles.
    pub im_a: f64,
    /// Residues `xi` and `zeta` together.
    pub residue: f64,
    pub skip: f64,
    pub encoder: f64,
    pub head: f64,
    pub beta: f64,
}

impl GroupDeltas {
    pub fn between(model0: &ToySsmModel, model1: &ToySsmModel) -> Self {
        let (p0, p1) = (&model0.params, &model1.params);
        let cat = |p: &ModelParams| [p.xi.clone(), p.zeta.clone()].concat();
        let head = |p: &ModelParams| [p.head.clone(), p.bias.clone()].concat();
        GroupDeltas {
            re_a: rel_change(&model0.real_parts(), &model1.real_parts()),
            im_a: rel_change(&p0.y, &p1.y),
            residue: rel_change(&cat(p0), &cat(p1)),
            skip: rel_change(&p0.d, &p1.d),
            encoder: rel_change(&p0.encoder, &p1.encoder),
            head: rel_change(&head(p0), &head(p1)),
            beta: rel_change(&p0.beta, &p1.beta),
        }
    }
}

fn rel_change(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|t| t * t).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let base = norm(&mut a.iter().copied());
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub deltas: GroupDeltas,
}

impl TrainLog {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("log always holds the initial record")
    }
}

/// Mean absolute error per label and the MSE over a dataset.
pub fn evaluate(model: &ToySsmModel, data: &[SpectralSample], exec: Exec) -> Result<(Vec<f64>, f64)> {
    let k = model.outputs();
    if data.is_empty() {
        return Ok((vec![0.0; k], 0.0));
    }
    let preds = model.predict_spectral(data, exec)?;
    let nb = data.len() as f64;
    let acc = exec.sum_into(data.len(), k + 1, |b, acc| {
        for (i, (o, a)) in preds[b].iter().zip(&data[b].labels).enumerate() {
            acc[i] += (o - a).abs() / nb;
            acc[k] += (o - a) * (o - a) / (nb * k as f64);
        }
    });
    Ok((acc[..k].to_vec(), acc[k]))
}

/// Train on time-domain samples (spectra are computed once up front).
pub fn train(
    model: &mut ToySsmModel,
    data: &[WaveSample],
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainLog> {
    if let Some(bad) = data.iter().find(|s| s.input.len() != model.seq_len()) {
        return Err(Error::LengthMismatch {
            expected: model.seq_len(),
            got: bad.input.len(),
        });
    }
    let spectra = spectral_dataset(data, exec)?;
    train_spectral(model, &spectra, cfg, exec)
}

/// Train on cached spectra. Epoch `e` shuffles with a generator seeded by
/// `(seed, e)`, so runs are bit-identical for a fixed config.
pub fn train_spectral(
    model: &mut ToySsmModel,
    data: &[SpectralSample],
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Precondition("dataset is empty".into()));
    }
    let start = model.clone();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.rates, &model.params);
    let (err0, loss0) = evaluate(model, data, exec)?;
    let mut records = vec![EpochRecord {
        epoch: 0,
        label_errors: err0,
        loss: loss0,
    }];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SpectralSample> = chunk.iter().map(|&i| &data[i]).collect();
            let bg = model.backward(&batch, exec)?;
            if !bg.loss.is_finite() || !bg.grad.all_finite() {
                return Err(Error::Divergence {
                    step: epoch,
                    what: format!("non-finite batch loss {}", bg.loss),
                });
            }
            let mut next = model.params.clone();
            opt.step(&mut next, &bg.grad, |g| model.is_trainable(g));
            next.check_update(epoch)?;
            model.params = next;
        }
        let (err, loss) = evaluate(model, data, exec)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: epoch,
                what: format!("non-finite epoch loss {loss}"),
            });
        }
        records.push(EpochRecord {
            epoch,
            label_errors: err,
            loss,
        });
    }
    Ok(TrainLog {
        records,
        deltas: GroupDeltas::between(&start, model),
    })
}
