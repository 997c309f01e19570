//! Toy sequence model: encoder, a bank of diagonal LTI channels applied
//! through the spectral pipeline, RMS pooling over time and a linear head,
//! with analytic gradients, a training loop and the stripe pass-rate study.

mod data;
mod model;
mod optim;
mod stripes;
mod train;

pub use data::{make_wave_dataset, spectral_dataset, SpectralSample, WaveSample, POWER_FLOOR};
pub use model::{BatchGrad, Checkpoint, Group, ModelConfig, ModelParams, ToySsmModel};
pub use optim::{LearningRates, Optimizer, OptimizerKind};
pub use stripes::*;
pub use train::{evaluate, train, train_spectral, EpochRecord, GroupDeltas, TrainConfig, TrainLog};
