//! Wave-superposition datasets and their cached power spectra.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectral::{SequenceSignal, SpectralPlan};

/// One input `sum_k a_k cos(f_k t dt)` with its amplitudes as labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSample {
    pub input: SequenceSignal,
    pub labels: Vec<f64>,
}

pub fn make_wave_dataset(
    count: usize,
    seq_len: usize,
    dt: f64,
    freqs: &[f64],
    amp_range: [f64; 2],
    seed: u64,
) -> Result<Vec<WaveSample>> {
    if seq_len == 0 || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need seq_len >= 1 and dt > 0, got {seq_len}, {dt}"
        )));
    }
    if freqs.is_empty() {
        return Err(Error::InvalidArgument("at least one frequency is required".into()));
    }
    let nyquist = PI / dt;
    if let Some(&f) = freqs.iter().find(|&&f| !(f.abs() < nyquist)) {
        return Err(Error::Precondition(format!(
            "frequency {f} is at or above the Nyquist frequency {nyquist}"
        )));
    }
    let [lo, hi] = amp_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad amplitude range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let labels: Vec<f64> = freqs
            .iter()
            .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
            .collect();
        let samples = (0..seq_len)
            .map(|t| {
                let tt = t as f64 * dt;
                freqs.iter().zip(&labels).map(|(f, a)| a * (f * tt).cos()).sum()
            })
            .collect();
        out.push(WaveSample {
            input: SequenceSignal::new(samples, dt)?,
            labels,
        });
    }
    Ok(out)
}

/// The power spectrum `|U_k|^2` of an input, restricted to the bins that
/// carry energy, plus its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub bins: Vec<usize>,
    pub power: Vec<f64>,
    pub labels: Vec<f64>,
}

/// Bins below this fraction of the total power are dropped.
pub const POWER_FLOOR: f64 = 1e-24;

impl SpectralSample {
    pub fn from_signal(plan: &SpectralPlan, u: &[f64], labels: Vec<f64>) -> Self {
        let spec = plan.forward(u);
        let power: Vec<f64> = spec.iter().map(|v| v.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        let (mut bins, mut kept) = (Vec::new(), Vec::new());
        for (k, &p) in power.iter().enumerate() {
            if p > POWER_FLOOR * total {
                bins.push(k);
                kept.push(p);
            }
        }
        SpectralSample {
            bins,
            power: kept,
            labels,
        }
    }
}

pub fn spectral_dataset(data: &[WaveSample], exec: Exec) -> Result<Vec<SpectralSample>> {
    let Some(first) = data.first() else {
        return Ok(Vec::new());
    };
    let len = first.input.len();
    if let Some(bad) = data.iter().find(|s| s.input.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            got: bad.input.len(),
        });
    }
    let plan = SpectralPlan::new(len);
    Ok(exec.map_slice(data, |s| {
        SpectralSample::from_signal(&plan, s.input.samples(), s.labels.clone())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waves_land_on_integer_bins() {
        let l = 4096;
        let dt = 2.0 * PI / l as f64;
        let data = make_wave_dataset(3, l, dt, &[1.0, 16.0, 256.0], [0.5, 1.5], 1).unwrap();
        let spec = spectral_dataset(&data, Exec::Serial).unwrap();
        for s in &spec {
            assert_eq!(s.bins, vec![1, 16, 256, l - 256, l - 16, l - 1]);
        }
        // |U_f|^2 = (L a / 2)^2
        let a = data[0].labels[1];
        let p = spec[0].power[1];
        assert!((p - (l as f64 * a / 2.0).powi(2)).abs() < 1e-8 * p);
    }

    #[test]
    fn zero_amplitudes_give_zero_signals() {
        let data = make_wave_dataset(4, 64, 0.1, &[1.0, 2.0], [0.0, 0.0], 9).unwrap();
        for s in &data {
            assert!(s.input.samples().iter().all(|&v| v == 0.0));
            assert!(s.labels.iter().all(|&v| v == 0.0));
        }
        let spec = spectral_dataset(&data, Exec::Serial).unwrap();
        assert!(spec[0].bins.is_empty());
    }

    #[test]
    fn rejects_aliased_frequencies() {
        let dt = 0.1;
        let nyq = PI / dt;
        assert!(matches!(
            make_wave_dataset(1, 16, dt, &[1.0, nyq], [0.0, 1.0], 0),
            Err(Error::Precondition(_))
        ));
        assert!(make_wave_dataset(1, 16, dt, &[1.0, 0.99 * nyq], [0.0, 1.0], 0).is_ok());
    }

    #[test]
    fn label_mean_matches_uniform_midpoint() {
        let data = make_wave_dataset(4000, 8, 0.1, &[1.0], [2.0, 4.0], 5).unwrap();
        let n = data.len() as f64;
        let mean = data.iter().map(|s| s.labels[0]).sum::<f64>() / n;
        let se = (4.0f64 / 12.0).sqrt() / n.sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn deterministic_under_seed() {
        let a = make_wave_dataset(5, 32, 0.1, &[1.0, 3.0], [0.0, 1.0], 42).unwrap();
        let b = make_wave_dataset(5, 32, 0.1, &[1.0, 3.0], [0.0, 1.0], 42).unwrap();
        let c = make_wave_dataset(5, 32, 0.1, &[1.0, 3.0], [0.0, 1.0], 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
