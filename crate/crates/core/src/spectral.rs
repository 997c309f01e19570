//! The transform-multiply-inverse pipeline `y = iFFT(FFT(u) * m)`.
//!
//! The multiplier at bin `k` is the even part of the filtered real transfer
//! function at the bilinear node `sigma_k`:
//!
//! `m_k = (G~b(i sigma_k) + G~b(-i sigma_k)) / 2`,  `G~b = (1+|s|)^beta G~`.
//!
//! `G~` itself is real but not even in `s`, so multiplying by it directly
//! gives a complex output; its real part is exactly the output of the even
//! part above, which is what is returned. The Nyquist bin of an even-length
//! sequence sits at `s = inf`, where every partial fraction vanishes and the
//! multiplier is `d`.
//!
//! Transform convention: forward unnormalized, inverse scaled by `1/L`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{frequency_nodes, FrequencyGrid, FrequencyNode};
use crate::transfer::DiagonalLti;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSignal {
    samples: Vec<f64>,
    dt: f64,
}

impl SequenceSignal {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal must have at least one sample".into()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        Ok(SequenceSignal { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevFilter {
    pub beta: f64,
}

impl SobolevFilter {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be finite".into()));
        }
        Ok(SobolevFilter { beta })
    }

    pub fn identity() -> Self {
        SobolevFilter { beta: 0.0 }
    }
}

/// Even part of `G~^(beta)` at one node.
pub fn node_multiplier(sys: &DiagonalLti, beta: f64, node: FrequencyNode) -> f64 {
    match node {
        FrequencyNode::Infinity => sys.d(),
        FrequencyNode::Finite(0.0) => sys.eval_sobolev(beta, 0.0),
        FrequencyNode::Finite(s) => 0.5 * (sys.eval_sobolev(beta, s) + sys.eval_sobolev(beta, -s)),
    }
}

/// Per-bin multiplier over a whole grid.
pub fn multiplier(sys: &DiagonalLti, filter: SobolevFilter, grid: &FrequencyGrid) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|&node| node_multiplier(sys, filter.beta, node))
        .collect()
}

/// Cached forward/inverse FFT plans for one length. Immutable and `Sync`.
#[derive(Clone)]
pub struct SpectralPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("len", &self.len).finish()
    }
}

impl SpectralPlan {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        SpectralPlan {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward DFT of a real sequence.
    pub fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        assert_eq!(u.len(), self.len);
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse DFT including the `1/L` factor.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        assert_eq!(spec.len(), self.len);
        self.inverse.process(&mut spec);
        let scale = 1.0 / self.len as f64;
        for v in spec.iter_mut() {
            *v *= scale;
        }
        spec
    }

    /// `iFFT(FFT(u) * m)`, returning the real part and the largest imaginary
    /// residue.
    pub fn filter(&self, u: &[f64], mult: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(mult.len(), self.len);
        let mut spec = self.forward(u);
        for (v, m) in spec.iter_mut().zip(mult) {
            *v *= *m;
        }
        let out = self.inverse(spec);
        let resid = out.iter().fold(0.0f64, |a, v| a.max(v.im.abs()));
        (out.iter().map(|v| v.re).collect(), resid)
    }
}

/// Run a signal through the (optionally Sobolev-filtered) system.
pub fn apply(sys: &DiagonalLti, filter: SobolevFilter, u: &SequenceSignal) -> SequenceSignal {
    let grid = frequency_nodes(u.len(), u.dt()).expect("signal invariants guarantee a valid grid");
    let mult = multiplier(sys, filter, &grid);
    let plan = SpectralPlan::new(u.len());
    let (out, resid) = plan.filter(u.samples(), &mult);
    debug_assert!(
        resid <= 1e-9 * u.samples().iter().fold(1.0f64, |a, v| a.max(v.abs())),
        "imaginary residue {resid}"
    );
    SequenceSignal {
        samples: out,
        dt: u.dt(),
    }
}

/// Output/input amplitude ratio of a sinusoid at `freq_bin`, i.e. `|m_k|`.
pub fn pass_rate(
    sys: &DiagonalLti,
    filter: SobolevFilter,
    freq_bin: usize,
    seq_len: usize,
    dt: f64,
) -> Result<f64> {
    if freq_bin >= seq_len {
        return Err(Error::IndexOutOfRange {
            index: freq_bin,
            len: seq_len,
        });
    }
    let grid = frequency_nodes(seq_len, dt)?;
    Ok(node_multiplier(sys, filter.beta, grid.node(freq_bin)).abs())
}
