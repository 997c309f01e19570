//! Alpha-scaled HiPPO initialization, bilinear frequency nodes and the
//! discretization scaling laws for a single partial fraction.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::DiagonalLti;

/// Top fraction of Fourier nodes a pole frequency should stay below.
pub const DEFAULT_TOP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "default_real_part")]
    pub real_part: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_real_part() -> f64 {
    -0.5
}

impl InitConfig {
    pub fn new(n: usize, alpha: f64, seed: u64) -> Self {
        InitConfig {
            n,
            alpha,
            real_part: -0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.real_part < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "real part must be negative, got {}",
                self.real_part
            )));
        }
        Ok(())
    }
}

/// Imaginary part of the `j`-th (1-based) scaled HiPPO eigenvalue,
/// `(-1)^j floor(j/2) alpha pi`.
pub fn hippo_imag(j: usize, alpha: f64) -> f64 {
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (j / 2) as f64 * alpha * PI
}

/// Scaled HiPPO system: `a_j = real_part + i (-1)^j floor(j/2) alpha pi`
/// for `j = 1..=n`, with `xi`, `zeta` and `d` standard normal.
///
/// Draw order from a ChaCha8 stream seeded with `cfg.seed`: all `xi`, then
/// all `zeta`, then `d`.
pub fn hippo_alpha(cfg: &InitConfig) -> Result<DiagonalLti> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
    let xi = normal(cfg.n);
    let zeta = normal(cfg.n);
    let d = normal(1)[0];
    let x = vec![cfg.real_part; cfg.n];
    let y = (1..=cfg.n).map(|j| hippo_imag(j, cfg.alpha)).collect();
    DiagonalLti::new(x, y, xi, zeta, d)
}

/// A node of the bilinear frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrequencyNode {
    Finite(f64),
    /// The Nyquist bin of an even-length grid, mapped to `s = inf`.
    Infinity,
}

impl FrequencyNode {
    pub fn finite(self) -> Option<f64> {
        match self {
            FrequencyNode::Finite(s) => Some(s),
            FrequencyNode::Infinity => None,
        }
    }
}

/// Continuous frequencies seen by the DFT bins of a length-`L` sequence
/// sampled at `dt` under the bilinear transform:
/// `sigma_k = (2/dt) tan(pi k / L)` on the principal branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    seq_len: usize,
    dt: f64,
    nodes: Vec<FrequencyNode>,
}

impl FrequencyGrid {
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn nodes(&self) -> &[FrequencyNode] {
        &self.nodes
    }
    pub fn node(&self, k: usize) -> FrequencyNode {
        self.nodes[k]
    }

    /// Largest finite node.
    pub fn max_finite(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| n.finite())
            .fold(0.0, f64::max)
    }
}

/// Bilinear nodes for bins `k = 0..L`. Bins past `L/2` wrap to negative
/// frequencies, computed as `tan(pi (k - L) / L)` so that
/// `sigma_{L-k} = -sigma_k` holds exactly.
pub fn frequency_nodes(seq_len: usize, dt: f64) -> Result<FrequencyGrid> {
    if seq_len == 0 {
        return Err(Error::InvalidArgument("sequence length must be >= 1".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let l = seq_len as f64;
    let nodes = (0..seq_len)
        .map(|k| {
            if 2 * k == seq_len {
                FrequencyNode::Infinity
            } else if 2 * k < seq_len {
                FrequencyNode::Finite(2.0 / dt * (PI * k as f64 / l).tan())
            } else {
                let m = k as f64 - l;
                FrequencyNode::Finite(2.0 / dt * (PI * m / l).tan())
            }
        })
        .collect();
    Ok(FrequencyGrid {
        seq_len,
        dt,
        nodes,
    })
}

/// Norms of the sampled partial fraction `g_k = 1/(i sigma_k - a)` for one pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleNorms {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub g_norm_2: f64,
    pub g_norm_inf: f64,
    /// `|y| dt / ||g||_2`.
    pub rule1_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub pole_index: usize,
    pub seq_len: usize,
    pub dt: f64,
    pub g_norm_2: f64,
    pub g_norm_inf: f64,
    /// `|y| dt / ||g||_2` for the selected pole.
    pub rule1_ratio: f64,
    /// `1 / (1 + ||y| - (2/dt) tan(pi/(2L))|)`, the sup-norm comparison term.
    pub linf_expression: f64,
    /// Closed-form upper envelope on `||g||_inf`, see [`linf_envelope`].
    pub linf_envelope: f64,
    pub rule2_alpha_max: f64,
    /// Alpha cap keeping all poles below the top 5% of Fourier nodes.
    pub aliasing_alpha_max: f64,
    pub poles: Vec<PoleNorms>,
}

fn pole_norms(index: usize, a: Complex64, grid: &FrequencyGrid) -> PoleNorms {
    let mut sq = 0.0;
    let mut sup: f64 = 0.0;
    for node in grid.nodes() {
        if let FrequencyNode::Finite(s) = *node {
            let m2 = 1.0 / (a.re * a.re + (s - a.im) * (s - a.im));
            sq += m2;
            sup = sup.max(m2);
        }
    }
    let g2 = sq.sqrt();
    PoleNorms {
        index,
        x: a.re,
        y: a.im,
        g_norm_2: g2,
        g_norm_inf: sup.sqrt(),
        rule1_ratio: a.im.abs() * grid.dt() / g2,
    }
}

/// Upper envelope on `||g||_inf` for a single pole: once `|y|` exceeds the
/// largest node `(2/dt) tan(pi (L-1)/(2L))`, the nearest node is that one and
/// `||g||_inf <= 1/sqrt(x^2 + (|y| - top)^2)`; otherwise `1/|x|`.
pub fn linf_envelope(x: f64, y: f64, seq_len: usize, dt: f64) -> f64 {
    let l = seq_len as f64;
    let top = 2.0 / dt * (PI * (l - 1.0) / (2.0 * l)).tan();
    if y.abs() > top {
        1.0 / (x * x + (y.abs() - top).powi(2)).sqrt()
    } else {
        1.0 / x.abs()
    }
}

pub fn linf_expression(y: f64, seq_len: usize, dt: f64) -> f64 {
    let l = seq_len as f64;
    let edge = 2.0 / dt * (PI / (2.0 * l)).tan();
    1.0 / (1.0 + (y.abs() - edge).abs())
}

pub fn scaling_report(
    pole_index: usize,
    sys: &DiagonalLti,
    grid: &FrequencyGrid,
) -> Result<ScalingReport> {
    sys.check_index(pole_index)?;
    let poles: Vec<PoleNorms> = (0..sys.n())
        .map(|j| pole_norms(j, sys.pole(j), grid))
        .collect();
    let sel = &poles[pole_index];
    let (l, dt) = (grid.seq_len(), grid.dt());
    Ok(ScalingReport {
        pole_index,
        seq_len: l,
        dt,
        g_norm_2: sel.g_norm_2,
        g_norm_inf: sel.g_norm_inf,
        rule1_ratio: sel.rule1_ratio,
        linf_expression: linf_expression(sel.y, l, dt),
        linf_envelope: linf_envelope(sel.x, sel.y, l, dt),
        rule2_alpha_max: rule2_alpha_max(sys.n(), l, dt)?,
        aliasing_alpha_max: rule1_alpha_guideline(sys.n(), dt, DEFAULT_TOP_FRACTION)?,
        poles,
    })
}

/// Norms for a bare pole `a = x + iy`.
pub fn single_pole_norms(x: f64, y: f64, grid: &FrequencyGrid) -> PoleNorms {
    pole_norms(0, Complex64::new(x, y), grid)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

/// Largest alpha that keeps the HiPPO poles resolvable on the grid:
/// `4 tan(pi/(2L)) / (n pi dt)`.
pub fn rule2_alpha_max(n: usize, seq_len: usize, dt: f64) -> Result<f64> {
    check_positive("n", n as f64)?;
    check_positive("sequence length", seq_len as f64)?;
    check_positive("dt", dt)?;
    let l = seq_len as f64;
    Ok(4.0 * (PI / (2.0 * l)).tan() / (n as f64 * PI * dt))
}

/// Largest `Im(a)` below the top `top_fraction` of Fourier nodes:
/// `(4/dt) tan(pi (1 - top_fraction) / 2)`.
pub fn imag_cap(dt: f64, top_fraction: f64) -> Result<f64> {
    check_positive("dt", dt)?;
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "top fraction must lie in (0, 1), got {top_fraction}"
        )));
    }
    Ok(4.0 / dt * (PI * (1.0 - top_fraction) / 2.0).tan())
}

/// [`imag_cap`] turned into an alpha cap, using `max_j |y_j| ~ n pi alpha / 2`:
/// `(8 / (n pi dt)) tan(pi (1 - top_fraction) / 2)`.
pub fn rule1_alpha_guideline(n: usize, dt: f64, top_fraction: f64) -> Result<f64> {
    check_positive("n", n as f64)?;
    Ok(2.0 * imag_cap(dt, top_fraction)? / (n as f64 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hippo_poles_match_formula() {
        let sys = hippo_alpha(&InitConfig::new(1, 1.0, 0)).unwrap();
        assert_eq!(sys.pole(0), Complex64::new(-0.5, 0.0));
        let sys = hippo_alpha(&InitConfig::new(2, 1.0, 0)).unwrap();
        assert_eq!(sys.pole(1), Complex64::new(-0.5, PI));
        let sys = hippo_alpha(&InitConfig::new(3, 2.0, 0)).unwrap();
        assert_eq!(sys.pole(2), Complex64::new(-0.5, -2.0 * PI));
    }

    #[test]
    fn hippo_conjugate_pairs_and_max() {
        for n in [1, 2, 5, 8, 33] {
            let alpha = 1.7;
            let sys = hippo_alpha(&InitConfig::new(n, alpha, 1)).unwrap();
            let y = sys.y();
            let mut k = 1;
            while 2 * k < n {
                assert_eq!(y[2 * k - 1], -y[2 * k]);
                k += 1;
            }
            assert_eq!(sys.max_abs_y(), (n / 2) as f64 * alpha * PI);
        }
    }

    #[test]
    fn hippo_is_seed_deterministic() {
        let cfg = InitConfig::new(16, 3.0, 42);
        let a = hippo_alpha(&cfg).unwrap();
        let b = hippo_alpha(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = hippo_alpha(&InitConfig::new(16, 3.0, 43)).unwrap();
        assert_ne!(a.xi(), c.xi());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(hippo_alpha(&InitConfig::new(0, 1.0, 0)).is_err());
        assert!(hippo_alpha(&InitConfig::new(4, 0.0, 0)).is_err());
        let mut cfg = InitConfig::new(4, 1.0, 0);
        cfg.real_part = 0.1;
        assert!(hippo_alpha(&cfg).is_err());
    }

    #[test]
    fn node_examples() {
        for (l, dt) in [(1, 1.0), (7, 0.3), (8, 2.0)] {
            let g = frequency_nodes(l, dt).unwrap();
            assert_eq!(g.node(0), FrequencyNode::Finite(0.0));
        }
        let g = frequency_nodes(4, 1.0).unwrap();
        assert_relative_eq!(g.node(1).finite().unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(g.node(2), FrequencyNode::Infinity);
        assert_relative_eq!(g.node(3).finite().unwrap(), -2.0, epsilon = 1e-15);
    }

    #[test]
    fn nodes_are_odd_symmetric() {
        for l in [5, 6, 101, 128] {
            let g = frequency_nodes(l, 0.01).unwrap();
            for k in 1..l {
                match (g.node(k), g.node(l - k)) {
                    (FrequencyNode::Finite(a), FrequencyNode::Finite(b)) => assert_eq!(a, -b),
                    (FrequencyNode::Infinity, FrequencyNode::Infinity) => assert_eq!(2 * k, l),
                    other => panic!("asymmetric pair {other:?}"),
                }
            }
        }
    }

    #[test]
    fn odd_length_grid_has_no_infinity_node() {
        let g = frequency_nodes(101, 0.01).unwrap();
        assert_relative_eq!(g.max_finite(), 200.0 * (50.0 * PI / 101.0).tan(), max_relative = 1e-14);
        assert!(g.nodes().iter().all(|n| n.finite().is_some()));
    }

    #[test]
    fn report_for_unit_pole() {
        let sys = DiagonalLti::single(-1.0, 0.0, 1.0, 0.0).unwrap();
        let grid = frequency_nodes(3, 1.0).unwrap();
        let r = scaling_report(0, &sys, &grid).unwrap();
        assert_relative_eq!(r.g_norm_inf, 1.0);
        let s2 = 2.0 * (PI / 3.0).tan();
        let want = (1.0 + 2.0 / (1.0 + s2 * s2)).sqrt();
        assert_relative_eq!(r.g_norm_2, want, epsilon = 1e-15);
        assert_eq!(r.rule1_ratio, 0.0);
        assert!(scaling_report(1, &sys, &grid).is_err());
    }

    #[test]
    fn infinite_node_contributes_nothing() {
        let odd = frequency_nodes(4, 1.0).unwrap();
        let n = single_pole_norms(-1.0, 0.5, &odd);
        let finite: f64 = [0.0, 2.0, -2.0]
            .iter()
            .map(|s: &f64| 1.0 / (1.0 + (s - 0.5).powi(2)))
            .sum();
        assert_relative_eq!(n.g_norm_2, finite.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn sup_norm_below_envelope_past_the_top_node() {
        for &(l, dt) in &[(101usize, 0.01), (64, 0.1), (1001, 1.0)] {
            let grid = frequency_nodes(l, dt).unwrap();
            let top = 2.0 / dt * (PI * (l as f64 - 1.0) / (2.0 * l as f64)).tan();
            for &y in &[1.01 * top, 2.0 * top, 1e3 * top, -3.0 * top] {
                let n = single_pole_norms(-0.5, y, &grid);
                let env = linf_envelope(-0.5, y, l, dt);
                assert!(n.g_norm_inf <= env * (1.0 + 1e-12), "{} > {}", n.g_norm_inf, env);
            }
        }
    }

    #[test]
    fn rule2_values() {
        let want = 4.0 * (PI / 202.0).tan() / (0.1 * PI);
        assert_relative_eq!(rule2_alpha_max(10, 101, 0.01).unwrap(), want, epsilon = 1e-15);
        let a = rule2_alpha_max(3, 1000, 0.05).unwrap();
        let b = rule2_alpha_max(6, 1000, 0.05).unwrap();
        assert_relative_eq!(a, 2.0 * b, epsilon = 1e-15);
        let big = rule2_alpha_max(4, 1_000_000, 0.001).unwrap();
        assert_relative_eq!(big, 2.0 / (4.0 * 1e6 * 0.001), max_relative = 1e-10);
    }

    #[test]
    fn rule1_values() {
        let dt = 0.001;
        assert_relative_eq!(imag_cap(dt, 0.05).unwrap() * dt, 50.82, max_relative = 1e-4);
        assert_relative_eq!(imag_cap(dt, 0.5).unwrap() * dt, 4.0, epsilon = 1e-12);
        let cap = rule1_alpha_guideline(64, dt, 0.05).unwrap();
        let want = 2.0 * (4.0 / dt * (0.475 * PI).tan()) / (64.0 * PI);
        assert_relative_eq!(cap, want, epsilon = 1e-12);
        assert!(rule1_alpha_guideline(64, dt, 1.0).is_err());
    }
}
