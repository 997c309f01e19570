//! SGD and Adam with a slow learning rate for the state-matrix groups.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use super::model::{Group, ModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// `fast` drives the residues, skip, encoder and head; `slow` drives
/// `nu`, `y` and `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub fast: f64,
    pub slow: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            fast: 1e-2,
            slow: 1e-3,
        }
    }
}

impl LearningRates {
    pub fn for_group(&self, g: Group) -> f64 {
        match g {
            Group::Nu | Group::Y | Group::Beta => self.slow,
            _ => self.fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fast >= 0.0 && self.slow >= 0.0) || !self.fast.is_finite() || !self.slow.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rates must be finite and non-negative, got {} / {}",
                self.fast, self.slow
            )));
        }
        Ok(())
    }
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    rates: LearningRates,
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, rates: LearningRates, like: &ModelParams) -> Self {
        Optimizer {
            kind,
            rates,
            m: ModelParams::zeros_like(like),
            v: ModelParams::zeros_like(like),
            t: 0,
        }
    }

    /// One update of every group for which `trainable` holds.
    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, trainable: impl Fn(Group) -> bool) {
        self.t += 1;
        let c1 = 1.0 - ADAM_B1.powi(self.t);
        let c2 = 1.0 - ADAM_B2.powi(self.t);
        for g in Group::ALL {
            if !trainable(g) {
                continue;
            }
            let lr = self.rates.for_group(g);
            if lr == 0.0 {
                continue;
            }
            let p = params.group_mut(g);
            let dg = grad.group(g);
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, d) in p.iter_mut().zip(dg) {
                        *p -= lr * d;
                    }
                }
                OptimizerKind::Adam => {
                    let m = self.m.group_mut(g);
                    let v = self.v.group_mut(g);
                    for i in 0..p.len() {
                        m[i] = ADAM_B1 * m[i] + (1.0 - ADAM_B1) * dg[i];
                        v[i] = ADAM_B2 * v[i] + (1.0 - ADAM_B2) * dg[i] * dg[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(v: f64) -> ModelParams {
        ModelParams {
            nu: vec![v; 2],
            y: vec![v; 2],
            xi: vec![v; 2],
            zeta: vec![v; 2],
            d: vec![v],
            encoder: vec![v],
            head: vec![v; 3],
            bias: vec![v; 3],
            beta: vec![v],
        }
    }

    #[test]
    fn sgd_uses_group_rates() {
        let mut p = params(1.0);
        let g = params(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, LearningRates { fast: 0.1, slow: 0.01 }, &p);
        opt.step(&mut p, &g, |g| g != Group::Beta);
        assert_eq!(p.xi[0], 0.9);
        assert_eq!(p.y[0], 0.99);
        assert_eq!(p.nu[0], 0.99);
        assert_eq!(p.beta[0], 1.0);
        opt.step(&mut p, &g, |_| true);
        assert_eq!(p.beta[0], 0.99);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut p = params(0.0);
        let mut g = params(3.0);
        g.head = vec![-5.0; 3];
        let mut opt = Optimizer::new(OptimizerKind::Adam, LearningRates::default(), &p);
        opt.step(&mut p, &g, |g| g != Group::Beta);
        assert!((p.xi[0] + 1e-2).abs() < 1e-9);
        assert!((p.head[0] - 1e-2).abs() < 1e-9);
        assert!((p.y[0] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn zero_rate_leaves_params() {
        let mut p = params(0.7);
        let g = params(2.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, LearningRates { fast: 0.0, slow: 0.0 }, &p);
        opt.step(&mut p, &g, |_| true);
        assert_eq!(p, params(0.7));
    }

    #[test]
    fn parses_kind() {
        assert_eq!("adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert_eq!("SGD".parse::<OptimizerKind>().unwrap(), OptimizerKind::Sgd);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
