//! Gradient flow of a one-pole LTI system against a bimodal target.
//!
//! The trainable system is `G~(is) = xi / (1 + (s - y)^2)` (pole `-1 + iy`,
//! `zeta = 0`) and the loss is the weighted quadrature norm
//!
//! `L(y, xi) = sum_i w_i (1+|s_i|)^(2 beta) (F~(s_i) - G~(s_i))^2`.
//!
//! The flow is stiff: near a mode the Hessian of `L` reaches `1e8` under the
//! `beta = 2` weight, while far-field `y` velocities are `O(1e-6)`, so the
//! outcomes are only separated at flow times of `1e6` and beyond. It is
//! integrated with the linearly implicit two-stage Rosenbrock scheme ROS2,
//! using the analytic Hessian with negative curvature clamped to zero. The
//! step adapts to the embedded error estimate, `|dy|` per step is capped and
//! every accepted step must not increase the loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grad::QuadratureSpec;
use crate::transfer::{sobolev_weight, DiagonalLti};

/// Fixed real part of the trainable pole.
pub const POLE_X: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub x: f64,
    pub y: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IllustrativeTarget {
    pub modes: Vec<Mode>,
    pub noise_amp: f64,
    pub noise_freq: f64,
    pub noise_support: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Main,
    #[serde(rename = "appendixD")]
    AppendixD,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(Variant::Main),
            "appendixD" | "appendixd" => Ok(Variant::AppendixD),
            other => Err(Error::InvalidArgument(format!("unknown target variant {other:?}"))),
        }
    }
}

pub fn illustrative_target(variant: Variant) -> IllustrativeTarget {
    let two_pi = 2.0 * std::f64::consts::PI;
    match variant {
        Variant::Main => IllustrativeTarget {
            modes: vec![
                Mode { x: -1.0, y: -50.0, xi: 5.0 },
                Mode { x: -1.0, y: 50.0, xi: 0.2 },
            ],
            noise_amp: 0.01,
            noise_freq: 9.0 / 4.0,
            noise_support: [-two_pi, two_pi],
        },
        Variant::AppendixD => IllustrativeTarget {
            modes: vec![
                Mode { x: -1.0, y: -75.0, xi: 5.0 },
                Mode { x: -1.0, y: 25.0, xi: 0.2 },
            ],
            noise_amp: 0.0,
            noise_freq: 0.0,
            noise_support: [0.0, 0.0],
        },
    }
}

impl IllustrativeTarget {
    pub fn new(
        modes: Vec<Mode>,
        noise_amp: f64,
        noise_freq: f64,
        noise_support: [f64; 2],
    ) -> Result<Self> {
        if modes.len() < 2 {
            return Err(Error::InvalidArgument("a target needs at least two modes".into()));
        }
        if modes.iter().any(|m| !(m.x < 0.0) || !m.y.is_finite() || !m.xi.is_finite()) {
            return Err(Error::InvalidSystem("target modes need x < 0 and finite y, xi".into()));
        }
        if noise_support[0] > noise_support[1] {
            return Err(Error::InvalidArgument("noise support must satisfy lo <= hi".into()));
        }
        Ok(IllustrativeTarget {
            modes,
            noise_amp,
            noise_freq,
            noise_support,
        })
    }

    /// `F~(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        let modes: f64 = self
            .modes
            .iter()
            .map(|m| {
                let t = s - m.y;
                -m.xi * m.x / (m.x * m.x + t * t)
            })
            .sum();
        let [lo, hi] = self.noise_support;
        let noise = if self.noise_amp != 0.0 && s >= lo && s <= hi {
            self.noise_amp * (self.noise_freq * s).cos()
        } else {
            0.0
        };
        modes + noise
    }

    /// The noise-free part as a diagonal system.
    pub fn modes_system(&self) -> DiagonalLti {
        DiagonalLti::new(
            self.modes.iter().map(|m| m.x).collect(),
            self.modes.iter().map(|m| m.y).collect(),
            self.modes.iter().map(|m| m.xi).collect(),
            vec![0.0; self.modes.len()],
            0.0,
        )
        .expect("validated target modes")
    }

    pub fn left_mode_y(&self) -> f64 {
        self.modes.iter().map(|m| m.y).fold(f64::INFINITY, f64::min)
    }

    pub fn right_mode_y(&self) -> f64 {
        self.modes.iter().map(|m| m.y).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn classify(&self, y_final: f64) -> TerminalClass {
        if (y_final - self.left_mode_y()).abs() < CAPTURE_RADIUS {
            TerminalClass::LeftMode
        } else if (y_final - self.right_mode_y()).abs() < CAPTURE_RADIUS {
            TerminalClass::RightMode
        } else {
            TerminalClass::Stuck
        }
    }
}

/// Distance from a mode within which a terminal `y` counts as captured.
pub const CAPTURE_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalClass {
    LeftMode,
    RightMode,
    Stuck,
}

impl std::fmt::Display for TerminalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TerminalClass::LeftMode => "LeftMode",
            TerminalClass::RightMode => "RightMode",
            TerminalClass::Stuck => "Stuck",
        })
    }
}

/// The discretized loss of a fixed target, filter exponent and quadrature.
#[derive(Debug, Clone)]
pub struct FlowLoss {
    s: Vec<f64>,
    weight: Vec<f64>,
    target: Vec<f64>,
    target_energy: f64,
    beta: f64,
}

/// `L = a - 2 xi b + xi^2 c` and the first two `y` derivatives of `b`, `c`.
#[derive(Debug, Clone, Copy)]
struct Moments {
    b: f64,
    c: f64,
    db: f64,
    dc: f64,
    ddb: f64,
    ddc: f64,
}

impl FlowLoss {
    pub fn new(target: &IllustrativeTarget, beta: f64, quad: &QuadratureSpec) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidArgument("beta must be finite".into()));
        }
        let s: Vec<f64> = (0..quad.points).map(|i| quad.node(i)).collect();
        let weight: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(i, &si)| quad.weight(i) * sobolev_weight(beta, si).powi(2))
            .collect();
        let target: Vec<f64> = s.iter().map(|&si| target.eval(si)).collect();
        let target_energy = weight.iter().zip(&target).map(|(w, f)| w * f * f).sum();
        Ok(FlowLoss {
            s,
            weight,
            target,
            target_energy,
            beta,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn moments(&self, y: f64) -> Moments {
        let mut m = Moments {
            b: 0.0,
            c: 0.0,
            db: 0.0,
            dc: 0.0,
            ddb: 0.0,
            ddc: 0.0,
        };
        for ((&s, &w), &f) in self.s.iter().zip(&self.weight).zip(&self.target) {
            let t = s - y;
            let l = 1.0 / (1.0 + t * t);
            let dl = 2.0 * t * l * l;
            let ddl = (8.0 * t * t * l - 2.0) * l * l;
            m.b += w * f * l;
            m.c += w * l * l;
            m.db += w * f * dl;
            m.dc += 2.0 * w * l * dl;
            m.ddb += w * f * ddl;
            m.ddc += 2.0 * w * (dl * dl + l * ddl);
        }
        m
    }

    pub fn loss(&self, y: f64, xi: f64) -> f64 {
        let mut acc = 0.0;
        for ((&s, &w), &f) in self.s.iter().zip(&self.weight).zip(&self.target) {
            let t = s - y;
            let r = f - xi / (1.0 + t * t);
            acc += w * r * r;
        }
        acc
    }

    /// `(dL/dy, dL/dxi)`.
    pub fn gradient(&self, y: f64, xi: f64) -> (f64, f64) {
        let m = self.moments(y);
        (-2.0 * xi * m.db + xi * xi * m.dc, -2.0 * m.b + 2.0 * xi * m.c)
    }

    /// Whether `(y, xi)` is a numerically stationary point.
    pub fn is_stationary(&self, y: f64, xi: f64, newton_tol: f64, grad_tol: f64) -> bool {
        let (g, h) = self.gradient_hessian(y, xi);
        if g[0].hypot(g[1]) < grad_tol {
            return true;
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(h[0][0] > 0.0 && det > 0.0) {
            return false;
        }
        let d = solve2(h, g);
        d[0].hypot(d[1]) < newton_tol
    }

    /// Gradient and Hessian of `L` in `(y, xi)`.
    pub fn gradient_hessian(&self, y: f64, xi: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let m = self.moments(y);
        let g = [-2.0 * xi * m.db + xi * xi * m.dc, -2.0 * m.b + 2.0 * xi * m.c];
        let hyx = -2.0 * m.db + 2.0 * xi * m.dc;
        let h = [[-2.0 * xi * m.ddb + xi * xi * m.ddc, hyx], [hyx, 2.0 * m.c]];
        (g, h)
    }

    /// One ROS2 step of `d(y, xi)/dtau = -grad L`. Returns the new state and
    /// the embedded first-order error estimate.
    fn ros2(&self, y: f64, xi: f64, dt: f64) -> ([f64; 2], [f64; 2]) {
        let gamma = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        let (g, h) = self.gradient_hessian(y, xi);
        let w = positive_part(h);
        let a = [
            [1.0 + gamma * dt * w[0][0], gamma * dt * w[0][1]],
            [gamma * dt * w[1][0], 1.0 + gamma * dt * w[1][1]],
        ];
        let k1 = solve2(a, [-g[0], -g[1]]);
        let (gy, gxi) = self.gradient(y + dt * k1[0], xi + dt * k1[1]);
        let k2 = solve2(a, [-gy - 2.0 * k1[0], -gxi - 2.0 * k1[1]]);
        let next = [
            y + dt * (1.5 * k1[0] + 0.5 * k2[0]),
            xi + dt * (1.5 * k1[1] + 0.5 * k2[1]),
        ];
        let err = [0.5 * dt * (k1[0] + k2[0]), 0.5 * dt * (k1[1] + k2[1])];
        (next, err)
    }
}

/// Symmetric 2x2 matrix with negative eigenvalues clamped to zero.
fn positive_part(h: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let (a, b, d) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    if l2 >= 0.0 {
        return h;
    }
    if l1 <= 0.0 {
        return [[0.0; 2]; 2];
    }
    let (vx, vy) = if b != 0.0 {
        (l1 - d, b)
    } else if a >= d {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let n2 = vx * vx + vy * vy;
    [
        [l1 * vx * vx / n2, l1 * vx * vy / n2],
        [l1 * vx * vy / n2, l1 * vy * vy / n2],
    ]
}

fn solve2(a: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (r[0] * a[1][1] - a[0][1] * r[1]) / det,
        (a[0][0] * r[1] - a[1][0] * r[0]) / det,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub beta: f64,
    /// Largest `|dy|` allowed in one accepted step.
    pub step: f64,
    /// Maximum number of accepted steps.
    pub steps: usize,
    /// First trial time step.
    pub initial_dt: f64,
    /// Local error tolerance on `y` per step.
    pub tol: f64,
    /// Stop once the Newton displacement `|H^-1 grad L|` falls below this at
    /// a point where the Hessian `H` is positive definite.
    pub newton_tol: f64,
    /// Stop once `||grad L||` falls below this, whatever the curvature.
    pub grad_tol: f64,
    /// Stop after this many consecutive rejected steps; the state then sits
    /// at the rounding floor of the loss.
    pub max_rejects: usize,
    /// Stop once flow time exceeds this.
    pub tau_max: f64,
    pub quad: QuadratureSpec,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            beta: 0.0,
            step: 0.05,
            steps: 200_000,
            initial_dt: 2e-3,
            tol: 1e-5,
            newton_tol: 1e-9,
            grad_tol: 1e-14,
            max_rejects: 60,
            tau_max: 1e30,
            quad: default_quadrature(),
        }
    }
}

/// `[-400, 400]` at spacing `0.25`.
pub fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec::new(400.0, 3201).expect("valid default quadrature")
}

impl FlowConfig {
    pub fn with_beta(beta: f64) -> Self {
        FlowConfig {
            beta,
            ..FlowConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if self.max_rejects == 0 {
            return Err(Error::InvalidArgument("max_rejects must be at least 1".into()));
        }
        if !(self.initial_dt > 0.0)
            || !(self.tol > 0.0)
            || !(self.tau_max > 0.0)
            || !(self.newton_tol > 0.0)
            || !(self.grad_tol >= 0.0)
        {
            return Err(Error::InvalidArgument(
                "initial_dt, tol, tau_max and newton_tol must be positive".into(),
            ));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub tau: f64,
    pub y: f64,
    pub xi: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub path: Vec<FlowPoint>,
    pub terminal_class: TerminalClass,
    pub loss_final: f64,
    pub grad_norm_final: f64,
}

impl FlowTrajectory {
    pub fn initial(&self) -> FlowPoint {
        self.path[0]
    }

    pub fn terminal(&self) -> FlowPoint {
        *self.path.last().expect("path is never empty")
    }
}

pub fn run_flow(target: &IllustrativeTarget, y0: f64, xi0: f64, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let problem = FlowLoss::new(target, cfg.beta, &cfg.quad)?;
    run_flow_with(&problem, target, y0, xi0, cfg)
}

/// [`run_flow`] reusing a precomputed loss.
pub fn run_flow_with(
    problem: &FlowLoss,
    target: &IllustrativeTarget,
    y0: f64,
    xi0: f64,
    cfg: &FlowConfig,
) -> Result<FlowTrajectory> {
    cfg.validate()?;
    if !y0.is_finite() || !xi0.is_finite() {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    let (mut y, mut xi, mut tau) = (y0, xi0, 0.0);
    let mut loss = problem.loss(y, xi);
    let mut path = vec![FlowPoint { tau, y, xi, loss }];
    let mut dt = cfg.initial_dt;
    let grad_norm = |y: f64, xi: f64| {
        let (gy, gx) = problem.gradient(y, xi);
        gy.hypot(gx)
    };
    let mut gnorm = grad_norm(y, xi);
    let mut accepted = 0usize;
    let mut rejects = 0usize;

    let stationary = |y: f64, xi: f64| problem.is_stationary(y, xi, cfg.newton_tol, cfg.grad_tol);
    let mut done = stationary(y, xi);
    while !done && accepted < cfg.steps && tau < cfg.tau_max && rejects < cfg.max_rejects {
        let ([y_new, xi_new], e) = problem.ros2(y, xi, dt);
        if !(y_new.is_finite() && xi_new.is_finite()) {
            if dt < 1e-300 {
                return Err(Error::Divergence {
                    step: accepted,
                    what: format!("non-finite state at tau = {tau}"),
                });
            }
            dt *= 0.5;
            rejects += 1;
            continue;
        }
        let err = e[0].abs().max(e[1].abs() / (1.0 + xi.abs()));
        let loss_new = problem.loss(y_new, xi_new);
        let ok = err <= cfg.tol
            && (y_new - y).abs() <= cfg.step
            && loss_new <= loss * (1.0 + 1e-14) + 1e-300;
        if !ok {
            dt *= 0.5;
            rejects += 1;
            if dt < 1e-300 {
                return Err(Error::Divergence {
                    step: accepted,
                    what: format!("step size underflow at tau = {tau}, y = {y}"),
                });
            }
            continue;
        }
        rejects = 0;
        tau += dt;
        y = y_new;
        xi = xi_new;
        loss = loss_new;
        accepted += 1;
        path.push(FlowPoint { tau, y, xi, loss });
        gnorm = grad_norm(y, xi);
        done = stationary(y, xi);
        let grow = if err > 0.0 {
            (0.9 * (cfg.tol / err).sqrt()).clamp(1.0, 2.0)
        } else {
            2.0
        };
        dt *= grow;
    }

    Ok(FlowTrajectory {
        terminal_class: target.classify(y),
        loss_final: loss,
        grad_norm_final: gnorm,
        path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOutcome {
    pub y0: f64,
    pub terminal_class: TerminalClass,
    pub y_final: f64,
    pub xi_final: f64,
    pub tau_final: f64,
    pub loss_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub outcomes: Vec<RegionOutcome>,
    /// Largest `y0` converging to the left mode.
    pub left_edge: Option<f64>,
    /// Smallest `y0` of the top contiguous block converging to the right mode.
    pub right_edge: Option<f64>,
    /// Midpoint between `right_edge` and the grid point just below it.
    pub boundary: Option<f64>,
}

impl RegionReport {
    pub fn count(&self, class: TerminalClass) -> usize {
        self.outcomes.iter().filter(|o| o.terminal_class == class).count()
    }

    pub fn fraction(&self, class: TerminalClass) -> f64 {
        self.count(class) as f64 / self.outcomes.len() as f64
    }
}

/// Classify the flow from every `y0` in a sorted grid at fixed `xi0`.
pub fn region_boundary(
    target: &IllustrativeTarget,
    xi0: f64,
    y_grid: &[f64],
    cfg: &FlowConfig,
    exec: Exec,
) -> Result<RegionReport> {
    cfg.validate()?;
    if y_grid.is_empty() {
        return Err(Error::InvalidArgument("y grid is empty".into()));
    }
    if y_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("y grid must be strictly increasing".into()));
    }
    let problem = FlowLoss::new(target, cfg.beta, &cfg.quad)?;
    let runs = exec.map_slice(y_grid, |&y0| run_flow_with(&problem, target, y0, xi0, cfg));
    let mut outcomes = Vec::with_capacity(runs.len());
    for (run, &y0) in runs.into_iter().zip(y_grid) {
        let traj = run?;
        let end = traj.terminal();
        outcomes.push(RegionOutcome {
            y0,
            terminal_class: traj.terminal_class,
            y_final: end.y,
            xi_final: end.xi,
            tau_final: end.tau,
            loss_final: traj.loss_final,
        });
    }
    let left_edge = outcomes
        .iter()
        .filter(|o| o.terminal_class == TerminalClass::LeftMode)
        .map(|o| o.y0)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let top = outcomes
        .iter()
        .rev()
        .take_while(|o| o.terminal_class == TerminalClass::RightMode)
        .count();
    let (right_edge, boundary) = if top == 0 {
        (None, None)
    } else {
        let first = outcomes.len() - top;
        let edge = outcomes[first].y0;
        let boundary = (first > 0).then(|| 0.5 * (edge + outcomes[first - 1].y0));
        (Some(edge), boundary)
    };
    Ok(RegionReport {
        outcomes,
        left_edge,
        right_edge,
        boundary,
    })
}

/// Loss values on a `(y, xi)` grid; `loss[i][k]` is at `(ys[i], xis[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub ys: Vec<f64>,
    pub xis: Vec<f64>,
    pub loss: Vec<Vec<f64>>,
}

impl Landscape {
    /// `(y, xi, loss)` at the grid minimum.
    pub fn argmin(&self) -> (f64, f64, f64) {
        let mut best = (self.ys[0], self.xis[0], f64::INFINITY);
        for (i, row) in self.loss.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v < best.2 {
                    best = (self.ys[i], self.xis[k], v);
                }
            }
        }
        best
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn landscape_grid(
    target: &IllustrativeTarget,
    beta: f64,
    y_range: (f64, f64),
    xi_range: (f64, f64),
    resolution: (usize, usize),
    quad: &QuadratureSpec,
    exec: Exec,
) -> Result<Landscape> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::InvalidArgument(format!(
            "landscape resolution must be at least 2 per axis, got {resolution:?}"
        )));
    }
    let problem = FlowLoss::new(target, beta, quad)?;
    let ys = linspace(y_range.0, y_range.1, resolution.0);
    let xis = linspace(xi_range.0, xi_range.1, resolution.1);
    let loss = exec.map_slice(&ys, |&y| {
        let m = problem.moments(y);
        xis.iter()
            .map(|&xi| (problem.target_energy - 2.0 * xi * m.b + xi * xi * m.c).max(0.0))
            .collect()
    });
    Ok(Landscape { ys, xis, loss })
}

/// Evenly spaced grid `lo, lo + (hi-lo)/(count-1), ..., hi`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "grid needs lo < hi and count >= 2, got {lo}:{hi}:{count}"
        )));
    }
    Ok(linspace(lo, hi, count))
}
