//! Gradients of frequency-domain losses with respect to LTI parameters.
//!
//! For a loss whose functional derivative with respect to `G~b(is)` is the
//! residual `r(s)`, every parameter gradient is `int r(s) dG~b(is)/dtheta ds`.
//! The `y_j` derivative of `G~` is the kernel
//!
//! `K_j(s) = [zeta_j ((s-y_j)^2 - x_j^2) - 2 xi_j x_j (s-y_j)] / [x_j^2 + (s-y_j)^2]^2`,
//!
//! which decays like `s^-2`, so `y_j` mostly responds to residuals near
//! `s = y_j`. The integrals are approximated with a uniform trapezoid rule on
//! `[-s_max, s_max]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::transfer::{sobolev_weight, DiagonalLti, Param};

/// `K_j(s) = dG~(is)/dy_j`.
pub fn kernel_k(sys: &DiagonalLti, j: usize, s: f64) -> Result<f64> {
    sys.check_index(j)?;
    Ok(pole_partials(sys.x()[j], sys.y()[j], sys.xi()[j], sys.zeta()[j], s).y)
}

/// `K_j^(beta)(s) = (1+|s|)^beta K_j(s)`.
pub fn kernel_k_sobolev(sys: &DiagonalLti, j: usize, beta: f64, s: f64) -> Result<f64> {
    Ok(sobolev_weight(beta, s) * kernel_k(sys, j, s)?)
}

/// Partial derivatives of one pole's contribution to `G~(is)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolePartials {
    pub x: f64,
    pub y: f64,
    pub xi: f64,
    pub zeta: f64,
}

#[inline]
pub fn pole_partials(x: f64, y: f64, xi: f64, zeta: f64, s: f64) -> PolePartials {
    let t = s - y;
    let den = x * x + t * t;
    let den2 = den * den;
    PolePartials {
        x: (xi * (x * x - t * t) - 2.0 * x * zeta * t) / den2,
        y: (zeta * (t * t - x * x) - 2.0 * xi * x * t) / den2,
        xi: -x / den,
        zeta: t / den,
    }
}

/// The functional derivative `dL/dG~b(is)` of some loss, with its declared
/// growth exponent `p` (`|r(s)| = O(|s|^p)`).
pub trait Residual: Sync {
    fn eval(&self, s: f64) -> f64;
    fn growth_exponent(&self) -> f64;
}

/// A residual backed by a closure.
pub struct FnResidual<F> {
    f: F,
    p: f64,
}

impl<F: Fn(f64) -> f64 + Sync> FnResidual<F> {
    pub fn new(f: F, growth_exponent: f64) -> Self {
        FnResidual {
            f,
            p: growth_exponent,
        }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Residual for FnResidual<F> {
    fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }
    fn growth_exponent(&self) -> f64 {
        self.p
    }
}

/// Residual of the squared loss `int (F(s) - G~b(is))^2 ds` against a
/// target `F`: `r(s) = -2 (F(s) - G~b(is))`.
pub struct L2Residual<'a, F> {
    pub sys: &'a DiagonalLti,
    pub beta: f64,
    pub target: F,
    pub growth: f64,
}

impl<F: Fn(f64) -> f64 + Sync> Residual for L2Residual<'_, F> {
    fn eval(&self, s: f64) -> f64 {
        -2.0 * ((self.target)(s) - self.sys.eval_sobolev(self.beta, s))
    }
    fn growth_exponent(&self) -> f64 {
        self.growth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub s_max: f64,
    pub points: usize,
    pub scheme: Scheme,
}

impl QuadratureSpec {
    pub fn new(s_max: f64, points: usize) -> Result<Self> {
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(Error::InvalidArgument(format!("s_max must be positive, got {s_max}")));
        }
        if points < 3 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs at least 3 points, got {points}"
            )));
        }
        Ok(QuadratureSpec {
            s_max,
            points,
            scheme: Scheme::Trapezoid,
        })
    }

    /// `s_max = 100 (max|y_j| + 1)`, `2^17 + 1` points.
    pub fn default_for(sys: &DiagonalLti) -> Self {
        QuadratureSpec {
            s_max: 100.0 * (sys.max_abs_y() + 1.0),
            points: (1 << 17) + 1,
            scheme: Scheme::Trapezoid,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.s_max / (self.points - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i == self.points - 1 {
            self.s_max
        } else {
            -self.s_max + i as f64 * self.spacing()
        }
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i == self.points - 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// Same range, twice the resolution.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            points: 2 * self.points - 1,
            ..*self
        }
    }
}

/// Bound on the part of `int |r K_b|` dropped outside `[-s_max, s_max]` when
/// `|r(s) K_b(s)| <= c |s|^(p - 2 + beta)`; infinite if the tail diverges.
pub fn truncation_error_bound(c: f64, p: f64, beta: f64, s_max: f64) -> f64 {
    let q = p - 2.0 + beta;
    if q >= -1.0 {
        f64::INFINITY
    } else {
        2.0 * c * s_max.powf(q + 1.0) / (-q - 1.0)
    }
}

fn check_growth(residual: &dyn Residual, beta: f64) -> Result<()> {
    let p = residual.growth_exponent();
    if !(p < 1.0 - beta) {
        return Err(Error::Precondition(format!(
            "residual growth exponent p = {p} must be < 1 - beta = {}",
            1.0 - beta
        )));
    }
    Ok(())
}

/// `dL/dy_j = int r(s) K_j^(beta)(s) ds` by the trapezoid rule.
pub fn grad_y_quadrature(
    sys: &DiagonalLti,
    j: usize,
    beta: f64,
    residual: &dyn Residual,
    quad: &QuadratureSpec,
) -> Result<f64> {
    sys.check_index(j)?;
    check_growth(residual, beta)?;
    let (x, y, xi, zeta) = (sys.x()[j], sys.y()[j], sys.xi()[j], sys.zeta()[j]);
    Ok(Exec::default().sum(quad.points, |i| {
        let s = quad.node(i);
        quad.weight(i) * residual.eval(s) * sobolev_weight(beta, s) * pole_partials(x, y, xi, zeta, s).y
    }))
}

/// Gradient of a scalar loss with respect to every parameter of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub d: f64,
}

impl GradientRecord {
    pub fn zeros(n: usize) -> Self {
        GradientRecord {
            x: vec![0.0; n],
            y: vec![0.0; n],
            xi: vec![0.0; n],
            zeta: vec![0.0; n],
            d: 0.0,
        }
    }

    pub fn get(&self, p: Param, j: usize) -> f64 {
        match p {
            Param::X => self.x[j],
            Param::Y => self.y[j],
            Param::Xi => self.xi[j],
            Param::Zeta => self.zeta[j],
            Param::D => self.d,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.xi)
            .chain(&self.zeta)
            .chain(std::iter::once(&self.d))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn from_flat(n: usize, v: &[f64]) -> Self {
        GradientRecord {
            x: v[0..n].to_vec(),
            y: v[n..2 * n].to_vec(),
            xi: v[2 * n..3 * n].to_vec(),
            zeta: v[3 * n..4 * n].to_vec(),
            d: v[4 * n],
        }
    }
}

/// Full gradient `int r(s) (1+|s|)^beta dG~(is)/dtheta ds` for every
/// parameter, after checking the growth hypothesis `p < 1 - beta`.
pub fn grad_all_params(
    sys: &DiagonalLti,
    beta: f64,
    residual: &dyn Residual,
    quad: &QuadratureSpec,
) -> Result<GradientRecord> {
    check_growth(residual, beta)?;
    Ok(grad_all_params_unchecked(
        sys,
        beta,
        &|s| residual.eval(s),
        quad,
        Exec::default(),
    ))
}

/// Gradient of the truncated (discretized) loss without the growth check.
/// The truncated integral is always finite; callers that knowingly violate
/// `p < 1 - beta` get the gradient of the loss on `[-s_max, s_max]` only.
pub fn grad_all_params_unchecked(
    sys: &DiagonalLti,
    beta: f64,
    residual: &(dyn Fn(f64) -> f64 + Sync),
    quad: &QuadratureSpec,
    exec: Exec,
) -> GradientRecord {
    let n = sys.n();
    let flat = exec.sum_into(quad.points, 4 * n + 1, |i, acc| {
        let s = quad.node(i);
        let r = quad.weight(i) * residual(s) * sobolev_weight(beta, s);
        if r == 0.0 {
            return;
        }
        for j in 0..n {
            let p = pole_partials(sys.x()[j], sys.y()[j], sys.xi()[j], sys.zeta()[j], s);
            acc[j] += r * p.x;
            acc[n + j] += r * p.y;
            acc[2 * n + j] += r * p.xi;
            acc[3 * n + j] += r * p.zeta;
        }
        acc[4 * n] += r;
    });
    GradientRecord::from_flat(n, &flat)
}

/// Discretized loss `sum_i w_i (F(s_i) - G~b(is_i))^2`, the quantity whose
/// exact gradient [`grad_all_params`] returns for an [`L2Residual`].
pub fn quadrature_loss(
    sys: &DiagonalLti,
    beta: f64,
    target: &(dyn Fn(f64) -> f64 + Sync),
    quad: &QuadratureSpec,
) -> f64 {
    Exec::default().sum(quad.points, |i| {
        let s = quad.node(i);
        let e = target(s) - sys.eval_sobolev(beta, s);
        quad.weight(i) * e * e
    })
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x0: f64, h: f64) -> f64 {
    (f(x0 + h) - f(x0 - h)) / (2.0 * h)
}

/// Finite-difference gradient of `loss` over every parameter of `sys`.
/// Steps are relative: `h * max(1, |theta|)`.
pub fn fd_gradient(
    sys: &DiagonalLti,
    loss: impl Fn(&DiagonalLti) -> f64,
    h: f64,
) -> Result<GradientRecord> {
    let n = sys.n();
    let mut out = GradientRecord::zeros(n);
    let diff = |p: Param, j: usize| -> Result<f64> {
        let step = h * sys.get(p, j).abs().max(1.0);
        let plus = loss(&sys.perturbed(p, j, step)?);
        let minus = loss(&sys.perturbed(p, j, -step)?);
        Ok((plus - minus) / (2.0 * step))
    };
    for j in 0..n {
        out.x[j] = diff(Param::X, j)?;
        out.y[j] = diff(Param::Y, j)?;
        out.xi[j] = diff(Param::Xi, j)?;
        out.zeta[j] = diff(Param::Zeta, j)?;
    }
    out.d = diff(Param::D, 0)?;
    Ok(out)
}
