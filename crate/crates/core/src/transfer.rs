//! Diagonal SISO LTI systems in partial-fraction form.
//!
//! A system is `G(is) = sum_j c_j / (is - a_j) + d` with poles
//! `a_j = x_j + i y_j` (`x_j < 0`) and residues `c_j = xi_j + i zeta_j`.
//! Most of the analysis works with the real part `G~(is) = Re G(is)` and its
//! Sobolev-filtered version `(1 + |s|)^beta G~(is)`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Default number of theta-grid points for total variation.
pub const DEFAULT_TV_POINTS: usize = 200_000;

/// Stable diagonal LTI system. Serializes as
/// `{"x":[..],"y":[..],"xi":[..],"zeta":[..],"d":0.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLti")]
pub struct DiagonalLti {
    x: Vec<f64>,
    y: Vec<f64>,
    xi: Vec<f64>,
    zeta: Vec<f64>,
    d: f64,
}

#[derive(Deserialize)]
struct RawLti {
    #[serde(default)]
    x: Vec<f64>,
    #[serde(default)]
    y: Vec<f64>,
    #[serde(default)]
    xi: Vec<f64>,
    #[serde(default)]
    zeta: Vec<f64>,
    #[serde(default)]
    d: f64,
}

impl TryFrom<RawLti> for DiagonalLti {
    type Error = Error;

    fn try_from(raw: RawLti) -> Result<Self> {
        DiagonalLti::new(raw.x, raw.y, raw.xi, raw.zeta, raw.d)
    }
}

/// Which trainable quantity of a pole (or the skip term) is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    X,
    Y,
    Xi,
    Zeta,
    D,
}

impl DiagonalLti {
    pub fn new(x: Vec<f64>, y: Vec<f64>, xi: Vec<f64>, zeta: Vec<f64>, d: f64) -> Result<Self> {
        let n = x.len();
        if y.len() != n || xi.len() != n || zeta.len() != n {
            return Err(Error::InvalidSystem(format!(
                "parameter lists differ in length: x={}, y={}, xi={}, zeta={}",
                n,
                y.len(),
                xi.len(),
                zeta.len()
            )));
        }
        if let Some(j) = x.iter().position(|&v| !(v < 0.0)) {
            return Err(Error::InvalidSystem(format!(
                "pole {j} is not stable: x = {}",
                x[j]
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|t| t.is_finite());
        if !(finite(&x) && finite(&y) && finite(&xi) && finite(&zeta) && d.is_finite()) {
            return Err(Error::InvalidSystem("non-finite parameter".into()));
        }
        Ok(DiagonalLti { x, y, xi, zeta, d })
    }

    /// Pure skip system `G = d`.
    pub fn skip(d: f64) -> Self {
        DiagonalLti {
            x: vec![],
            y: vec![],
            xi: vec![],
            zeta: vec![],
            d,
        }
    }

    /// Single pole `a = x + iy` with residue `xi + i zeta` and no skip.
    pub fn single(x: f64, y: f64, xi: f64, zeta: f64) -> Result<Self> {
        Self::new(vec![x], vec![y], vec![xi], vec![zeta], 0.0)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn pole(&self, j: usize) -> Complex64 {
        Complex64::new(self.x[j], self.y[j])
    }

    pub fn residue(&self, j: usize) -> Complex64 {
        Complex64::new(self.xi[j], self.zeta[j])
    }

    /// `max_j |y_j|`, zero for the pure skip system.
    pub fn max_abs_y(&self) -> f64 {
        self.y.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_index(&self, j: usize) -> Result<()> {
        if j < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: j,
                len: self.n(),
            })
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

    /// Copy with one parameter shifted by `delta` (`j` ignored for `D`).
    pub fn perturbed(&self, p: Param, j: usize, delta: f64) -> Result<Self> {
        let mut out = self.clone();
        match p {
            Param::X => out.x[j] += delta,
            Param::Y => out.y[j] += delta,
            Param::Xi => out.xi[j] += delta,
            Param::Zeta => out.zeta[j] += delta,
            Param::D => out.d += delta,
        }
        Self::new(out.x, out.y, out.xi, out.zeta, out.d)
    }

    /// `G(is) = sum_j (xi_j + i zeta_j) / (-x_j + i (s - y_j)) + d`.
    pub fn eval_complex(&self, s: f64) -> Complex64 {
        let mut acc = Complex64::new(self.d, 0.0);
        for j in 0..self.n() {
            let den = Complex64::new(-self.x[j], s - self.y[j]);
            acc += self.residue(j) / den;
        }
        acc
    }

    /// `G~(is) = sum_j [zeta_j (s - y_j) - xi_j x_j] / [x_j^2 + (s - y_j)^2] + d`.
    pub fn eval_real(&self, s: f64) -> f64 {
        let mut acc = self.d;
        for j in 0..self.n() {
            let t = s - self.y[j];
            let x = self.x[j];
            acc += (self.zeta[j] * t - self.xi[j] * x) / (x * x + t * t);
        }
        acc
    }

    /// `(1 + |s|)^beta G~(is)`.
    pub fn eval_sobolev(&self, beta: f64, s: f64) -> f64 {
        sobolev_weight(beta, s) * self.eval_real(s)
    }

    /// Sum of residue moduli `sum_j |c_j|`.
    pub fn residue_l1(&self) -> f64 {
        (0..self.n()).map(|j| self.residue(j).norm()).sum()
    }
}

/// The Sobolev multiplier `(1 + |s|)^beta`.
#[inline]
pub fn sobolev_weight(beta: f64, s: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else {
        (1.0 + s.abs()).powf(beta)
    }
}

/// An interval `[lo, hi]` of the frequency axis; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyWindow {
    lo: f64,
    hi: f64,
}

impl FrequencyWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "frequency window needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(FrequencyWindow { lo, hi })
    }

    pub fn whole_line() -> Self {
        FrequencyWindow {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Value of `G~^(beta)` at an infinite endpoint, when the limit is finite.
fn limit_at_infinity(sys: &DiagonalLti, beta: f64) -> Option<f64> {
    if beta < 0.0 {
        Some(0.0)
    } else if beta == 0.0 {
        Some(sys.d())
    } else {
        None
    }
}

/// Total variation of `s -> G~^(beta)(is)` over `window`, summed on a grid
/// that is uniform in `theta = atan(s)`.
///
/// Infinite endpoints use the limiting value `d` (beta = 0) or `0`
/// (beta < 0). For beta > 0 the limit is generally unbounded, so the endpoint
/// sample is dropped and the sum covers the finite interior nodes only.
pub fn total_variation_numeric(
    sys: &DiagonalLti,
    beta: f64,
    window: FrequencyWindow,
    grid_points: usize,
) -> Result<f64> {
    total_variation_numeric_with(sys, beta, window, grid_points, Exec::default())
}

pub fn total_variation_numeric_with(
    sys: &DiagonalLti,
    beta: f64,
    window: FrequencyWindow,
    grid_points: usize,
    exec: Exec,
) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "total variation needs at least 2 grid points, got {grid_points}"
        )));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidArgument("beta must be finite".into()));
    }
    let t_lo = window.lo.atan();
    let t_hi = window.hi.atan();
    let h = (t_hi - t_lo) / (grid_points - 1) as f64;
    let limit = limit_at_infinity(sys, beta);

    let value = |k: usize| -> Option<f64> {
        let (theta, edge) = if k == 0 {
            (t_lo, window.lo)
        } else if k == grid_points - 1 {
            (t_hi, window.hi)
        } else {
            (t_lo + k as f64 * h, 0.0)
        };
        if edge.is_infinite() {
            return limit;
        }
        let s = if k == 0 || k == grid_points - 1 {
            edge
        } else if theta.abs() >= FRAC_PI_2 {
            return limit;
        } else {
            theta.tan()
        };
        Some(sys.eval_sobolev(beta, s))
    };

    let vals: Vec<Option<f64>> = exec.map(grid_points, value);
    let vals: Vec<f64> = vals.into_iter().flatten().collect();
    if vals.len() < 2 {
        return Ok(0.0);
    }
    Ok(exec.sum(vals.len() - 1, |k| (vals[k + 1] - vals[k]).abs()))
}

/// Which tail of the frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// `(-inf, -B]`
    Left,
    /// `[B, inf)`
    Right,
}

impl TailSide {
    pub fn window(self, cutoff_b: f64) -> Result<FrequencyWindow> {
        match self {
            TailSide::Left => FrequencyWindow::new(f64::NEG_INFINITY, -cutoff_b),
            TailSide::Right => FrequencyWindow::new(cutoff_b, f64::INFINITY),
        }
    }
}

/// Closed-form tail bound on the total variation of `G~` beyond a cutoff:
/// `sum_j |c_j| / |y_j - B|` on the right, `sum_j |c_j| / |y_j + B|` on the
/// left. Requires `B > max_j |y_j|`.
pub fn tv_tail_bound(sys: &DiagonalLti, cutoff_b: f64, side: TailSide) -> Result<f64> {
    let max_y = sys.max_abs_y();
    if !(cutoff_b > max_y) || !cutoff_b.is_finite() {
        return Err(Error::Precondition(format!(
            "cutoff B = {cutoff_b} must exceed max |y_j| = {max_y}"
        )));
    }
    let bound = (0..sys.n())
        .map(|j| {
            let dist = match side {
                TailSide::Right => (sys.y()[j] - cutoff_b).abs(),
                TailSide::Left => (sys.y()[j] + cutoff_b).abs(),
            };
            sys.residue(j).norm() / dist
        })
        .sum();
    Ok(bound)
}

/// Probabilistic tail bound for HiPPO systems with standard-normal residues:
/// with probability at least `1 - delta` both tails have total variation at
/// most `sqrt(2n) (sqrt(n) + sqrt(ln(1/delta))) / (B - n/2)`.
pub fn hippo_tail_bound(n: usize, cutoff_b: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let nf = n as f64;
    let min_b = nf * std::f64::consts::PI / 2.0;
    if !(cutoff_b > min_b) || !cutoff_b.is_finite() {
        return Err(Error::Precondition(format!(
            "cutoff B = {cutoff_b} must exceed n*pi/2 = {min_b}"
        )));
    }
    Ok((2.0 * nf).sqrt() * (nf.sqrt() + (1.0 / delta).ln().sqrt()) / (cutoff_b - nf / 2.0))
}

/// Numeric total variation of `G~` over one tail beyond `cutoff_b`.
pub fn numeric_tail_tv(
    sys: &DiagonalLti,
    cutoff_b: f64,
    side: TailSide,
    grid_points: usize,
    exec: Exec,
) -> Result<f64> {
    total_variation_numeric_with(sys, 0.0, side.window(cutoff_b)?, grid_points, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_pole() -> DiagonalLti {
        DiagonalLti::single(-1.0, 0.0, 1.0, 0.0).unwrap()
    }

    fn random_sys(rng: &mut ChaCha8Rng, n: usize) -> DiagonalLti {
        let x = (0..n).map(|_| -rng.random_range(0.1..2.0)).collect();
        let y = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let xi = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let zeta = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        DiagonalLti::new(x, y, xi, zeta, rng.random_range(-1.0..1.0)).unwrap()
    }

    /// Complex Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &k| a[i][col].norm().total_cmp(&a[k][col].norm()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
                let v = b[col];
                b[row] -= f * v;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= a[row][k] * out[k];
            }
            out[row] = acc / a[row][row];
        }
        out
    }

    /// `C (isI - A)^{-1} B + D` with `A = V diag(a) V^{-1}` dense, computed by
    /// a linear solve.
    fn dense_resolvent(sys: &DiagonalLti, s: f64, rng: &mut ChaCha8Rng) -> Complex64 {
        let n = sys.n();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        // V = I + small random perturbation, well conditioned.
        let v: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        let r = Complex64::new(
                            rng.random_range(-0.3..0.3),
                            rng.random_range(-0.3..0.3),
                        );
                        if i == k {
                            one + r
                        } else {
                            r
                        }
                    })
                    .collect()
            })
            .collect();
        // columns of V^{-1}
        let vinv_cols: Vec<Vec<Complex64>> = (0..n)
            .map(|k| {
                let mut e = vec![zero; n];
                e[k] = one;
                solve(v.clone(), e)
            })
            .collect();
        let vinv = |i: usize, k: usize| vinv_cols[k][i];
        // A = V diag(a) V^{-1}; B = V 1; C = c^T V^{-1}
        let a_dense: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| (0..n).map(|m| v[i][m] * sys.pole(m) * vinv(m, k)).sum())
                    .collect()
            })
            .collect();
        let b: Vec<Complex64> = (0..n).map(|i| (0..n).map(|m| v[i][m]).sum()).collect();
        let c: Vec<Complex64> = (0..n)
            .map(|k| (0..n).map(|m| sys.residue(m) * vinv(m, k)).sum())
            .collect();
        let is = Complex64::new(0.0, s);
        let lhs: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| if i == k { is - a_dense[i][k] } else { -a_dense[i][k] })
                    .collect()
            })
            .collect();
        let z = solve(lhs, b);
        c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum::<Complex64>() + sys.d()
    }

    #[test]
    fn rejects_unstable_and_ragged() {
        assert!(DiagonalLti::single(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(DiagonalLti::single(0.5, 0.0, 1.0, 0.0).is_err());
        assert!(DiagonalLti::new(vec![-1.0], vec![], vec![1.0], vec![0.0], 0.0).is_err());
        assert!(DiagonalLti::new(vec![-1.0], vec![0.0], vec![f64::NAN], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn unit_pole_values() {
        let sys = unit_pole();
        let g = sys.eval_complex(0.0);
        assert_eq!(g, Complex64::new(1.0, 0.0));
        assert_eq!(sys.eval_real(0.0), 1.0);
        assert_eq!(sys.eval_real(1.0), 0.5);
    }

    #[test]
    fn skip_only_system() {
        let sys = DiagonalLti::skip(2.5);
        for s in [-3.0, 0.0, 1e6] {
            assert_eq!(sys.eval_complex(s), Complex64::new(2.5, 0.0));
        }
    }

    #[test]
    fn hippo_system_matches_dense_resolvent() {
        let sys = crate::init::hippo_alpha(&crate::init::InitConfig::new(4, 1.0, 7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let want = dense_resolvent(&sys, 1.0, &mut rng);
        let got = sys.eval_complex(1.0);
        assert!((got - want).norm() / want.norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn resolvent_equivalence_up_to_16_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=16 {
            let sys = random_sys(&mut rng, n);
            let s = rng.random_range(-30.0..30.0);
            let want = dense_resolvent(&sys, s, &mut rng);
            let got = sys.eval_complex(s);
            assert!((got - want).norm() <= 1e-10 * want.norm().max(1e-300), "n={n}");
        }
    }

    #[test]
    fn real_part_matches_complex_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = random_sys(&mut rng, 2);
        for _ in 0..100 {
            let s = rng.random_range(-50.0..50.0);
            assert!((sys.eval_real(s) - sys.eval_complex(s).re).abs() < 1e-12);
        }
    }

    #[test]
    fn sobolev_filter_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sys = random_sys(&mut rng, 3);
        assert_eq!(sys.eval_sobolev(0.0, 4.2), sys.eval_real(4.2));
        assert_eq!(sys.eval_sobolev(1.7, 0.0), sys.eval_real(0.0));

        // One pole at y = 0, x = -1, zeta = 0: G~(i3) = xi / 10. Pick xi for 0.5.
        let xi = 0.5 * 10.0;
        let sys = DiagonalLti::single(-1.0, 0.0, xi, 0.0).unwrap();
        assert_relative_eq!(sys.eval_real(3.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(sys.eval_sobolev(2.0, 3.0), 8.0, epsilon = 1e-14);
    }

    #[test]
    fn tv_of_constant_is_zero() {
        let sys = DiagonalLti::skip(7.0);
        for w in [
            FrequencyWindow::whole_line(),
            FrequencyWindow::new(-3.0, 5.0).unwrap(),
        ] {
            assert_eq!(total_variation_numeric(&sys, 0.0, w, 1000).unwrap(), 0.0);
        }
    }

    #[test]
    fn tv_of_monotone_lorentzian_tail() {
        let w = FrequencyWindow::new(0.0, f64::INFINITY).unwrap();
        let tv = total_variation_numeric(&unit_pole(), 0.0, w, DEFAULT_TV_POINTS).unwrap();
        assert!((tv - 1.0).abs() < 1e-6, "tv = {tv}");
    }

    #[test]
    fn tv_rejects_tiny_grid() {
        let w = FrequencyWindow::new(0.0, 1.0).unwrap();
        assert!(total_variation_numeric(&unit_pole(), 0.0, w, 1).is_err());
    }

    #[test]
    fn tv_grid_refinement_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sys = random_sys(&mut rng, 3);
        let w = FrequencyWindow::whole_line();
        let a = total_variation_numeric(&sys, 0.0, w, 100_000).unwrap();
        let b = total_variation_numeric(&sys, 0.0, w, 199_999).unwrap();
        assert!(b >= a - 1e-12);
        assert!((b - a).abs() / b < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn tail_bound_examples() {
        let sys = DiagonalLti::single(-1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(tv_tail_bound(&sys, 2.0, TailSide::Right).unwrap(), 0.5);
        let sys = DiagonalLti::single(-1.0, 1.0, 3.0, 4.0).unwrap();
        assert_relative_eq!(tv_tail_bound(&sys, 6.0, TailSide::Left).unwrap(), 5.0 / 7.0);
        assert!(matches!(
            tv_tail_bound(&sys, 1.0, TailSide::Right),
            Err(Error::Precondition(_))
        ));
        assert_eq!(tv_tail_bound(&DiagonalLti::skip(1.0), 1.0, TailSide::Left).unwrap(), 0.0);
    }

    #[test]
    fn hippo_bound_examples() {
        let want = 8f64.sqrt() * (2.0 + 2f64.ln().sqrt()) / 8.0;
        assert_relative_eq!(hippo_tail_bound(4, 10.0, 0.5).unwrap(), want, epsilon = 1e-15);
        let near_one = hippo_tail_bound(1, 3.0, 1.0 - 1e-12).unwrap();
        assert_relative_eq!(near_one, 2f64.sqrt() / 2.5, epsilon = 1e-5);
        assert!(hippo_tail_bound(4, 6.0, 0.5).is_err());
        assert!(hippo_tail_bound(4, 10.0, 0.0).is_err());
        assert!(hippo_tail_bound(4, 10.0, 1.0).is_err());
    }

    #[test]
    fn tv_subadditive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let sys = random_sys(&mut rng, 3);
            let (a, b, c) = (-40.0, rng.random_range(-20.0..20.0), 40.0);
            let tv = |lo, hi| {
                total_variation_numeric(&sys, 0.0, FrequencyWindow::new(lo, hi).unwrap(), 50_000)
                    .unwrap()
            };
            let (whole, split) = (tv(a, c), tv(a, b) + tv(b, c));
            assert!(whole <= split * (1.0 + 1e-4) + 1e-9, "{whole} vs {split}");
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let sys = DiagonalLti::new(vec![-0.5], vec![3.0], vec![1.0], vec![-2.0], 0.25).unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        let back: DiagonalLti = serde_json::from_str(&text).unwrap();
        assert_eq!(sys, back);
        let bad = r#"{"x":[0.5],"y":[0],"xi":[1],"zeta":[0],"d":0}"#;
        assert!(serde_json::from_str::<DiagonalLti>(bad).is_err());
        let skip: DiagonalLti = serde_json::from_str(r#"{"d":2.0,"x":[],"y":[],"xi":[],"zeta":[]}"#).unwrap();
        assert_eq!(skip.n(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn real_part_consistency(seed in any::<u64>(), s in -1e4f64..1e4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(0..6);
            let sys = random_sys(&mut rng, n);
            prop_assert!((sys.eval_real(s) - sys.eval_complex(s).re).abs() < 1e-12);
        }
    }
}
