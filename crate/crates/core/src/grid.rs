//! Periodic grid functions on `[0, 1)` and their cubic-spline interpolant.

use crate::error::{Error, Result};
use crate::hamiltonian::wrap;

/// Values `u(x_i)` at the nodes `x_i = i/n`, extended with period one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    /// Checked constructor: `n` must be a power of two, at least 64, and all
    /// values finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid size must be a power of two >= 64, got {n}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite grid value at node {i}")));
        }
        Ok(Self { values })
    }

    /// Unchecked constructor for internal coarse grids.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, k: f64) -> Result<Self> {
        Self::new(vec![k; n])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n() as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n() as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(|i| self.node(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        let n = self.n() as isize;
        self.values[i.rem_euclid(n) as usize]
    }

    /// Centered difference `(u[i+1] − u[i−1])·n/2`.
    #[inline]
    pub fn gradient(&self, i: usize) -> f64 {
        let i = i as isize;
        (self.at(i + 1) - self.at(i - 1)) * self.n() as f64 * 0.5
    }

    pub fn gradients(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.gradient(i)).collect()
    }

    /// Linear interpolation of the centered gradients at an arbitrary point.
    pub fn gradient_at(&self, x: f64) -> f64 {
        let n = self.n();
        let s = wrap(x) * n as f64;
        let j = (s.floor() as usize).min(n - 1);
        let t = s - j as f64;
        (1.0 - t) * self.gradient(j) + t * self.gradient((j + 1) % n)
    }

    /// `(u[i+1] − 2u[i] + u[i−1])·n²`.
    pub fn second_differences(&self) -> Vec<f64> {
        let n2 = (self.n() * self.n()) as f64;
        (0..self.n() as isize)
            .map(|i| (self.at(i + 1) - 2.0 * self.at(i) + self.at(i - 1)) * n2)
            .collect()
    }

    pub fn interpolant(&self) -> PeriodicSpline {
        PeriodicSpline::new(&self.values)
    }

    /// Every other node; the coarse grid is an exact subset of this one.
    pub fn downsample(&self) -> GridFunction {
        Self::from_raw(self.values.iter().step_by(2).copied().collect())
    }

    /// Spline resampling onto `m` nodes.
    pub fn resample(&self, m: usize) -> Result<GridFunction> {
        let s = self.interpolant();
        Self::from_fn(m, |x| s.eval(x))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self::from_raw(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn shifted(&self, k: f64) -> GridFunction {
        self.map(|v| v + k)
    }

    pub fn negated(&self) -> GridFunction {
        self.map(|v| -v)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.n(), other.n(), "grid sizes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `min_K sup|u − v − K|`.
    pub fn sup_distance_mod_constant(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.n(), other.n(), "grid sizes differ");
        let (lo, hi) = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        0.5 * (hi - lo)
    }

    /// Pointwise average of grid functions of equal size.
    pub fn average(members: &[GridFunction]) -> Result<GridFunction> {
        let first = members
            .first()
            .ok_or_else(|| Error::Config("cannot average an empty family".into()))?;
        let n = first.n();
        let mut acc = vec![0.0; n];
        for m in members {
            if m.n() != n {
                return Err(Error::Config("grid sizes differ".into()));
            }
            for (a, v) in acc.iter_mut().zip(&m.values) {
                *a += v;
            }
        }
        let k = members.len() as f64;
        Ok(Self::from_raw(acc.into_iter().map(|a| a / k).collect()))
    }
}

/// A node is a kink when the slope changes by more than this across it.
pub const KINK_SLOPE_JUMP: f64 = 0.25;
/// Cells this close to a kink are interpolated linearly.
pub const KINK_RADIUS: usize = 4;

/// Periodic cubic spline through the nodes of a grid function.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
    /// Cells evaluated by linear interpolation instead of the cubic.
    linear: Vec<bool>,
}

impl PeriodicSpline {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let nf = n as f64;
        // M[i-1] + 4 M[i] + M[i+1] = 6 n² (u[i+1] − 2u[i] + u[i-1]), cyclic
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let l = values[(i + n - 1) % n];
                let r = values[(i + 1) % n];
                6.0 * nf * nf * (r - 2.0 * values[i] + l)
            })
            .collect();
        let second = solve_cyclic_constant(1.0, 4.0, 1.0, &rhs);
        Self { values: values.to_vec(), second, linear: vec![false; n] }
    }

    /// Switches to linear interpolation on the cells within [`KINK_RADIUS`]
    /// of a kink, given the second differences of the data. The cubic rings
    /// around a kink, and a min or max over `y` then turns the ringing into
    /// an O(1) error in the centered gradient.
    /// Linear interpolation on every cell.
    pub fn all_linear(mut self) -> Self {
        self.linear.iter_mut().for_each(|l| *l = true);
        self
    }

    pub fn with_kink_guard(mut self, second_differences: &[f64]) -> Self {
        let n = self.values.len();
        let h = 1.0 / n as f64;
        let r = KINK_RADIUS.min(n / 2);
        for (i, d2) in second_differences.iter().enumerate() {
            if d2.abs() * h > KINK_SLOPE_JUMP {
                for k in 0..2 * r {
                    self.linear[(i + n + k - r) % n] = true;
                }
            }
        }
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = wrap(x) * n as f64;
        let j = (s as usize).min(n - 1);
        let t = s - j as f64;
        let k = if j + 1 == n { 0 } else { j + 1 };
        let a = 1.0 - t;
        if self.linear[j] {
            return a * self.values[j] + t * self.values[k];
        }
        let h2 = 1.0 / (n * n) as f64;
        a * self.values[j]
            + t * self.values[k]
            + h2 / 6.0 * ((a * a * a - a) * self.second[j] + (t * t * t - t) * self.second[k])
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.values.len();
        let nf = n as f64;
        let s = wrap(x) * nf;
        let j = (s as usize).min(n - 1);
        let t = s - j as f64;
        let k = if j + 1 == n { 0 } else { j + 1 };
        let a = 1.0 - t;
        let h = 1.0 / nf;
        if self.linear[j] {
            return (self.values[k] - self.values[j]) * nf;
        }
        (self.values[k] - self.values[j]) * nf
            + h / 6.0 * (-(3.0 * a * a - 1.0) * self.second[j] + (3.0 * t * t - 1.0) * self.second[k])
    }
}

/// Solve the cyclic tridiagonal system with constant bands `(a, b, c)`
/// (sub, main, super) by Sherman-Morrison.
fn solve_cyclic_constant(a: f64, b: f64, c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let x = solve_tridiagonal(a, &diag, c, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c;
    let z = solve_tridiagonal(a, &diag, c, &u);
    let factor = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

fn solve_tridiagonal(a: f64, diag: &[f64], c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
