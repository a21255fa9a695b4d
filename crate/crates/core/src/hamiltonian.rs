//! Tonelli Hamiltonians on the circle `T¹ = ℝ/ℤ`, their Lagrangians and
//! Hamiltonian vector fields.
//!
//! Three families are available. A [`Potential`]-driven mechanical system
//! `½p² + V(x)`, the tilted pendulum `½(p+P)² − κ·sin²(πx)` and a custom
//! family given by closures. Positions are always reduced modulo one before
//! evaluation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default bound for the numeric Legendre maximization.
pub const DEFAULT_P_SEARCH_RADIUS: f64 = 8.0;

const FD_STEP: f64 = 1e-6;
const LEGENDRE_TOL: f64 = 1e-10;

/// Reduce a position to `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A smooth periodic potential given as a trigonometric polynomial
/// `V(x) = mean + Σ_k cos_k·cos(2πkx) + sin_k·sin(2πkx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Potential {
    pub fn zero() -> Self {
        Self { mean: 0.0, cos: Vec::new(), sin: Vec::new() }
    }

    /// `V(x) = −sin²(πx) = −½ + ½cos(2πx)`, maximal (zero) at `x = 0`.
    pub fn neg_sin_squared() -> Self {
        Self { mean: -0.5, cos: vec![0.5], sin: Vec::new() }
    }

    /// Build from a flat coefficient list `mean, a1, b1, a2, b2, ...`.
    pub fn from_coefficients(coeffs: &[f64]) -> Self {
        let mean = coeffs.first().copied().unwrap_or(0.0);
        let mut cos = Vec::new();
        let mut sin = Vec::new();
        for pair in coeffs.get(1..).unwrap_or(&[]).chunks(2) {
            cos.push(pair[0]);
            sin.push(pair.get(1).copied().unwrap_or(0.0));
        }
        Self { mean, cos, sin }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = vec![self.mean];
        for k in 0..self.cos.len().max(self.sin.len()) {
            out.push(self.cos.get(k).copied().unwrap_or(0.0));
            out.push(self.sin.get(k).copied().unwrap_or(0.0));
        }
        out
    }

    pub fn value(&self, x: f64) -> f64 {
        let mut v = self.mean;
        for (k, a) in self.cos.iter().enumerate() {
            v += a * (2.0 * PI * (k + 1) as f64 * x).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * (2.0 * PI * (k + 1) as f64 * x).sin();
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut d = 0.0;
        for (k, a) in self.cos.iter().enumerate() {
            let w = 2.0 * PI * (k + 1) as f64;
            d -= a * w * (w * x).sin();
        }
        for (k, b) in self.sin.iter().enumerate() {
            let w = 2.0 * PI * (k + 1) as f64;
            d += b * w * (w * x).cos();
        }
        d
    }

    /// Maximum over the circle, from a dense scan followed by golden-section
    /// refinement around the best sample.
    pub fn max(&self) -> (f64, f64) {
        let samples = 4096;
        let (mut best_x, mut best) = (0.0, f64::NEG_INFINITY);
        for i in 0..samples {
            let x = i as f64 / samples as f64;
            let v = self.value(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        let step = 1.0 / samples as f64;
        let x = golden_min(|x| -self.value(x), best_x - step, best_x + step, 1e-12);
        let v = self.value(x);
        if v > best {
            (wrap(x), v)
        } else {
            (best_x, best)
        }
    }
}

type Scalar2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closed-form evaluators for a user-supplied Hamiltonian. Missing
/// derivatives fall back to central differences with step `1e-6`.
#[derive(Clone)]
pub struct CustomHamiltonian {
    pub h: Scalar2,
    pub dh_dx: Option<Scalar2>,
    pub dh_dp: Option<Scalar2>,
    pub d2h_dp2: Option<Scalar2>,
}

impl CustomHamiltonian {
    pub fn new(h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { h: Arc::new(h), dh_dx: None, dh_dp: None, d2h_dp2: None }
    }

    pub fn with_dh_dx(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dh_dx = Some(Arc::new(f));
        self
    }

    pub fn with_dh_dp(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dh_dp = Some(Arc::new(f));
        self
    }

    pub fn with_d2h_dp2(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d2h_dp2 = Some(Arc::new(f));
        self
    }
}

impl fmt::Debug for CustomHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomHamiltonian")
            .field("dh_dx", &self.dh_dx.is_some())
            .field("dh_dp", &self.dh_dp.is_some())
            .field("d2h_dp2", &self.d2h_dp2.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// `½p² + V(x)`.
    Mechanical(Potential),
    /// `½(p + shift)² − amplitude·sin²(πx)`.
    TiltedPendulum { shift: f64, amplitude: f64 },
    Custom(CustomHamiltonian),
}

/// An evaluatable Tonelli Hamiltonian on `T¹ × ℝ`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub family: Family,
    pub p_search_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreResult {
    /// `L(x, v)`.
    pub value: f64,
    pub argmax_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonelliReport {
    pub min_hessian: f64,
    /// `min_x min(H(x, ±R)) − H(x, 0) − R`.
    pub superlinearity_margin: f64,
    pub pass: bool,
}

impl Hamiltonian {
    pub fn new(family: Family) -> Self {
        Self { family, p_search_radius: DEFAULT_P_SEARCH_RADIUS }
    }

    pub fn mechanical(v: Potential) -> Self {
        Self::new(Family::Mechanical(v))
    }

    pub fn free_particle() -> Self {
        Self::mechanical(Potential::zero())
    }

    /// `½(p+P)² − sin²(πx)`.
    pub fn tilted_pendulum(shift: f64) -> Self {
        Self::tilted_pendulum_with_amplitude(shift, 1.0)
    }

    pub fn tilted_pendulum_with_amplitude(shift: f64, amplitude: f64) -> Self {
        Self::new(Family::TiltedPendulum { shift, amplitude })
    }

    pub fn custom(c: CustomHamiltonian) -> Self {
        Self::new(Family::Custom(c))
    }

    pub fn with_p_search_radius(mut self, r: f64) -> Self {
        self.p_search_radius = r;
        self
    }

    /// `(p + shift, W(x))` split for families of the form `½(p+shift)² + W(x)`.
    pub(crate) fn separable(&self) -> Option<(f64, SeparablePotential<'_>)> {
        match &self.family {
            Family::Mechanical(v) => Some((0.0, SeparablePotential::Series(v))),
            Family::TiltedPendulum { shift, amplitude } => {
                Some((*shift, SeparablePotential::Pendulum(*amplitude)))
            }
            Family::Custom(_) => None,
        }
    }

    /// Unchecked evaluation, used in inner loops.
    #[inline]
    pub fn h(&self, x: f64, p: f64) -> f64 {
        let x = wrap(x);
        match &self.family {
            Family::Mechanical(v) => 0.5 * p * p + v.value(x),
            Family::TiltedPendulum { shift, amplitude } => {
                let s = (PI * x).sin();
                0.5 * (p + shift) * (p + shift) - amplitude * s * s
            }
            Family::Custom(c) => (c.h)(x, p),
        }
    }

    /// `H(x mod 1, p)`.
    pub fn eval(&self, x: f64, p: f64) -> Result<f64> {
        finite(self.h(x, p), x, p)
    }

    pub fn dh_dx(&self, x: f64, p: f64) -> f64 {
        let x = wrap(x);
        match &self.family {
            Family::Mechanical(v) => v.derivative(x),
            Family::TiltedPendulum { amplitude, .. } => -amplitude * PI * (2.0 * PI * x).sin(),
            Family::Custom(c) => match &c.dh_dx {
                Some(f) => f(x, p),
                None => ((c.h)(x + FD_STEP, p) - (c.h)(x - FD_STEP, p)) / (2.0 * FD_STEP),
            },
        }
    }

    pub fn dh_dp(&self, x: f64, p: f64) -> f64 {
        let x = wrap(x);
        match &self.family {
            Family::Mechanical(_) => p,
            Family::TiltedPendulum { shift, .. } => p + shift,
            Family::Custom(c) => match &c.dh_dp {
                Some(f) => f(x, p),
                None => ((c.h)(x, p + FD_STEP) - (c.h)(x, p - FD_STEP)) / (2.0 * FD_STEP),
            },
        }
    }

    pub fn d2h_dp2(&self, x: f64, p: f64) -> f64 {
        let x = wrap(x);
        match &self.family {
            Family::Mechanical(_) | Family::TiltedPendulum { .. } => 1.0,
            Family::Custom(c) => match &c.d2h_dp2 {
                Some(f) => f(x, p),
                None => {
                    // wider step keeps the second difference out of round-off
                    let e = 1e-4;
                    ((c.h)(x, p + e) - 2.0 * (c.h)(x, p) + (c.h)(x, p - e)) / (e * e)
                }
            },
        }
    }

    /// Hamiltonian vector field `(∂H/∂p, −∂H/∂x)`.
    pub fn vector_field(&self, x: f64, p: f64) -> Result<(f64, f64)> {
        let dx = self.dh_dp(x, p);
        let dp = -self.dh_dx(x, p);
        if dx.is_finite() && dp.is_finite() {
            Ok((dx, dp))
        } else {
            Err(Error::EvaluationDomain { x, p })
        }
    }

    /// `L(x, v) = max_p p·v − H(x, p)` by golden section on
    /// `[−R, R]` followed by Newton polish.
    pub fn legendre(&self, x: f64, v: f64) -> Result<LegendreResult> {
        let x = wrap(x);
        let r = self.p_search_radius;
        let boundary = Error::SuperlinearityRadius { x, v, radius: r };
        if !(self.dh_dp(x, -r) < v && v < self.dh_dp(x, r)) {
            return Err(boundary);
        }
        let mut p = golden_min(|p| self.h(x, p) - p * v, -r, r, 1e-9);
        for _ in 0..20 {
            let hpp = self.d2h_dp2(x, p);
            if !(hpp > 0.0) {
                break;
            }
            let step = (v - self.dh_dp(x, p)) / hpp;
            let next = (p + step).clamp(-r, r);
            let done = (next - p).abs() <= LEGENDRE_TOL;
            p = next;
            if done {
                break;
            }
        }
        if r - p.abs() <= 1e-8 * r {
            return Err(boundary);
        }
        let value = p * v - self.h(x, p);
        if !value.is_finite() {
            return Err(Error::EvaluationDomain { x, p });
        }
        Ok(LegendreResult { value, argmax_p: p })
    }

    /// `L(x, v)`, closed form for the built-in families.
    #[inline]
    pub fn lagrangian(&self, x: f64, v: f64) -> f64 {
        let x = wrap(x);
        match &self.family {
            Family::Mechanical(pot) => 0.5 * v * v - pot.value(x),
            Family::TiltedPendulum { shift, amplitude } => {
                let s = (PI * x).sin();
                0.5 * v * v - shift * v + amplitude * s * s
            }
            Family::Custom(_) => self.legendre(x, v).map(|l| l.value).unwrap_or(f64::INFINITY),
        }
    }

    /// Momentum conjugate to the velocity `v` at `x`.
    pub fn momentum(&self, x: f64, v: f64) -> Result<f64> {
        match &self.family {
            Family::Mechanical(_) => Ok(v),
            Family::TiltedPendulum { shift, .. } => Ok(v - shift),
            Family::Custom(_) => self.legendre(x, v).map(|l| l.argmax_p),
        }
    }

    /// Sampled Tonelli diagnostics on an `n × n` lattice of
    /// `T¹ × [−R, R]`.
    pub fn check_tonelli(&self, n_samples: usize) -> Result<TonelliReport> {
        if n_samples < 16 {
            return Err(Error::Config(format!("check_tonelli needs n_samples >= 16, got {n_samples}")));
        }
        let r = self.p_search_radius;
        let mut min_hessian = f64::INFINITY;
        let mut margin = f64::INFINITY;
        for i in 0..n_samples {
            let x = i as f64 / n_samples as f64;
            for j in 0..n_samples {
                let p = -r + 2.0 * r * j as f64 / (n_samples - 1) as f64;
                min_hessian = min_hessian.min(self.d2h_dp2(x, p));
            }
            let h0 = self.h(x, 0.0);
            let m = self.h(x, r).min(self.h(x, -r)) - h0 - r;
            margin = margin.min(m);
        }
        let pass = min_hessian > 1e-9 && margin > 0.0;
        Ok(TonelliReport { min_hessian, superlinearity_margin: margin, pass })
    }

    /// Largest value of `min_p H(x, p)` over the circle, a lower bound for
    /// the critical value.
    pub fn max_min_energy(&self) -> f64 {
        match &self.family {
            Family::Mechanical(v) => v.max().1,
            Family::TiltedPendulum { .. } => 0.0,
            Family::Custom(_) => (0..512)
                .map(|i| {
                    let x = i as f64 / 512.0;
                    let r = self.p_search_radius;
                    let p = golden_min(|p| self.h(x, p), -r, r, 1e-10);
                    self.h(x, p)
                })
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum SeparablePotential<'a> {
    Series(&'a Potential),
    Pendulum(f64),
}

impl SeparablePotential<'_> {
    #[inline]
    pub(crate) fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Series(v) => v.derivative(x),
            Self::Pendulum(a) => -a * PI * (2.0 * PI * x).sin(),
        }
    }
}

fn finite(v: f64, x: f64, p: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::EvaluationDomain { x, p })
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quartic() -> Hamiltonian {
        Hamiltonian::custom(CustomHamiltonian::new(|_, p| 0.25 * p.powi(4) + 0.5 * p * p))
    }

    #[test]
    fn eval_examples() {
        let pend = Hamiltonian::tilted_pendulum(0.0);
        assert_abs_diff_eq!(pend.eval(0.5, 0.0).unwrap(), -1.0, epsilon = 1e-15);
        let free = Hamiltonian::free_particle();
        assert_abs_diff_eq!(free.eval(0.3, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        let a = 2.0 / PI;
        let tilted = Hamiltonian::tilted_pendulum(a);
        assert_abs_diff_eq!(tilted.eval(0.0, -a).unwrap(), 0.0, epsilon = 1e-15);
        // x is reduced modulo one
        assert_abs_diff_eq!(pend.eval(1.5, 0.0).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pend.eval(-0.5, 0.0).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_is_a_domain_error() {
        let bad = Hamiltonian::custom(CustomHamiltonian::new(|_, p| 1.0 / (p - p)));
        assert!(matches!(bad.eval(0.1, 1.0), Err(Error::EvaluationDomain { .. })));
    }

    #[test]
    fn legendre_closed_forms() {
        let v = Potential::neg_sin_squared();
        let mech = Hamiltonian::mechanical(v.clone());
        for &(x, vel) in &[(0.1, 0.3), (0.7, -1.2), (0.0, 2.5)] {
            let l = mech.legendre(x, vel).unwrap();
            assert_abs_diff_eq!(l.value, 0.5 * vel * vel - v.value(x), epsilon = 1e-10);
            assert_abs_diff_eq!(l.argmax_p, vel, epsilon = 1e-9);
        }
        let p_shift = 0.7;
        let pend = Hamiltonian::tilted_pendulum(p_shift);
        for &(x, vel) in &[(0.25, 0.4), (0.6, -0.9)] {
            let l = pend.legendre(x, vel).unwrap();
            let s = (PI * x).sin();
            assert_abs_diff_eq!(l.value, 0.5 * vel * vel - p_shift * vel + s * s, epsilon = 1e-10);
            assert_abs_diff_eq!(l.argmax_p, vel - p_shift, epsilon = 1e-9);
            assert_abs_diff_eq!(pend.lagrangian(x, vel), l.value, epsilon = 1e-10);
        }
    }

    #[test]
    fn legendre_quartic_matches_brute_force_scan() {
        let h = quartic();
        let v = 3.0;
        let l = h.legendre(0.2, v).unwrap();
        // brute-force oracle: fine scan of p·v − H over [−8, 8]
        let steps = 1_600_000;
        let (mut best_p, mut best) = (0.0, f64::NEG_INFINITY);
        for k in 0..=steps {
            let p = -8.0 + 16.0 * k as f64 / steps as f64;
            let val = p * v - (0.25 * p.powi(4) + 0.5 * p * p);
            if val > best {
                best = val;
                best_p = p;
            }
        }
        assert_abs_diff_eq!(l.value, best, epsilon = 1e-6);
        assert_abs_diff_eq!(l.argmax_p, best_p, epsilon = 1e-5);
        // p³ + p = 3 has the root p = 1.2134116627622296
        assert_abs_diff_eq!(l.argmax_p, 1.213_411_662_762_229_6, epsilon = 1e-9);
    }

    #[test]
    fn legendre_reports_small_search_radius() {
        let h = Hamiltonian::free_particle().with_p_search_radius(1.0);
        assert!(matches!(h.legendre(0.0, 2.0), Err(Error::SuperlinearityRadius { .. })));
    }

    #[test]
    fn vector_field_examples() {
        let a = 0.4;
        let pend = Hamiltonian::tilted_pendulum(a);
        let (dx, dp) = pend.vector_field(0.0, -a).unwrap();
        assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dp, 0.0, epsilon = 1e-15);

        let free = Hamiltonian::free_particle();
        assert_eq!(free.vector_field(0.37, 1.25).unwrap(), (1.25, 0.0));

        let (dx, dp) = Hamiltonian::tilted_pendulum(0.0).vector_field(0.25, 0.0).unwrap();
        assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dp, PI, epsilon = 1e-12);
    }

    #[test]
    fn finite_difference_fallback_matches_closed_form() {
        let custom = Hamiltonian::custom(CustomHamiltonian::new(|x, p| {
            let s = (PI * x).sin();
            0.5 * (p + 0.3) * (p + 0.3) - s * s
        }));
        let pend = Hamiltonian::tilted_pendulum(0.3);
        for &(x, p) in &[(0.1, 0.2), (0.45, -1.0), (0.8, 0.9)] {
            let a = custom.vector_field(x, p).unwrap();
            let b = pend.vector_field(x, p).unwrap();
            assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-7);
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-6);
        }
    }

    #[test]
    fn tonelli_checks() {
        let r = Hamiltonian::tilted_pendulum(0.9).check_tonelli(32).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.min_hessian, 1.0);
        assert!(Hamiltonian::mechanical(Potential::neg_sin_squared()).check_tonelli(16).unwrap().pass);
        let abs = Hamiltonian::custom(CustomHamiltonian::new(|_, p: f64| p.abs()));
        assert!(!abs.check_tonelli(16).unwrap().pass);
        assert!(matches!(abs.check_tonelli(8), Err(Error::Config(_))));
    }

    #[test]
    fn potential_max() {
        let (x, v) = Potential::neg_sin_squared().max();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        assert!(!(1e-6..=1.0 - 1e-6).contains(&x));
        let p = Potential::from_coefficients(&[0.1, 0.0, 1.0]);
        let (x, v) = p.max();
        assert_abs_diff_eq!(x, 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 1.1, epsilon = 1e-10);
        assert_eq!(p.coefficients(), vec![0.1, 0.0, 1.0]);
    }

    #[test]
    fn double_conjugate_recovers_h() {
        let h = quartic();
        let x = 0.4;
        let vs: Vec<f64> = (0..=4000).map(|k| -30.0 + 60.0 * k as f64 / 4000.0).collect();
        let ls: Vec<f64> = vs.iter().map(|&v| h.legendre(x, v).unwrap().value).collect();
        for &p in &[-1.5, -0.3, 0.0, 0.8, 2.0] {
            let back = vs
                .iter()
                .zip(&ls)
                .map(|(v, l)| p * v - l)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(back, h.h(x, p), epsilon = 1e-3);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fenchel_equality(x in 0.0..1.0f64, v in -3.0..3.0f64, shift in -1.0..1.0f64) {
                for h in [Hamiltonian::tilted_pendulum(shift), quartic()] {
                    let l = h.legendre(x, v).unwrap();
                    prop_assert!((l.value + h.h(x, l.argmax_p) - l.argmax_p * v).abs() < 1e-8);
                    prop_assert!((h.dh_dp(x, l.argmax_p) - v).abs() < 1e-6);
                }
            }

            #[test]
            fn vector_field_preserves_energy(x in 0.0..1.0f64, p in -2.0..2.0f64) {
                let h = Hamiltonian::tilted_pendulum(0.3);
                let (dx, dp) = h.vector_field(x, p).unwrap();
                let e = 1e-6;
                let dir = (h.h(x + e * dx, p + e * dp) - h.h(x - e * dx, p - e * dp)) / (2.0 * e);
                prop_assert!(dir.abs() <= 1e-6);
            }
        }
    }
}
