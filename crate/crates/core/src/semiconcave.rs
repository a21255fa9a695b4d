//! Discrete semi-concavity and semi-convexity on the circle.
//!
//! `u` is K-semi-concave when `u(z) ≤ u(x) + p·(z−x) + K·(z−x)²` for some `p`
//! at every `x`; on a grid the best constant is read off the second
//! differences. All distances are periodic; the super-differential is taken
//! over the window `|z − x| ≤ ¼`.

use rayon::prelude::*;
use serde::Serialize;

use crate::action::periodic_displacement;
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// A constant counts as diverging when it grows by more than this factor
/// from `n/2` to `n`.
pub const REFINEMENT_RATIO: f64 = 1.5;
/// Constants below this level are never reported as diverging.
pub const REFINEMENT_FLOOR: f64 = 1.0;
pub const SUPERDIFFERENTIAL_WINDOW: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityProfile {
    /// `(u[i+1] − 2u[i] + u[i−1])·n²`.
    pub second_differences: Vec<f64>,
    pub k_plus: f64,
    pub k_minus: f64,
    pub stable: bool,
}

fn constants(d2: &[f64]) -> (f64, f64) {
    let hi = d2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = d2.iter().copied().fold(f64::INFINITY, f64::min);
    ((0.5 * hi).max(0.0), (-0.5 * lo).max(0.0))
}

/// `fine ≤ 1.5·max(coarse, 1)`.
pub fn refinement_stable(coarse: f64, fine: f64) -> bool {
    fine.is_finite() && fine <= REFINEMENT_RATIO * coarse.max(REFINEMENT_FLOOR)
}

/// `(k_plus, k_minus)` of a grid function.
pub fn semiconcavity_constants(u: &GridFunction) -> (f64, f64) {
    constants(&u.second_differences())
}

pub fn regularity_profile(u: &GridFunction) -> RegularityProfile {
    let second_differences = u.second_differences();
    let (k_plus, k_minus) = constants(&second_differences);
    let (cp, cm) = semiconcavity_constants(&u.downsample());
    let stable = refinement_stable(cp, k_plus) && refinement_stable(cm, k_minus);
    RegularityProfile { second_differences, k_plus, k_minus, stable }
}

/// Slopes `p` admissible at `x_i` for the constant `K`; `lo > hi` means empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// `{p : u(z) − u(x_i) ≤ p·(z−x_i) + K(z−x_i)²}` over grid nodes `z` within a
/// quarter period of `x_i`.
pub fn superdifferential_interval(u: &GridFunction, i: usize, k: f64) -> Interval {
    let n = u.n();
    let w = (SUPERDIFFERENTIAL_WINDOW * n as f64).floor() as isize;
    let ui = u.values()[i];
    let dx = u.spacing();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for j in 1..=w {
        let d = j as f64 * dx;
        // z to the right bounds p from below, z to the left from above
        let right = (u.at(i as isize + j) - ui - k * d * d) / d;
        let left = (u.at(i as isize - j) - ui - k * d * d) / -d;
        lo = lo.max(right);
        hi = hi.min(left);
    }
    Interval { lo, hi }
}

/// `f(z) = value + p·d(z, center) + K·d(z, center)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadratic {
    pub center: f64,
    pub value: f64,
    pub slope: f64,
    pub k: f64,
}

impl Quadratic {
    pub fn eval(&self, z: f64) -> f64 {
        let d = periodic_displacement(self.center, z);
        self.value + self.slope * d + self.k * d * d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub quadratics: Vec<Quadratic>,
    /// `sup |u − min f|` over nodes and cell midpoints, where `u` at a
    /// midpoint is the average of its neighbours.
    pub reconstruction_error: f64,
}

impl Envelope {
    pub fn eval(&self, z: f64) -> f64 {
        self.quadratics.iter().map(|q| q.eval(z)).fold(f64::INFINITY, f64::min)
    }
}

/// Represents `u` as the minimum of quadratics with curvature `K`, one per
/// node with a nonempty super-differential. Fails with [`Error::KTooSmall`]
/// when the reconstruction error exceeds `1/n`.
pub fn quadratic_envelope(u: &GridFunction, k: f64) -> Result<Envelope> {
    let n = u.n();
    let quadratics: Vec<Quadratic> = (0..n)
        .filter_map(|i| {
            let iv = superdifferential_interval(u, i, k);
            (!iv.is_empty()).then(|| Quadratic {
                center: u.node(i),
                value: u.values()[i],
                slope: iv.midpoint(),
                k,
            })
        })
        .collect();
    let env = Envelope { quadratics, reconstruction_error: 0.0 };
    let reconstruction_error = if env.quadratics.is_empty() {
        f64::INFINITY
    } else {
        (0..2 * n)
            .into_par_iter()
            .map(|j| {
                let z = j as f64 / (2 * n) as f64;
                let target = if j % 2 == 0 {
                    u.values()[j / 2]
                } else {
                    0.5 * (u.values()[j / 2] + u.at(j as isize / 2 + 1))
                };
                (env.eval(z) - target).abs()
            })
            .reduce(|| 0.0, f64::max)
    };
    let tolerance = 1.0 / n as f64;
    if reconstruction_error > tolerance {
        return Err(Error::KTooSmall { error: reconstruction_error, tolerance });
    }
    Ok(Envelope { reconstruction_error, ..env })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C11Verdict {
    pub pass: bool,
    pub k_plus: f64,
    pub k_minus: f64,
}

/// `C^{1,1}` at grid level: both constants finite and stable under refinement.
pub fn c11_test(u: &GridFunction) -> C11Verdict {
    let p = regularity_profile(u);
    C11Verdict {
        pass: p.stable && p.k_plus.is_finite() && p.k_minus.is_finite(),
        k_plus: p.k_plus,
        k_minus: p.k_minus,
    }
}

/// Curvature jump across `x0` together with the largest `|Δ²|/2` away from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureJump {
    /// Mean `Δ²` on `(x0 + inner, x0 + outer]` minus the mean on
    /// `[x0 − outer, x0 − inner)`.
    pub jump: f64,
    /// `max |Δ²|/2` over nodes farther than `inner` from `x0`.
    pub max_elsewhere: f64,
}

pub fn curvature_jump(u: &GridFunction, x0: f64, inner: f64, outer: f64) -> CurvatureJump {
    let d2 = u.second_differences();
    let (mut right, mut nr, mut left, mut nl) = (0.0, 0, 0.0, 0);
    let mut max_elsewhere: f64 = 0.0;
    for (i, &v) in d2.iter().enumerate() {
        let d = periodic_displacement(x0, u.node(i));
        if d.abs() > inner {
            max_elsewhere = max_elsewhere.max(0.5 * v.abs());
            if d > 0.0 && d <= outer {
                right += v;
                nr += 1;
            } else if d < 0.0 && d >= -outer {
                left += v;
                nl += 1;
            }
        }
    }
    let jump = if nr == 0 || nl == 0 { f64::NAN } else { right / nr as f64 - left / nl as f64 };
    CurvatureJump { jump, max_elsewhere }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::circle_distance;
    use std::f64::consts::PI;

    fn critical_pendulum(n: usize) -> GridFunction {
        GridFunction::from_fn(n, |x| (1.0 - (PI * x).cos()) / PI - 2.0 * x / PI).unwrap()
    }

    #[test]
    fn cosine_constants() {
        let u = GridFunction::from_fn(512, |x| (2.0 * PI * x).cos()).unwrap();
        let p = regularity_profile(&u);
        let k = 2.0 * PI * PI;
        assert!((p.k_plus - k).abs() <= 0.02 * k);
        assert!((p.k_minus - k).abs() <= 0.02 * k);
        assert!(p.stable);
        assert!(c11_test(&u).pass);
    }

    #[test]
    fn pendulum_critical_solution_is_c11_not_c2() {
        let u = critical_pendulum(512);
        let p = regularity_profile(&u);
        assert!((p.k_plus - PI / 2.0).abs() <= 0.05 * PI / 2.0, "{}", p.k_plus);
        assert!((p.k_minus - PI / 2.0).abs() <= 0.05 * PI / 2.0, "{}", p.k_minus);
        assert!(p.stable);
        let j = curvature_jump(&u, 0.0, 0.02, 0.05);
        assert!(j.jump >= PI, "{j:?}");
        assert!(j.max_elsewhere <= PI / 2.0 * 1.1);
        assert!(c11_test(&u).pass);
    }

    #[test]
    fn concave_kink_breaks_semiconvexity() {
        // −d(·,0) also has an upward kink at ½ on the circle
        let u = GridFunction::from_fn(512, |x| -circle_distance(x, 0.0)).unwrap();
        let p = regularity_profile(&u);
        assert!((p.k_minus - 512.0).abs() < 1e-6);
        assert!(!p.stable);
        assert!(!c11_test(&u).pass);
        let coarse = regularity_profile(&GridFunction::from_fn(256, |x| -circle_distance(x, 0.0)).unwrap());
        assert!((p.k_minus / coarse.k_minus - 2.0).abs() < 1e-9);
        let d2 = &p.second_differences;
        let positive: Vec<usize> = (0..512).filter(|&i| d2[i] > 1e-6).collect();
        assert_eq!(positive, vec![256]);
    }

    #[test]
    fn superdifferential_of_smooth_function_contains_gradient() {
        let u = GridFunction::from_fn(512, |x| (2.0 * PI * x).sin()).unwrap();
        let k = regularity_profile(&u).k_plus;
        for i in [3, 100, 200, 400] {
            let loose = superdifferential_interval(&u, i, 2.0 * k);
            let tight = superdifferential_interval(&u, i, k);
            let g = u.gradient(i);
            assert!(loose.contains(g) && tight.contains(g), "{i}: {loose:?} {tight:?} {g}");
            assert!(tight.hi - tight.lo <= loose.hi - loose.lo);
            assert!(tight.hi - tight.lo <= 4.0 * k / 512.0 + 1e-9);
        }
    }

    #[test]
    fn superdifferential_at_kinks() {
        let peak = GridFunction::from_fn(512, |x| -circle_distance(x, 0.0)).unwrap();
        let iv = superdifferential_interval(&peak, 0, 0.0);
        assert!((iv.lo + 1.0).abs() < 1e-12 && (iv.hi - 1.0).abs() < 1e-12, "{iv:?}");
        let valley = peak.negated();
        for k in [0.0, 10.0, 100.0] {
            assert!(superdifferential_interval(&valley, 0, k).is_empty());
        }
    }

    #[test]
    fn envelope_reconstructs_cosine() {
        let u = GridFunction::from_fn(512, |x| (2.0 * PI * x).cos()).unwrap();
        let env = quadratic_envelope(&u, 2.0 * PI * PI).unwrap();
        assert!(env.reconstruction_error <= 1e-3);
        assert_eq!(env.quadratics.len(), 512);
        // independent brute-force minimum at off-grid points
        for z in [0.013, 0.377, 0.9001] {
            let m = env.quadratics.iter().map(|q| q.eval(z)).fold(f64::INFINITY, f64::min);
            assert!((m - (2.0 * PI * z).cos()).abs() < 1e-3);
        }
    }

    #[test]
    fn envelope_of_constant_is_exact() {
        let u = GridFunction::constant(64, 3.0).unwrap();
        let env = quadratic_envelope(&u, 0.0).unwrap();
        assert_eq!(env.reconstruction_error, 0.0);
    }

    #[test]
    fn envelope_of_tent_with_its_own_constant() {
        let u = GridFunction::from_fn(512, |x| -circle_distance(x, 0.0)).unwrap();
        let k = regularity_profile(&u).k_plus;
        let env = quadratic_envelope(&u, k).unwrap();
        assert!(env.reconstruction_error <= 1.0 / 512.0);
    }

    #[test]
    fn envelope_with_too_small_constant_fails() {
        let u = GridFunction::from_fn(512, |x| (2.0 * PI * x).cos()).unwrap();
        assert!(matches!(quadratic_envelope(&u, 1.0), Err(Error::KTooSmall { .. })));
    }

    #[test]
    fn min_of_semiconcave_functions() {
        let a = GridFunction::from_fn(256, |x| (2.0 * PI * x).cos()).unwrap();
        let b = GridFunction::from_fn(256, |x| (2.0 * PI * x).sin()).unwrap();
        let k = semiconcavity_constants(&a).0.max(semiconcavity_constants(&b).0);
        let m = GridFunction::new(a.values().iter().zip(b.values()).map(|(x, y)| x.min(*y)).collect()).unwrap();
        assert!(semiconcavity_constants(&m).0 <= k + 1e-9);
    }
}
