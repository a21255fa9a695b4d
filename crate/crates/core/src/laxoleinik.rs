//! Forward and backward Lax-Oleinik semigroups on periodic grid functions,
//! the sub-solution test and the critical value estimator.
//!
//! One step of the forward semigroup is
//! `T_h u(x_i) = min_y u(y) + h·(c + L(midpoint, δ/h))` with `y` restricted to
//! the velocity window `|δ| ≤ v_max·h`. The backward semigroup reuses the
//! same kernel through `T̆_h u = −T⁻_h(−u)`, where `T⁻` is built on the
//! reversed Lagrangian `L(x, −v)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{compose_action, DEFAULT_V_MAX};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hamiltonian::{golden_min, Hamiltonian};

pub const DEFAULT_H_MAX: f64 = 0.05;
pub const DEFAULT_SAMPLES_PER_CELL: usize = 9;
/// Seed of the random `(x, y, t)` triples in [`subsolution_report`].
pub const REPORT_SEED: u64 = 0x5eed_0001;
pub const REPORT_TRIPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub v_max: f64,
    pub h_max: f64,
    pub samples_per_cell: usize,
    pub interpolation: Interpolation,
}

/// Interpolation of `u` at off-grid `y` inside the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Periodic cubic spline, linear on cells next to kinks.
    GuardedCubic,
    Linear,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            v_max: DEFAULT_V_MAX,
            h_max: DEFAULT_H_MAX,
            samples_per_cell: DEFAULT_SAMPLES_PER_CELL,
            interpolation: Interpolation::GuardedCubic,
        }
    }
}

/// Default sub-solution tolerance `1e-2·(1 + |c|)`.
pub fn default_tolerance(c: f64) -> f64 {
    1e-2 * (1.0 + c.abs())
}

fn check_step(u: &GridFunction, h: f64, cfg: &StepConfig) -> Result<()> {
    if !(h > 0.0 && h <= cfg.h_max) {
        return Err(Error::Config(format!("step h={h} outside (0, {}]", cfg.h_max)));
    }
    if cfg.v_max * h >= 0.5 {
        return Err(Error::Config("velocity window wider than half the circle".into()));
    }
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("input grid function is not finite".into()));
    }
    Ok(())
}

/// `min_y u(y) + h(c + L(mid, ±δ/h))` at every node; `reversed` uses
/// `L(x, −v)`.
fn min_plus_step(ham: &Hamiltonian, u: &GridFunction, h: f64, c: f64, reversed: bool, cfg: &StepConfig) -> GridFunction {
    let n = u.n();
    let spline = match cfg.interpolation {
        Interpolation::GuardedCubic => u.interpolant().with_kink_guard(&u.second_differences()),
        Interpolation::Linear => u.interpolant().all_linear(),
    };
    let width = cfg.v_max * h;
    let samples = ((2.0 * width * n as f64).ceil() as usize * cfg.samples_per_cell).max(16);
    let step = 2.0 * width / samples as f64;
    let sign = if reversed { -1.0 } else { 1.0 };

    let results: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / n as f64;
            let cost = |y: f64| -> f64 {
                let d = x - y;
                spline.eval(y) + h * (c + ham.lagrangian(0.5 * (x + y), sign * d / h))
            };
            let lo = x - width;
            let (mut best_k, mut best) = (0usize, f64::INFINITY);
            for k in 0..=samples {
                let v = cost(lo + k as f64 * step);
                if v < best {
                    best = v;
                    best_k = k;
                }
            }
            let hit = best_k == 0 || best_k == samples;
            let a = lo + best_k.saturating_sub(1) as f64 * step;
            let b = lo + (best_k + 1).min(samples) as f64 * step;
            let y = golden_min(cost, a, b, 1e-12);
            (best.min(cost(y)), hit)
        })
        .collect();
    if results.iter().any(|r| r.1) {
        log::warn!("Lax-Oleinik minimizer on the velocity window boundary (v_max={})", cfg.v_max);
    }
    GridFunction::from_raw(results.into_iter().map(|r| r.0).collect())
}

pub fn forward_step(ham: &Hamiltonian, u: &GridFunction, h: f64, c: f64) -> Result<GridFunction> {
    forward_step_with(ham, u, h, c, &StepConfig::default())
}

pub fn forward_step_with(ham: &Hamiltonian, u: &GridFunction, h: f64, c: f64, cfg: &StepConfig) -> Result<GridFunction> {
    check_step(u, h, cfg)?;
    Ok(min_plus_step(ham, u, h, c, false, cfg))
}

pub fn backward_step(ham: &Hamiltonian, u: &GridFunction, h: f64, c: f64) -> Result<GridFunction> {
    backward_step_with(ham, u, h, c, &StepConfig::default())
}

/// `T̆_h u = −T⁻_h(−u)`.
pub fn backward_step_with(ham: &Hamiltonian, u: &GridFunction, h: f64, c: f64, cfg: &StepConfig) -> Result<GridFunction> {
    check_step(u, h, cfg)?;
    Ok(min_plus_step(ham, &u.negated(), h, c, true, cfg).negated())
}

pub fn step(ham: &Hamiltonian, u: &GridFunction, h: f64, c: f64, dir: Direction, cfg: &StepConfig) -> Result<GridFunction> {
    match dir {
        Direction::Forward => forward_step_with(ham, u, h, c, cfg),
        Direction::Backward => backward_step_with(ham, u, h, c, cfg),
    }
}

/// `m`-fold composition of the step, `t = m·h`.
pub fn evolve(ham: &Hamiltonian, u: &GridFunction, t: f64, h: f64, c: f64, dir: Direction) -> Result<GridFunction> {
    evolve_with(ham, u, t, h, c, dir, &StepConfig::default())
}

pub fn evolve_with(
    ham: &Hamiltonian,
    u: &GridFunction,
    t: f64,
    h: f64,
    c: f64,
    dir: Direction,
    cfg: &StepConfig,
) -> Result<GridFunction> {
    let ratio = t / h;
    let m = ratio.round();
    if !(t >= 0.0) || !(h > 0.0) || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!("t={t} is not an integer multiple of h={h}")));
    }
    let mut out = u.clone();
    for _ in 0..m as usize {
        out = step(ham, &out, h, c, dir, cfg)?;
    }
    Ok(out)
}

/// Evolve for time `t` with the largest step `t/m ≤ h_max`.
pub fn evolve_by(
    ham: &Hamiltonian,
    u: &GridFunction,
    t: f64,
    h_max: f64,
    c: f64,
    dir: Direction,
    cfg: &StepConfig,
) -> Result<GridFunction> {
    if t == 0.0 {
        return Ok(u.clone());
    }
    let m = (t / h_max - 1e-9).ceil().max(1.0);
    evolve_with(ham, u, t, t / m, c, dir, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubSolutionReport {
    pub level: f64,
    /// `max_i H(x_i, Du(x_i)) − c`.
    pub max_residual: f64,
    pub worst_node: usize,
    /// `max u(y) − u(x) − A_t(x, y)` over the sampled triples.
    pub action_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Nodal residuals `H(x_i, Du(x_i)) − c`.
pub fn residuals(ham: &Hamiltonian, u: &GridFunction, c: f64) -> Vec<f64> {
    (0..u.n()).map(|i| ham.h(u.node(i), u.gradient(i)) - c).collect()
}

/// Nodal residual test only, without the action triples.
pub fn nodal_report(ham: &Hamiltonian, u: &GridFunction, c: f64, tol: f64) -> SubSolutionReport {
    let res = residuals(ham, u, c);
    let (worst_node, max_residual) = res
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    SubSolutionReport {
        level: c,
        max_residual,
        worst_node,
        action_violation: f64::NEG_INFINITY,
        tolerance: tol,
        pass: max_residual <= tol,
    }
}

/// Nodal residual test plus `u(y) − u(x) ≤ A_t(x, y) + tol` on 100 seeded
/// random triples.
pub fn subsolution_report(ham: &Hamiltonian, u: &GridFunction, c: f64, tol: f64) -> SubSolutionReport {
    let mut report = nodal_report(ham, u, c, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(REPORT_SEED);
    let triples: Vec<(f64, f64, f64)> = (0..REPORT_TRIPLES)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen_range(0.1..1.0)))
        .collect();
    let spline = u.interpolant();
    let violation = triples
        .par_iter()
        .map(|&(x, y, t)| {
            let steps = ((t / 0.05).ceil() as usize).max(2);
            match compose_action(ham, x, y, t, c, steps, 64, DEFAULT_V_MAX) {
                Ok(a) => spline.eval(y) - spline.eval(x) - a.value,
                Err(_) => f64::NEG_INFINITY,
            }
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    report.action_violation = violation;
    report.pass = report.pass && violation <= tol;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalEstimate {
    pub alpha: f64,
    /// Per-iteration mean shift `mean(u_k − u_{k−1})/h`.
    pub history: Vec<f64>,
    /// Estimate from the preceding window of the same length.
    pub previous_alpha: f64,
    pub converged: bool,
    /// Last iterate `u_m`, an approximate weak KAM solution.
    #[serde(skip)]
    pub iterate: GridFunction,
}

pub const CRITICAL_CONVERGENCE_TOL: f64 = 1e-2;

/// Iterate the forward step at level zero from `u ≡ 0` and read off the
/// mean drift over the last quarter of the iterations.
pub fn critical_value(ham: &Hamiltonian, n: usize, h: f64, m_iters: usize) -> Result<CriticalEstimate> {
    critical_value_with(ham, n, h, m_iters, &StepConfig::default())
}

pub fn critical_value_with(ham: &Hamiltonian, n: usize, h: f64, m_iters: usize, cfg: &StepConfig) -> Result<CriticalEstimate> {
    if m_iters < 100 {
        return Err(Error::Config(format!("critical_value needs m_iters >= 100, got {m_iters}")));
    }
    let r = m_iters / 4;
    let mut u = GridFunction::constant(n, 0.0)?;
    let mut means = vec![0.0];
    let mut history = Vec::with_capacity(m_iters);
    for _ in 0..m_iters {
        let next = forward_step_with(ham, &u, h, 0.0, cfg)?;
        let m = next.mean();
        history.push((m - means.last().unwrap()) / h);
        means.push(m);
        u = next;
    }
    let alpha = -(means[m_iters] - means[m_iters - r]) / (r as f64 * h);
    let previous_alpha = -(means[m_iters - r] - means[m_iters - 2 * r]) / (r as f64 * h);
    let converged = (alpha - previous_alpha).abs() <= CRITICAL_CONVERGENCE_TOL;
    if !converged {
        log::warn!("critical value estimate not converged: {alpha} vs previous window {previous_alpha}");
    }
    Ok(CriticalEstimate { alpha, history, previous_alpha, converged, iterate: u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Potential;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn trig(n: usize, a: f64, b: f64) -> GridFunction {
        GridFunction::from_fn(n, |x| a * (2.0 * PI * x).cos() + b * (4.0 * PI * x).sin()).unwrap()
    }

    #[test]
    fn constants_are_monotone_under_both_semigroups() {
        let v = Potential::neg_sin_squared();
        let c = v.max().1;
        let mech = Hamiltonian::mechanical(v);
        let u = GridFunction::constant(128, 2.5).unwrap();
        let f = forward_step(&mech, &u, 0.02, c).unwrap();
        let b = backward_step(&mech, &u, 0.02, c).unwrap();
        assert!(f.values().iter().all(|&v| v >= 2.5 - 1e-12));
        assert!(b.values().iter().all(|&v| v <= 2.5 + 1e-12));
    }

    #[test]
    fn additive_invariance() {
        let pend = Hamiltonian::tilted_pendulum(0.3);
        let u = trig(64, 0.05, 0.02);
        let a = forward_step(&pend, &u.shifted(7.0), 0.01, 0.1).unwrap();
        let b = forward_step(&pend, &u, 0.01, 0.1).unwrap().shifted(7.0);
        assert!(a.sup_distance(&b) < 1e-12);
    }

    #[test]
    fn symmetric_lagrangian_backward_is_negated_forward() {
        let free = Hamiltonian::free_particle();
        let u = trig(64, 0.03, -0.01);
        let b = backward_step(&free, &u, 0.02, 0.0).unwrap();
        let f = forward_step(&free, &u.negated(), 0.02, 0.0).unwrap().negated();
        assert!(b.sup_distance(&f) < 1e-13);
    }

    #[test]
    fn opening_and_closing_bracket_the_input() {
        // T̆_h T_h u ≤ u ≤ T_h T̆_h u
        let pend = Hamiltonian::tilted_pendulum(0.2);
        let u = trig(64, 0.04, 0.03);
        let bf = backward_step(&pend, &forward_step(&pend, &u, 0.02, 0.0).unwrap(), 0.02, 0.0).unwrap();
        let fb = forward_step(&pend, &backward_step(&pend, &u, 0.02, 0.0).unwrap(), 0.02, 0.0).unwrap();
        for i in 0..64 {
            assert!(bf.values()[i] <= u.values()[i] + 1e-6, "{} {}", bf.values()[i], u.values()[i]);
            assert!(fb.values()[i] >= u.values()[i] - 1e-6, "{} {}", fb.values()[i], u.values()[i]);
        }
    }

    #[test]
    fn evolve_requires_integer_multiple() {
        let free = Hamiltonian::free_particle();
        let u = GridFunction::constant(64, 0.0).unwrap();
        assert!(evolve(&free, &u, 0.025, 0.01, 0.0, Direction::Forward).is_err());
        assert!(evolve(&free, &u, 0.03, 0.01, 0.0, Direction::Forward).is_ok());
        assert!(forward_step(&free, &u, 0.2, 0.0).is_err());
    }

    #[test]
    fn reports() {
        let mech = Hamiltonian::mechanical(Potential::neg_sin_squared());
        let u = GridFunction::constant(128, 1.0).unwrap();
        let r = subsolution_report(&mech, &u, 0.0, default_tolerance(0.0));
        assert!(r.pass, "{r:?}");
        assert_abs_diff_eq!(r.max_residual, 0.0, epsilon = 1e-12);
        assert_eq!(r.worst_node, 0);

        let free = Hamiltonian::free_particle();
        let s = GridFunction::from_fn(256, |x| (2.0 * PI * x).sin()).unwrap();
        let r = subsolution_report(&free, &s, 0.1, default_tolerance(0.1));
        assert!(!r.pass);
        assert_abs_diff_eq!(r.max_residual, 0.5 * (2.0 * PI).powi(2) - 0.1, epsilon = 0.01);
    }

    #[test]
    fn critical_value_needs_enough_iterations() {
        let free = Hamiltonian::free_particle();
        assert!(critical_value(&free, 64, 0.01, 50).is_err());
        let est = critical_value(&free, 64, 0.01, 100).unwrap();
        assert_abs_diff_eq!(est.alpha, 0.0, epsilon = 1e-12);
        assert_eq!(est.history.len(), 100);
        assert!(est.converged);
    }
}
