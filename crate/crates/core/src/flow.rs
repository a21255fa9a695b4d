//! Hamiltonian flow `ψ_t` on the cylinder, transport of Lagrangian graphs
//! and the checks built on it.
//!
//! Built-in families split as `½(p + shift)² + W(x)` and are integrated with
//! the Störmer-Verlet leapfrog; custom Hamiltonians use classical RK4.
//! Positions are carried lifted to `ℝ` so the winding is never lost.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hamiltonian::{wrap, Hamiltonian};
use crate::laxoleinik::{evolve_by, Direction, StepConfig};

pub const MAX_DT: f64 = 1e-2;
/// Energy drift allowed per unit time at `dt = 1e-3`.
pub const ENERGY_TOL_PER_UNIT_TIME: f64 = 1e-6;
/// Integration is aborted when the drift exceeds this multiple of the
/// tolerance.
pub const ENERGY_ABORT_FACTOR: f64 = 100.0;
/// Transported positions closer than this count as a fold.
pub const GRAPH_MARGIN: f64 = 1e-9;
pub const BREAK_TIME_TOL: f64 = 1e-3;
/// Time step of the semigroup evolutions inside the graph checks.
const EVOLVE_H: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowState {
    /// Lifted position; `floor(x)` is the winding count.
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

impl FlowState {
    pub fn position(&self) -> f64 {
        wrap(self.x)
    }

    pub fn winding(&self) -> i64 {
        self.x.floor() as i64
    }
}

/// Energy tolerance for a run of length `t` with step `dt`, scaled with the
/// second-order error of the integrators.
pub fn energy_tolerance(t: f64, dt: f64) -> f64 {
    ENERGY_TOL_PER_UNIT_TIME * t.abs().max(1.0) * (dt / 1e-3).powi(2).max(1.0)
}

struct Stepper<'a> {
    ham: &'a Hamiltonian,
    dt: f64,
}

impl Stepper<'_> {
    #[inline]
    fn step(&self, x: f64, p: f64) -> (f64, f64) {
        let dt = self.dt;
        if let Some((shift, w)) = self.ham.separable() {
            let half = p - 0.5 * dt * w.derivative(x);
            let x = x + dt * (half + shift);
            (x, half - 0.5 * dt * w.derivative(x))
        } else {
            let f = |x: f64, p: f64| (self.ham.dh_dp(x, p), -self.ham.dh_dx(x, p));
            let (a1, b1) = f(x, p);
            let (a2, b2) = f(x + 0.5 * dt * a1, p + 0.5 * dt * b1);
            let (a3, b3) = f(x + 0.5 * dt * a2, p + 0.5 * dt * b2);
            let (a4, b4) = f(x + dt * a3, p + dt * b3);
            (
                x + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
                p + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            )
        }
    }
}

fn plan(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Config(format!("dt={dt} outside (0, {MAX_DT}]")));
    }
    if !t.is_finite() {
        return Err(Error::Config("non-finite integration time".into()));
    }
    let m = (t.abs() / dt - 1e-9).ceil().max(0.0) as usize;
    Ok((m, if m == 0 { 0.0 } else { t / m as f64 }))
}

/// Runs the flow for `t` (negative for backward) and calls `visit` on every
/// state including the initial one.
fn run(
    ham: &Hamiltonian,
    x0: f64,
    p0: f64,
    t: f64,
    dt: f64,
    mut visit: impl FnMut(&FlowState),
) -> Result<FlowState> {
    let (m, h) = plan(t, dt)?;
    let stepper = Stepper { ham, dt: h };
    let e0 = ham.eval(x0, p0)?;
    let limit = ENERGY_ABORT_FACTOR * energy_tolerance(t, dt);
    let mut s = FlowState { x: x0, p: p0, t: 0.0 };
    visit(&s);
    for k in 1..=m {
        let (x, p) = stepper.step(s.x, s.p);
        s = FlowState { x, p, t: k as f64 * h };
        let drift = (ham.h(x, p) - e0).abs();
        if !(drift <= limit) {
            return Err(Error::Integrator { drift, limit });
        }
        visit(&s);
    }
    Ok(s)
}

/// Trajectory of `ψ_t(x0, p0)` sampled at every step.
pub fn integrate(ham: &Hamiltonian, x0: f64, p0: f64, t: f64, dt: f64) -> Result<Vec<FlowState>> {
    let mut out = Vec::new();
    run(ham, x0, p0, t, dt, |s| out.push(*s))?;
    let e0 = ham.h(x0, p0);
    let drift = out.iter().map(|s| (ham.h(s.x, s.p) - e0).abs()).fold(0.0, f64::max);
    if drift > energy_tolerance(t, dt) {
        log::warn!("energy drift {drift:e} above tolerance {:e}", energy_tolerance(t, dt));
    }
    Ok(out)
}

/// End point of `ψ_t(x, p)` with lifted position.
pub fn flow_point(ham: &Hamiltonian, x: f64, p: f64, t: f64, dt: f64) -> Result<(f64, f64)> {
    let s = run(ham, x, p, t, dt, |_| {})?;
    Ok((s.x, s.p))
}

pub fn flow_points(ham: &Hamiltonian, points: &[(f64, f64)], t: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
    points.par_iter().map(|&(x, p)| flow_point(ham, x, p, t, dt)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportedGraph {
    /// `ψ_s(x_i, Df(x_i))` with lifted positions.
    pub samples: Vec<(f64, f64)>,
    pub is_graph: bool,
    pub s: f64,
    /// Transported momenta resampled at the grid nodes, when `is_graph`.
    pub momenta: Option<GridFunction>,
}

/// Strictly increasing lifted positions with total winding one.
pub fn is_graph(xs: &[f64]) -> bool {
    let Some((&first, &last)) = xs.first().zip(xs.last()) else {
        return false;
    };
    xs.windows(2).all(|w| w[1] - w[0] > GRAPH_MARGIN) && first + 1.0 - last > GRAPH_MARGIN
}

/// Linear interpolation of a transported graph at the nodes of an `n` grid.
fn resample_graph(samples: &[(f64, f64)], n: usize) -> Result<GridFunction> {
    let x0 = samples[0].0;
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut ps: Vec<f64> = samples.iter().map(|s| s.1).collect();
    xs.push(x0 + 1.0);
    ps.push(samples[0].1);
    GridFunction::from_fn(n, |x| {
        let z = x0 + wrap(x - x0);
        let j = xs.partition_point(|&v| v <= z).clamp(1, xs.len() - 1);
        let w = (z - xs[j - 1]) / (xs[j] - xs[j - 1]);
        (1.0 - w) * ps[j - 1] + w * ps[j]
    })
}

fn transport_points(ham: &Hamiltonian, points: &[(f64, f64)], s: f64, dt: f64, n: usize) -> Result<TransportedGraph> {
    let samples = flow_points(ham, points, s, dt)?;
    let xs: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let graph = is_graph(&xs);
    let momenta = if graph { Some(resample_graph(&samples, n)?) } else { None };
    Ok(TransportedGraph { samples, is_graph: graph, s, momenta })
}

fn graph_points(f: &GridFunction) -> Vec<(f64, f64)> {
    (0..f.n()).map(|i| (f.node(i), f.gradient(i))).collect()
}

/// Flows the graph `{(x_i, Df(x_i))}` for time `s`.
pub fn graph_transport(ham: &Hamiltonian, f: &GridFunction, s: f64, dt: f64) -> Result<TransportedGraph> {
    transport_points(ham, &graph_points(f), s, dt, f.n())
}

/// First time in `(0, s_max]` at which the transported graph folds, by
/// bisection to [`BREAK_TIME_TOL`]; `s_max` when it never does.
pub fn graph_break_time(ham: &Hamiltonian, f: &GridFunction, s_max: f64, dt: f64) -> Result<f64> {
    let points = graph_points(f);
    let graph_at = |s: f64| -> Result<bool> {
        let samples = flow_points(ham, &points, s, dt)?;
        Ok(is_graph(&samples.iter().map(|p| p.0).collect::<Vec<_>>()))
    };
    if graph_at(s_max)? {
        return Ok(s_max);
    }
    let (mut lo, mut hi) = (0.0, s_max);
    while hi - lo > BREAK_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if graph_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `max_i |T_s f(x_i(s)) − f(x_i) − ∫₀ˢ c + L(x, ẋ)|` along the
/// characteristics started on the graph of `Df`.
pub fn variational_consistency(ham: &Hamiltonian, f: &GridFunction, s: f64, c: f64, dt: f64) -> Result<f64> {
    let tf = evolve_by(ham, f, s, EVOLVE_H, c, Direction::Forward, &StepConfig::default())?;
    let spline = tf.interpolant();
    let gaps: Result<Vec<f64>> = (0..f.n())
        .into_par_iter()
        .map(|i| {
            let (x, p) = (f.node(i), f.gradient(i));
            let lagrangian = |s: &FlowState| {
                let v = ham.dh_dp(s.x, s.p);
                s.p * v - ham.h(s.x, s.p)
            };
            let mut integral = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            let end = run(ham, x, p, s, dt, |st| {
                let l = c + lagrangian(st);
                if let Some((t0, l0)) = prev {
                    integral += 0.5 * (st.t - t0) * (l + l0);
                }
                prev = Some((st.t, l));
            })?;
            Ok((spline.eval(end.x) - f.values()[i] - integral).abs())
        })
        .collect();
    Ok(gaps?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorollaryReport {
    /// `sup |p − Du(x)|` over `ψ_t(Γ_{T̆_t u})`.
    pub forward_distance: f64,
    /// Same for `ψ_{−t}(Γ_{T_t u})`.
    pub backward_distance: f64,
}

impl CorollaryReport {
    pub fn max(&self) -> f64 {
        self.forward_distance.max(self.backward_distance)
    }
}

/// Compares `ψ_t(Γ_{T̆_t u})` and `ψ_{−t}(Γ_{T_t u})` against `Γ_u`.
pub fn corollary_check(ham: &Hamiltonian, u: &GridFunction, t: f64, c: f64, dt: f64) -> Result<CorollaryReport> {
    let cfg = StepConfig::default();
    let distance = |dir: Direction, sign: f64| -> Result<f64> {
        let v = evolve_by(ham, u, t, EVOLVE_H, c, dir, &cfg)?;
        let g = graph_transport(ham, &v, sign * t, dt)?;
        if !g.is_graph {
            return Err(Error::CorollaryScale(t));
        }
        Ok(g.samples.iter().map(|&(x, p)| (p - u.gradient_at(x)).abs()).fold(0.0, f64::max))
    };
    Ok(CorollaryReport {
        forward_distance: distance(Direction::Backward, 1.0)?,
        backward_distance: distance(Direction::Forward, -1.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::CustomHamiltonian;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn hyperbolic_fixed_point_is_fixed() {
        for p in [0.0, 0.3, 2.0 / PI, 1.0] {
            let h = Hamiltonian::tilted_pendulum(p);
            let tr = integrate(&h, 0.0, -p, 3.0, 1e-3).unwrap();
            let last = tr.last().unwrap();
            assert!(last.x.abs() < 1e-14 && (last.p + p).abs() < 1e-14);
        }
    }

    #[test]
    fn free_particle_moves_straight() {
        let tr = integrate(&Hamiltonian::free_particle(), 0.2, 0.5, 1.0, 1e-3).unwrap();
        let last = tr.last().unwrap();
        assert!((last.x - 0.7).abs() < 1e-12 && (last.p - 0.5).abs() < 1e-15);
        assert!((last.t - 1.0).abs() < 1e-12);
        assert_eq!(tr.len(), 1001);
    }

    #[test]
    fn winding_is_tracked() {
        let tr = integrate(&Hamiltonian::free_particle(), 0.9, 1.0, 1.5, 1e-3).unwrap();
        let last = tr.last().unwrap();
        assert_eq!(last.winding(), 2);
        assert!((last.position() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn pendulum_energy_is_conserved() {
        let h = Hamiltonian::tilted_pendulum(0.0);
        let tr = integrate(&h, 0.5, 0.0, 10.0, 1e-3).unwrap();
        for s in &tr {
            assert!((h.h(s.x, s.p) + 1.0).abs() <= 1e-6 * 10.0);
        }
        let drift = tr.iter().map(|s| (h.h(s.x, s.p) + 1.0).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-6, "{drift}");
    }

    #[test]
    fn rk4_matches_leapfrog_on_custom_copy() {
        let custom = Hamiltonian::custom(
            CustomHamiltonian::new(|x, p| 0.5 * (p + 0.3) * (p + 0.3) - (PI * x).sin().powi(2))
                .with_dh_dp(|_, p| p + 0.3)
                .with_dh_dx(|x, _| -PI * (2.0 * PI * x).sin()),
        );
        let builtin = Hamiltonian::tilted_pendulum(0.3);
        let a = flow_point(&custom, 0.21, 0.4, 1.0, 1e-3).unwrap();
        let b = flow_point(&builtin, 0.21, 0.4, 1.0, 1e-4).unwrap();
        assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
    }

    #[test]
    fn rejects_large_dt() {
        assert!(matches!(integrate(&Hamiltonian::free_particle(), 0.0, 0.0, 1.0, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn flat_graph_stays_a_graph() {
        let f = GridFunction::constant(64, 0.0).unwrap();
        let g = graph_transport(&Hamiltonian::free_particle(), &f, 2.0, 1e-2).unwrap();
        assert!(g.is_graph);
        assert!(g.momenta.unwrap().values().iter().all(|&p| p.abs() < 1e-15));
        let s0 = graph_break_time(&Hamiltonian::free_particle(), &f, 1.0, 1e-2).unwrap();
        assert_eq!(s0, 1.0);
    }

    fn cosine(n: usize, eps: f64) -> GridFunction {
        GridFunction::from_fn(n, |x| eps * (2.0 * PI * x).cos() / (2.0 * PI)).unwrap()
    }

    #[test]
    fn cosine_graph_breaks_at_focal_time() {
        let free = Hamiltonian::free_particle();
        let f = cosine(512, 0.05);
        let s0 = 1.0 / (2.0 * PI * 0.05);
        assert!(graph_transport(&free, &f, 0.95 * s0, 1e-2).unwrap().is_graph);
        assert!(!graph_transport(&free, &f, 1.05 * s0, 1e-2).unwrap().is_graph);
        let est = graph_break_time(&free, &f, 5.0, 1e-2).unwrap();
        assert!((est - s0).abs() <= 1e-2, "{est} vs {s0}");
        let est2 = graph_break_time(&free, &cosine(512, 0.1), 5.0, 1e-2).unwrap();
        assert!((est2 - est / 2.0).abs() <= 1e-2);
    }

    #[test]
    fn variational_identity_for_cosine() {
        let free = Hamiltonian::free_particle();
        let s0 = 1.0 / (2.0 * PI * 0.05);
        let r = variational_consistency(&free, &cosine(512, 0.05), s0 / 2.0, 0.0, 1e-3).unwrap();
        assert!(r <= 1e-2, "{r}");
    }

    #[test]
    fn variational_identity_for_constant() {
        let h = Hamiltonian::tilted_pendulum(0.2);
        let f = GridFunction::constant(64, 1.0).unwrap();
        let r = variational_consistency(&h, &f, 0.1, 0.7, 1e-3).unwrap();
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn corollary_for_constant() {
        let f = GridFunction::constant(128, 0.4).unwrap();
        let r = corollary_check(&Hamiltonian::free_particle(), &f, 0.05, 0.0, 1e-3).unwrap();
        assert!(r.max() < 1e-12);
    }

    #[test]
    fn corollary_for_cosine() {
        let f = cosine(256, 0.5);
        let free = Hamiltonian::free_particle();
        assert!(corollary_check(&free, &f, 0.1, 1.0, 1e-3).unwrap().max() < 0.05);
    }

    #[test]
    fn critical_graph_is_invariant() {
        let a = 2.0 / PI;
        let h = Hamiltonian::tilted_pendulum_with_amplitude(a, 0.5);
        let f = GridFunction::from_fn(512, |x| (1.0 - (PI * x).cos()) / PI - a * x).unwrap();
        let g = graph_transport(&h, &f, 0.2, 1e-3).unwrap();
        assert!(g.is_graph);
        for &(x, p) in &g.samples {
            assert!((p - ((PI * x).sin() - a)).abs() <= 1e-2);
        }
        let r = variational_consistency(&h, &f, 0.1, 0.0, 1e-3).unwrap();
        assert!(r <= 1e-2, "{r}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn reversibility(x in 0.0..1.0f64, p in -2.0..2.0f64, shift in -1.0..1.0f64) {
            let h = Hamiltonian::tilted_pendulum(shift);
            let (x1, p1) = flow_point(&h, x, p, 0.5, 1e-3).unwrap();
            let (x2, p2) = flow_point(&h, x1, p1, -0.5, 1e-3).unwrap();
            prop_assert!((x2 - x).abs() < 1e-6 && (p2 - p).abs() < 1e-6);
        }

        #[test]
        fn composition(x in 0.0..1.0f64, p in -2.0..2.0f64) {
            let h = Hamiltonian::tilted_pendulum(0.4);
            let (xa, pa) = flow_point(&h, x, p, 0.7, 1e-3).unwrap();
            let (xm, pm) = flow_point(&h, x, p, 0.3, 1e-3).unwrap();
            let (xb, pb) = flow_point(&h, xm, pm, 0.4, 1e-3).unwrap();
            prop_assert!((xa - xb).abs() < 1e-9 && (pa - pb).abs() < 1e-9);
        }
    }
}
