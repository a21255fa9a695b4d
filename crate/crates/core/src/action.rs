//! Minimal action `A_t(x, y)` at level `c`: one-step midpoint quadrature,
//! dynamic-programming composition over a grid, and local refinement of the
//! minimizing chain.

use crate::error::{Error, Result};
use crate::hamiltonian::{golden_min, wrap, Hamiltonian};

pub const DEFAULT_V_MAX: f64 = 6.0;

/// Representative of `(y − x) mod 1` in `(−½, ½]`.
#[inline]
pub fn periodic_displacement(x: f64, y: f64) -> f64 {
    let d = wrap(y - x);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Periodic distance on the circle.
#[inline]
pub fn circle_distance(x: f64, y: f64) -> f64 {
    periodic_displacement(x, y).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionResult {
    pub value: f64,
    /// Lifted positions `γ(t_k)`: `curve[0] = x`, consecutive entries differ
    /// by the segment displacement, and the last entry is `y` modulo one.
    pub curve: Vec<f64>,
    /// `(p(0), p(t))`.
    pub momenta: (f64, f64),
    pub time: f64,
    /// Largest partial derivative of the discrete action with respect to an
    /// interior node.
    pub euler_lagrange_residual: f64,
}

impl ActionResult {
    pub fn positions(&self) -> Vec<f64> {
        self.curve.iter().map(|&x| wrap(x)).collect()
    }
}

/// Midpoint action of the straight segment between two lifted positions.
#[inline]
pub(crate) fn segment_action(ham: &Hamiltonian, a: f64, b: f64, h: f64, c: f64) -> f64 {
    h * (c + ham.lagrangian(0.5 * (a + b), (b - a) / h))
}

/// `h·(c + L(midpoint, δ/h))` along the straight segment with the minimal
/// periodic displacement `δ` from `x` to `y`.
pub fn one_step_action(ham: &Hamiltonian, x: f64, y: f64, h: f64, c: f64, v_max: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {h}")));
    }
    let delta = periodic_displacement(x, y);
    let velocity = delta / h;
    if velocity.abs() > v_max {
        return Err(Error::VelocityWindow { velocity, v_max });
    }
    Ok(segment_action(ham, x, x + delta, h, c))
}

/// Dynamic programming over `n_steps` segments with interior nodes on a
/// `grid_n` grid.
pub fn compose_action(
    ham: &Hamiltonian,
    x: f64,
    y: f64,
    t: f64,
    c: f64,
    n_steps: usize,
    grid_n: usize,
    v_max: f64,
) -> Result<ActionResult> {
    if !(t > 0.0) || n_steps == 0 || grid_n < 64 {
        return Err(Error::Config(format!(
            "compose_action needs t > 0, n_steps >= 1, grid_n >= 64 (got t={t}, n_steps={n_steps}, grid_n={grid_n})"
        )));
    }
    let h = t / n_steps as f64;
    let x = wrap(x);
    let y = wrap(y);
    let edge = |a: f64, b: f64| -> Option<(f64, f64)> {
        let d = periodic_displacement(a, b);
        if (d / h).abs() > v_max {
            None
        } else {
            Some((segment_action(ham, a, a + d, h, c), d))
        }
    };

    if n_steps == 1 {
        let (value, d) = edge(x, y).ok_or(Error::VelocityWindow { velocity: periodic_displacement(x, y) / h, v_max })?;
        return finish(ham, vec![x, x + d], value, t, c);
    }

    let nodes: Vec<f64> = (0..grid_n).map(|j| j as f64 / grid_n as f64).collect();
    // cost[j]: best value reaching node j after k steps; back[k][j]: predecessor
    let mut cost: Vec<f64> = nodes.iter().map(|&z| edge(x, z).map_or(f64::INFINITY, |e| e.0)).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n_steps);
    for _ in 1..n_steps - 1 {
        let mut next = vec![f64::INFINITY; grid_n];
        let mut arg = vec![usize::MAX; grid_n];
        for (j, &zj) in nodes.iter().enumerate() {
            for (i, &zi) in nodes.iter().enumerate() {
                if !cost[i].is_finite() {
                    continue;
                }
                if let Some((a, _)) = edge(zi, zj) {
                    let v = cost[i] + a;
                    if v < next[j] {
                        next[j] = v;
                        arg[j] = i;
                    }
                }
            }
        }
        back.push(arg);
        cost = next;
    }
    let (mut best, mut best_i) = (f64::INFINITY, usize::MAX);
    for (i, &zi) in nodes.iter().enumerate() {
        if let (true, Some((a, _))) = (cost[i].is_finite(), edge(zi, y)) {
            if cost[i] + a < best {
                best = cost[i] + a;
                best_i = i;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::Config(format!("no feasible path from {x} to {y} in time {t} with v_max={v_max}")));
    }
    let mut chain = vec![best_i];
    for arg in back.iter().rev() {
        let prev = arg[*chain.last().unwrap()];
        chain.push(prev);
    }
    chain.reverse();
    let mut curve = vec![x];
    for &j in &chain {
        let last = *curve.last().unwrap();
        curve.push(last + periodic_displacement(last, nodes[j]));
    }
    let last = *curve.last().unwrap();
    curve.push(last + periodic_displacement(last, y));
    if curve
        .windows(2)
        .any(|w| ((w[1] - w[0]) / h).abs() >= v_max * (1.0 - 1e-9))
    {
        log::warn!("action minimizer uses the velocity window boundary v_max={v_max}");
    }
    finish(ham, curve, best, t, c)
}

fn chain_action(ham: &Hamiltonian, curve: &[f64], h: f64, c: f64) -> f64 {
    curve.windows(2).map(|w| segment_action(ham, w[0], w[1], h, c)).sum()
}

fn finish(ham: &Hamiltonian, curve: Vec<f64>, value: f64, t: f64, c: f64) -> Result<ActionResult> {
    let steps = curve.len() - 1;
    let h = t / steps as f64;
    let first_v = (curve[1] - curve[0]) / h;
    let last_v = (curve[steps] - curve[steps - 1]) / h;
    let p0 = ham.momentum(curve[0], first_v)?;
    let p1 = ham.momentum(curve[steps], last_v)?;
    let el = euler_lagrange_residual(ham, &curve, h, c);
    Ok(ActionResult { value, curve, momenta: (p0, p1), time: t, euler_lagrange_residual: el })
}

fn euler_lagrange_residual(ham: &Hamiltonian, curve: &[f64], h: f64, c: f64) -> f64 {
    let e = 1e-6;
    (1..curve.len().saturating_sub(1))
        .map(|k| {
            let local = |z: f64| segment_action(ham, curve[k - 1], z, h, c) + segment_action(ham, z, curve[k + 1], h, c);
            ((local(curve[k] + e) - local(curve[k] - e)) / (2.0 * e)).abs()
        })
        .fold(0.0, f64::max)
}

/// Compose, then refine interior nodes by coordinate descent until a sweep
/// decreases the action by less than `1e-10`.
pub fn minimizing_curve(
    ham: &Hamiltonian,
    x: f64,
    y: f64,
    t: f64,
    c: f64,
    n_steps: usize,
    grid_n: usize,
    v_max: f64,
) -> Result<ActionResult> {
    let start = compose_action(ham, x, y, t, c, n_steps, grid_n, v_max)?;
    let mut curve = start.curve;
    let steps = curve.len() - 1;
    let h = t / steps as f64;
    let radius = 2.0 / grid_n as f64;
    let mut value = chain_action(ham, &curve, h, c);
    let max_sweeps = 2000;
    let mut converged = false;
    for _ in 0..max_sweeps {
        for k in 1..steps {
            let (a, b) = (curve[k - 1], curve[k + 1]);
            let local = |z: f64| {
                let va = (z - a) / h;
                let vb = (b - z) / h;
                if va.abs() > v_max || vb.abs() > v_max {
                    f64::INFINITY
                } else {
                    segment_action(ham, a, z, h, c) + segment_action(ham, z, b, h, c)
                }
            };
            let z = golden_min(local, curve[k] - radius, curve[k] + radius, 1e-13);
            if local(z) < local(curve[k]) {
                curve[k] = z;
            }
        }
        let next = chain_action(ham, &curve, h, c);
        let decrease = value - next;
        value = next;
        if decrease < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("minimizing_curve refinement did not converge after {max_sweeps} sweeps; returning best value {value}");
    }
    finish(ham, curve, value, t, c)
}
