//! `C^{1,1}` sub-solutions as `w = T_s T̆_t u`, the adaptive choice of `s`
//! and the density sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hamiltonian::Hamiltonian;
use crate::laxoleinik::{default_tolerance, evolve_by, subsolution_report, Direction, StepConfig, SubSolutionReport};
use crate::semiconcave::{refinement_stable, regularity_profile, semiconcavity_constants};

/// Largest time step used when evolving inside the regularization.
pub const DEFAULT_REGULARIZE_H: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizeOptions {
    pub h_max: f64,
    /// Sub-solution tolerance; `None` means [`default_tolerance`].
    pub tolerance: Option<f64>,
    pub step: StepConfig,
}

impl Default for RegularizeOptions {
    fn default() -> Self {
        Self { h_max: DEFAULT_REGULARIZE_H, tolerance: None, step: StepConfig::default() }
    }
}

impl RegularizeOptions {
    fn tol(&self, c: f64) -> f64 {
        self.tolerance.unwrap_or_else(|| default_tolerance(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizationResult {
    #[serde(skip)]
    pub w: GridFunction,
    pub t_used: f64,
    pub s_used: f64,
    pub report: SubSolutionReport,
    pub k_plus: f64,
    pub k_minus: f64,
    /// Refinement stability of both constants; `false` flags an `s` that is
    /// too large.
    pub stable: bool,
    pub sup_dist_to_input: f64,
}

/// `T_s T̆_t u` without any checks.
pub fn lasry_lions_image(
    ham: &Hamiltonian,
    u: &GridFunction,
    t: f64,
    s: f64,
    c: f64,
    opts: &RegularizeOptions,
) -> Result<GridFunction> {
    let v = evolve_by(ham, u, t, opts.h_max, c, Direction::Backward, &opts.step)?;
    evolve_by(ham, &v, s, opts.h_max, c, Direction::Forward, &opts.step)
}

pub fn lasry_lions(ham: &Hamiltonian, u: &GridFunction, t: f64, s: f64, c: f64) -> Result<RegularizationResult> {
    lasry_lions_with(ham, u, t, s, c, &RegularizeOptions::default())
}

pub fn lasry_lions_with(
    ham: &Hamiltonian,
    u: &GridFunction,
    t: f64,
    s: f64,
    c: f64,
    opts: &RegularizeOptions,
) -> Result<RegularizationResult> {
    if !(s > 0.0 && t >= s) {
        return Err(Error::Config(format!("need t >= s > 0, got t={t}, s={s}")));
    }
    let tol = opts.tol(c);
    let input = subsolution_report(ham, u, c, tol);
    if !input.pass {
        return Err(Error::Precondition(format!(
            "input is not a sub-solution at level {c}: residual {:.3e}, action violation {:.3e}",
            input.max_residual, input.action_violation
        )));
    }
    finish(ham, u, lasry_lions_image(ham, u, t, s, c, opts)?, t, s, c, tol)
}

fn finish(
    ham: &Hamiltonian,
    u: &GridFunction,
    w: GridFunction,
    t: f64,
    s: f64,
    c: f64,
    tol: f64,
) -> Result<RegularizationResult> {
    let report = subsolution_report(ham, &w, c, tol);
    if !report.pass {
        return Err(Error::Resolution(format!(
            "regularized function fails the sub-solution test: residual {:.3e}, action violation {:.3e}",
            report.max_residual, report.action_violation
        )));
    }
    let profile = regularity_profile(&w);
    if !profile.stable {
        log::warn!("s={s} looks too large: regularity constants not stable under refinement");
    }
    Ok(RegularizationResult {
        sup_dist_to_input: w.sup_distance(u),
        w,
        t_used: t,
        s_used: s,
        report,
        k_plus: profile.k_plus,
        k_minus: profile.k_minus,
        stable: profile.stable,
    })
}

/// Halves `s` starting from `t/2` until the constants of `T_s T̆_t u` agree
/// between `n/2` and `n`. Fails once `s < 1/n`.
pub fn small_s_search(ham: &Hamiltonian, u: &GridFunction, t: f64, c: f64) -> Result<RegularizationResult> {
    small_s_search_with(ham, u, t, c, &RegularizeOptions::default())
}

pub fn small_s_search_with(
    ham: &Hamiltonian,
    u: &GridFunction,
    t: f64,
    c: f64,
    opts: &RegularizeOptions,
) -> Result<RegularizationResult> {
    if !(t > 0.0) {
        return Err(Error::Config(format!("need t > 0, got {t}")));
    }
    if u.n() < 128 {
        return Err(Error::Config("small_s_search needs n >= 128 to compare against n/2".into()));
    }
    let tol = opts.tol(c);
    let input = subsolution_report(ham, u, c, tol);
    if !input.pass {
        return Err(Error::Precondition(format!("input is not a sub-solution at level {c}")));
    }
    let floor = u.spacing();
    let coarse_u = u.downsample();
    let mut s = 0.5 * t;
    while s >= floor {
        let fine = lasry_lions_image(ham, u, t, s, c, opts)?;
        let coarse = lasry_lions_image(ham, &coarse_u, t, s, c, opts)?;
        let (fp, fm) = semiconcavity_constants(&fine);
        let (cp, cm) = semiconcavity_constants(&coarse);
        log::debug!("s={s}: k_plus {cp} -> {fp}, k_minus {cm} -> {fm}");
        if refinement_stable(cp, fp) && refinement_stable(cm, fm) {
            match finish(ham, u, fine, t, s, c, tol) {
                Ok(r) => return Ok(r),
                Err(Error::Resolution(m)) => log::debug!("s={s}: {m}"),
                Err(e) => return Err(e),
            }
        }
        s *= 0.5;
    }
    Err(Error::Resolution(format!("no s >= 1/n = {floor} gives refinement-stable constants for t={t}")))
}

/// `t_k = 2^{−k}`, `s_k = t_k/2` for `k = 1..=k_max`.
pub fn geometric_schedule(k_max: u32) -> Vec<(f64, f64)> {
    (1..=k_max)
        .map(|k| {
            let t = 0.5f64.powi(k as i32);
            (t, 0.5 * t)
        })
        .collect()
}

/// `sup |T_{s_k} T̆_{t_k} u − u|` along the schedule.
pub fn density_sweep(ham: &Hamiltonian, u: &GridFunction, c: f64, schedule: &[(f64, f64)]) -> Result<Vec<f64>> {
    density_sweep_with(ham, u, c, schedule, &RegularizeOptions::default())
}

pub fn density_sweep_with(
    ham: &Hamiltonian,
    u: &GridFunction,
    c: f64,
    schedule: &[(f64, f64)],
    opts: &RegularizeOptions,
) -> Result<Vec<f64>> {
    schedule
        .iter()
        .map(|&(t, s)| Ok(lasry_lions_image(ham, u, t, s, c, opts)?.sup_distance(u)))
        .collect()
}
