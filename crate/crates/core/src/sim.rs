//! The shape-invariant model.
//!
//! A curve `f` is a deformation of a base curve `f0` with parameters
//! `(alpha, beta, kappa, zeta)` when
//!
//! ```text
//! f(t) = beta + alpha * f0((t - zeta) / kappa)
//! ```
//!
//! For fixed phase `(kappa, zeta)` the best amplitude pair is a weighted
//! linear regression with a closed form, so registration reduces to a
//! search over the phase parameters only.

use serde::{Deserialize, Serialize};

use crate::curve::{same_grid, SampledCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::optim::{BoxSpec, MultiStart, POSITIVITY_FLOOR};

/// Names of the four deformation parameters, in storage order.
pub const PARAM_NAMES: [&str; 4] = ["alpha", "beta", "kappa", "zeta"];

/// Largest admissible phase shift magnitude.
pub const MAX_SHIFT: f64 = 0.5;

/// Relative threshold on the variance of the warped base curve below which
/// the amplitude pair is not identifiable.
const DEGENERATE_REL: f64 = 1e-10;

/// Deformation parameters `(alpha, beta, kappa, zeta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub zeta: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimParams {
    pub const IDENTITY: SimParams = SimParams {
        alpha: 1.0,
        beta: 0.0,
        kappa: 1.0,
        zeta: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, kappa: f64, zeta: f64) -> Result<Self> {
        let p = SimParams { alpha, beta, kappa, zeta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite, got {}", self.beta)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Domain(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.zeta.abs() <= MAX_SHIFT) {
            return Err(Error::Domain(format!("zeta must lie in [-1/2, 1/2], got {}", self.zeta)));
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha, self.beta, self.kappa, self.zeta]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        SimParams {
            alpha: a[0],
            beta: a[1],
            kappa: a[2],
            zeta: a[3],
        }
    }
}

/// Outcome of registering a curve against a base curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub params: SimParams,
    /// L2 norm of the residual `f - (beta + alpha f0((t - zeta)/kappa))`.
    pub residual_norm: f64,
    /// Squared L2 fitting error.
    pub objective: f64,
}

/// Search settings for [`register`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterConfig {
    pub search: MultiStart,
    pub kappa_bounds: (f64, f64),
    pub zeta_bounds: (f64, f64),
    /// Pin `kappa = 1`.
    pub fix_kappa: bool,
    /// Pin `zeta = 0`; with `fix_kappa` this leaves an amplitude-only model.
    pub fix_zeta: bool,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        RegisterConfig {
            search: MultiStart::default(),
            kappa_bounds: (0.5, 2.0),
            zeta_bounds: (-MAX_SHIFT, MAX_SHIFT),
            fix_kappa: false,
            fix_zeta: false,
        }
    }
}

impl RegisterConfig {
    pub fn validate(&self) -> Result<()> {
        let (klo, khi) = self.kappa_bounds;
        if !(klo > 0.0 && klo <= 1.0 && khi >= 1.0 && khi.is_finite()) {
            return Err(Error::Config(format!(
                "kappa bounds must satisfy 0 < lower <= 1 <= upper, got ({klo}, {khi})"
            )));
        }
        let (zlo, zhi) = self.zeta_bounds;
        if !((-MAX_SHIFT..=0.0).contains(&zlo) && (0.0..=MAX_SHIFT).contains(&zhi)) {
            return Err(Error::Config(format!(
                "zeta bounds must satisfy -1/2 <= lower <= 0 <= upper <= 1/2, got ({zlo}, {zhi})"
            )));
        }
        Ok(())
    }

    fn phase_box(&self) -> Result<BoxSpec> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        if !self.fix_kappa {
            lo.push(self.kappa_bounds.0);
            hi.push(self.kappa_bounds.1);
        }
        if !self.fix_zeta {
            lo.push(self.zeta_bounds.0);
            hi.push(self.zeta_bounds.1);
        }
        BoxSpec::new(lo, hi)
    }

    fn phase_of(&self, x: &[f64]) -> (f64, f64) {
        let mut it = x.iter();
        let kappa = if self.fix_kappa { 1.0 } else { *it.next().unwrap() };
        let zeta = if self.fix_zeta { 0.0 } else { *it.next().unwrap() };
        (kappa, zeta)
    }

    fn search_point(&self, kappa: f64, zeta: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(2);
        if !self.fix_kappa {
            x.push(kappa);
        }
        if !self.fix_zeta {
            x.push(zeta);
        }
        x
    }
}

/// `t -> beta + alpha * f0((t - zeta) / kappa)` on the grid of `f0`.
pub fn apply_deformation(f0: &SampledCurve, p: &SimParams) -> Result<SampledCurve> {
    p.validate()?;
    Ok(deform_unchecked(f0, p))
}

pub(crate) fn deform_unchecked(f0: &SampledCurve, p: &SimParams) -> SampledCurve {
    let mut v = f0.warped_values_unchecked(p.kappa, p.zeta);
    for x in v.iter_mut() {
        *x = p.beta + p.alpha * *x;
    }
    SampledCurve::from_values_unchecked(f0.grid(), v)
}

/// `t -> (fj(kappa t + zeta) - beta) / alpha`, the algebraic inverse of
/// [`apply_deformation`] wherever the warped arguments stay inside `[0, 1]`.
pub fn invert_deformation(fj: &SampledCurve, p: &SimParams) -> Result<SampledCurve> {
    p.validate()?;
    Ok(invert_unchecked(fj, p))
}

pub(crate) fn invert_unchecked(fj: &SampledCurve, p: &SimParams) -> SampledCurve {
    let grid = fj.grid();
    let inv = 1.0 / p.alpha;
    let offset = p.zeta * (grid.len() - 1) as f64;
    let v = (0..grid.len())
        .map(|i| (fj.eval_pos(p.kappa * i as f64 + offset) - p.beta) * inv)
        .collect();
    SampledCurve::from_values_unchecked(grid, v)
}

/// Integrals of a warped base curve that enter the amplitude closed form.
struct WarpedMoments {
    mean: f64,
    var: f64,
}

impl WarpedMoments {
    fn of(grid: &TimeGrid, w: &[f64]) -> Self {
        let mean = grid.integral(w);
        let var = grid.dot(w, w) - mean * mean;
        WarpedMoments { mean, var }
    }
}

fn degenerate_threshold(f0: &SampledCurve) -> f64 {
    let n2 = f0.grid().dot(f0.values(), f0.values());
    DEGENERATE_REL * n2.max(f64::MIN_POSITIVE)
}

/// Unconstrained least-squares amplitude pair `(alpha*, beta*)` of `fj`
/// against the warped base `f0((t - zeta) / kappa)` with phase held fixed.
pub fn amplitude_closed_form(fj: &SampledCurve, f0: &SampledCurve, kappa: f64, zeta: f64) -> Result<(f64, f64)> {
    same_grid(fj, f0)?;
    let w = f0.warped_values(kappa, zeta)?;
    let grid = f0.grid();
    let m = WarpedMoments::of(&grid, &w);
    if m.var <= degenerate_threshold(f0) {
        return Err(Error::Identifiability("warped base curve is constant".into()));
    }
    let fmean = grid.integral(fj.values());
    let alpha = (grid.dot(&w, fj.values()) - m.mean * fmean) / m.var;
    Ok((alpha, fmean - alpha * m.mean))
}

/// Amplitude pair used inside the registration search: the closed form with
/// `alpha` held at or above the positivity floor. The objective is a convex
/// quadratic in `alpha` once `beta` is profiled out, so clamping is the exact
/// constrained minimizer. A flat warped base leaves `alpha` unidentified;
/// it is set to 1 there.
fn constrained_amplitude(grid: &TimeGrid, w: &[f64], target: &[f64], target_mean: f64, threshold: f64) -> (f64, f64) {
    let m = WarpedMoments::of(grid, w);
    if m.var <= threshold {
        return (1.0, target_mean - m.mean);
    }
    let alpha = ((grid.dot(w, target) - m.mean * target_mean) / m.var).max(POSITIVITY_FLOOR);
    (alpha, target_mean - alpha * m.mean)
}

fn residual_sq(grid: &TimeGrid, target: &[f64], w: &[f64], alpha: f64, beta: f64) -> f64 {
    let last = target.len() - 1;
    let r = |i: usize| target[i] - beta - alpha * w[i];
    let interior: f64 = (0..=last).map(|i| r(i) * r(i)).sum();
    (grid.spacing() * (interior - 0.5 * (r(0) * r(0) + r(last) * r(last)))).max(0.0)
}

/// Amplitude pair and misfit at a fixed phase, computed exactly as inside
/// [`register`].
pub(crate) fn profiled_objective(fj: &SampledCurve, f0: &SampledCurve, kappa: f64, zeta: f64) -> (f64, f64, f64) {
    let grid = f0.grid();
    let target = fj.values();
    let w = f0.warped_values_unchecked(kappa, zeta);
    let (alpha, beta) = constrained_amplitude(&grid, &w, target, grid.integral(target), degenerate_threshold(f0));
    (alpha, beta, residual_sq(&grid, target, &w, alpha, beta))
}

/// Squared L2 misfit of `fj` against the deformation `p` of `f0`.
pub fn fit_objective(fj: &SampledCurve, f0: &SampledCurve, p: &SimParams) -> Result<f64> {
    same_grid(fj, f0)?;
    p.validate()?;
    let w = f0.warped_values_unchecked(p.kappa, p.zeta);
    Ok(residual_sq(&fj.grid(), fj.values(), &w, p.alpha, p.beta))
}

/// Registers `fj` as a shape-invariant deformation of `f0`.
pub fn register(fj: &SampledCurve, f0: &SampledCurve, cfg: &RegisterConfig) -> Result<RegistrationResult> {
    register_from(fj, f0, cfg, &[])
}

/// Like [`register`], with additional phase start points taken from
/// `anchors`. The identity phase is always a start.
pub fn register_from(
    fj: &SampledCurve,
    f0: &SampledCurve,
    cfg: &RegisterConfig,
    anchors: &[SimParams],
) -> Result<RegistrationResult> {
    same_grid(fj, f0)?;
    cfg.validate()?;
    if f0.is_constant() {
        return Err(Error::Identifiability("base curve is constant".into()));
    }
    let grid = f0.grid();
    let target = fj.values();
    let target_mean = grid.integral(target);
    let threshold = degenerate_threshold(f0);
    let mut w = Vec::with_capacity(grid.len());

    let evaluate = |kappa: f64, zeta: f64, w: &mut Vec<f64>| {
        f0.fill_warped(kappa, zeta, w);
        let (alpha, beta) = constrained_amplitude(&grid, w, target, target_mean, threshold);
        (alpha, beta, residual_sq(&grid, target, w, alpha, beta))
    };

    let bounds = cfg.phase_box()?;
    let (kappa, zeta) = if bounds.dim() == 0 {
        (1.0, 0.0)
    } else {
        let mut starts = vec![cfg.search_point(1.0, 0.0)];
        starts.extend(anchors.iter().map(|a| cfg.search_point(a.kappa, a.zeta)));
        let report = cfg.search.minimize(
            |x: &[f64]| {
                let (k, z) = cfg.phase_of(x);
                evaluate(k, z, &mut w).2
            },
            &bounds,
            &starts,
        )?;
        if !report.converged {
            return Err(Error::NotConverged {
                message: "phase search exhausted its evaluation budget".into(),
                best_point: report.best_point,
                best_value: report.best_value,
            });
        }
        let best = report
            .local
            .iter()
            .map(|l| (l.value, cfg.phase_of(&l.point)))
            .min_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(a.1 .1.abs().total_cmp(&b.1 .1.abs()))
                    .then((a.1 .0 - 1.0).abs().total_cmp(&(b.1 .0 - 1.0).abs()))
            })
            .expect("at least one start");
        best.1
    };
    let (alpha, beta, objective) = evaluate(kappa, zeta, &mut w);
    Ok(RegistrationResult {
        params: SimParams { alpha, beta, kappa, zeta },
        residual_norm: objective.sqrt(),
        objective,
    })
}
