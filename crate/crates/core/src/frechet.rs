//! Phase I: the in-control Fréchet mean under the shape-invariant model.
//!
//! Every training curve `f_j` is pulled back onto a common time and value
//! scale with its own parameters,
//!
//! ```text
//! u_j(t) = abar_j * (f_j(kappa_j t + zeta_j) - beta_j),   abar_j = 1 / alpha_j,
//! ```
//!
//! and the template is the weighted average `f_IC = sum_j w_j u_j`. The
//! parameters are chosen to minimize the dispersion of the pulled-back
//! curves around their average,
//!
//! ```text
//! V = sum_j w_j |u_j - f_IC|^2,
//! ```
//!
//! subject to the centrality constraints (unit geometric mean of the scales,
//! zero-sum offsets and shifts). The minimization alternates between an
//! amplitude stage, linear in `(abar_j, abar_j beta_j)` and solved by least
//! squares, and a phase stage solved by multi-start search; each stage is
//! followed by a projection onto the constraint set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{SampledCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::optim::{least_squares_solve, project_amplitude, project_phase, BoxSpec};
use crate::sim::{invert_unchecked, register, RegisterConfig, RegistrationResult, SimParams};
use nalgebra::{DMatrix, DVector};

/// Relative increase of the objective tolerated before a projected step is
/// damped.
const MONOTONE_SLACK: f64 = 1e-9;
const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrechetConfig {
    /// Curve weights on the unit simplex; `None` means `1/n` each.
    pub weights: Option<Vec<f64>>,
    /// Stopping tolerance on the change of both parameter vectors.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Phase search and re-registration settings; `fix_kappa` here removes
    /// the phase scales from the unknowns.
    pub registration: RegisterConfig,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        FrechetConfig {
            weights: None,
            tolerance: 1e-6,
            max_iterations: 100,
            registration: RegisterConfig::default(),
        }
    }
}

/// Deformation parameters of all training curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBank {
    /// Inverse amplitude scales followed by amplitude offsets.
    pub gamma: Vec<f64>,
    /// Phase scales followed by phase shifts.
    pub xi: Vec<f64>,
}

impl ParamBank {
    pub fn identity(n: usize) -> Self {
        let mut gamma = vec![1.0; n];
        gamma.extend(std::iter::repeat_n(0.0, n));
        ParamBank { gamma: gamma.clone(), xi: gamma }
    }

    pub fn len(&self) -> usize {
        self.gamma.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Parameters of curve `j` in the `(alpha, beta, kappa, zeta)` form.
    pub fn params(&self, j: usize) -> SimParams {
        let n = self.len();
        SimParams {
            alpha: 1.0 / self.gamma[j],
            beta: self.gamma[n + j],
            kappa: self.xi[j],
            zeta: self.xi[n + j],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.gamma.len() != 2 * n || self.xi.len() != 2 * n {
            return Err(Error::Shape(format!(
                "parameter bank sized for {} and {} curves, expected {n}",
                self.gamma.len() / 2,
                self.xi.len() / 2
            )));
        }
        if self.gamma[..n].iter().chain(&self.xi[..n]).any(|s| !(*s > 0.0)) {
            return Err(Error::Domain("parameter bank holds a non-positive scale".into()));
        }
        Ok(())
    }
}

/// Phase I output: the template, the training bank and the in-control
/// registrations that later calibrate the charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetMeanResult {
    pub f0: SampledCurve,
    pub bank: ParamBank,
    pub weights: Vec<f64>,
    pub frechet_variance: f64,
    /// Registration of every training curve against `f0`.
    pub ic_params: Vec<RegistrationResult>,
    /// The training curves themselves.
    pub curves: Vec<SampledCurve>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the starting point, then after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Curve indices whose fitted amplitude scale had to be floored.
    #[serde(default)]
    pub floored: Vec<usize>,
}

impl FrechetMeanResult {
    pub fn grid(&self) -> TimeGrid {
        self.f0.grid()
    }
}

fn check_curves(curves: &[SampledCurve]) -> Result<TimeGrid> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Config("at least one training curve is required".into()))?;
    let grid = first.grid();
    if let Some(j) = curves.iter().position(|c| c.grid() != grid) {
        return Err(Error::Shape(format!("curve {j} is not on the grid of curve 0")));
    }
    Ok(grid)
}

pub(crate) fn resolve_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::Shape(format!("{} weights for {n} curves", w.len())));
            }
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::Config("weights must be non-negative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("weights sum to {total}, not 1")));
            }
            Ok(w.to_vec())
        }
    }
}

fn pulled_back(curves: &[SampledCurve], bank: &ParamBank) -> Vec<SampledCurve> {
    curves
        .iter()
        .enumerate()
        .map(|(j, c)| invert_unchecked(c, &bank.params(j)))
        .collect()
}

fn weighted_average(grid: TimeGrid, parts: &[SampledCurve], weights: &[f64]) -> SampledCurve {
    let mut acc = vec![0.0; grid.len()];
    for (p, w) in parts.iter().zip(weights) {
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += w * v;
        }
    }
    SampledCurve::from_values_unchecked(grid, acc)
}

fn dispersion(grid: TimeGrid, parts: &[SampledCurve], mean: &SampledCurve, weights: &[f64]) -> f64 {
    parts
        .iter()
        .zip(weights)
        .map(|(p, w)| w * grid.dist2(p.values(), mean.values()))
        .sum()
}

/// Weighted average of the pulled-back training curves.
pub fn build_mean_curve(curves: &[SampledCurve], bank: &ParamBank, weights: &[f64]) -> Result<SampledCurve> {
    let grid = check_curves(curves)?;
    bank.check(curves.len())?;
    let w = resolve_weights(Some(weights), curves.len())?;
    Ok(weighted_average(grid, &pulled_back(curves, bank), &w))
}

/// Weighted dispersion `V` of the pulled-back curves around their average.
pub fn frechet_objective(curves: &[SampledCurve], bank: &ParamBank, weights: &[f64]) -> Result<f64> {
    let grid = check_curves(curves)?;
    bank.check(curves.len())?;
    let w = resolve_weights(Some(weights), curves.len())?;
    let parts = pulled_back(curves, bank);
    let mean = weighted_average(grid, &parts, &w);
    Ok(dispersion(grid, &parts, &mean, &w))
}

/// Result of one amplitude or phase stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    /// Minimizer before the projection.
    pub unconstrained: Vec<f64>,
    /// Feasible parameters after gauge normalization and projection.
    pub projected: Vec<f64>,
    pub floored: Vec<usize>,
}

/// Amplitude stage: with the phase fixed, fits every pulled-back curve to
/// `reference` by weighted least squares on `[g_j, -1]`, where
/// `g_j(t) = f_j(kappa_j t + zeta_j)`, then normalizes the result onto the
/// amplitude constraint set.
///
/// The normalization is a common rescaling of all inverse scales followed
/// by a common shift of all pulled-back curves, both of which keep the
/// curves' relative alignment; [`project_amplitude`] then removes rounding.
pub fn amplitude_stage(curves: &[SampledCurve], xi: &[f64], reference: &SampledCurve) -> Result<StageOutput> {
    let grid = check_curves(curves)?;
    let n = curves.len();
    if xi.len() != 2 * n {
        return Err(Error::Shape(format!("phase vector of length {} for {n} curves", xi.len())));
    }
    if reference.grid() != grid {
        return Err(Error::Shape("reference curve is on a different grid".into()));
    }
    let sqrt_w: Vec<f64> = grid.weights().into_iter().map(f64::sqrt).collect();
    let target = DVector::from_iterator(grid.len(), reference.values().iter().zip(&sqrt_w).map(|(v, s)| v * s));

    let mut abar = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for (j, curve) in curves.iter().enumerate() {
        let phase = SimParams {
            kappa: xi[j],
            zeta: xi[n + j],
            ..SimParams::IDENTITY
        };
        let g = invert_unchecked(curve, &phase);
        let design = DMatrix::from_fn(grid.len(), 2, |i, c| if c == 0 { g.values()[i] * sqrt_w[i] } else { -sqrt_w[i] });
        let sol = least_squares_solve(&design, &target).map_err(|e| match e {
            Error::Identifiability(msg) => {
                Error::Identifiability(format!("training curve {j} cannot be aligned ({msg}); is it constant?"))
            }
            other => other,
        })?;
        let (a, c) = (sol[0], sol[1]);
        abar.push(a);
        beta.push(if a != 0.0 { c / a } else { 0.0 });
    }
    let mut unconstrained = abar.clone();
    unconstrained.extend(&beta);

    // floor first so the normalization below only sees positive scales
    let floored: Vec<usize> = (0..n).filter(|&j| abar[j] <= crate::optim::POSITIVITY_FLOOR).collect();
    for &j in &floored {
        abar[j] = crate::optim::POSITIVITY_FLOOR;
    }
    let log_center = abar.iter().map(|a| a.ln()).sum::<f64>() / n as f64;
    for a in abar.iter_mut() {
        *a = (a.ln() - log_center).exp();
    }
    // common shift d of the pulled-back curves: beta_j -> beta_j - d alpha_j
    let sum_alpha: f64 = abar.iter().map(|a| 1.0 / a).sum();
    let d = beta.iter().sum::<f64>() / sum_alpha;
    for (b, a) in beta.iter_mut().zip(&abar) {
        *b -= d / a;
    }
    let mut gamma = abar;
    gamma.extend(beta);
    let projected = project_amplitude(&gamma)?;
    Ok(StageOutput {
        unconstrained,
        projected: projected.values,
        floored,
    })
}

/// Phase stage: with the amplitude fixed, registers every pulled-back curve
/// to `reference` over its own phase box (curves in parallel, seeds derived
/// from the configured seed and the curve index), then normalizes onto the
/// phase constraint set with a common time transform of the template
/// followed by [`project_phase`].
pub fn phase_stage(
    curves: &[SampledCurve],
    gamma: &[f64],
    xi: &[f64],
    reference: &SampledCurve,
    cfg: &RegisterConfig,
) -> Result<StageOutput> {
    let grid = check_curves(curves)?;
    let n = curves.len();
    if gamma.len() != 2 * n || xi.len() != 2 * n {
        return Err(Error::Shape(format!("parameter vectors do not match {n} curves")));
    }
    cfg.validate()?;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    if !cfg.fix_kappa {
        lo.push(cfg.kappa_bounds.0);
        hi.push(cfg.kappa_bounds.1);
    }
    if !cfg.fix_zeta {
        lo.push(cfg.zeta_bounds.0);
        hi.push(cfg.zeta_bounds.1);
    }
    let bounds = BoxSpec::new(lo, hi)?;
    let split = |x: &[f64]| -> (f64, f64) {
        let mut it = x.iter();
        let k = if cfg.fix_kappa { 1.0 } else { *it.next().unwrap() };
        let z = if cfg.fix_zeta { 0.0 } else { *it.next().unwrap() };
        (k, z)
    };
    let pack = |k: f64, z: f64| -> Vec<f64> {
        let mut v = Vec::new();
        if !cfg.fix_kappa {
            v.push(k);
        }
        if !cfg.fix_zeta {
            v.push(z);
        }
        v
    };

    let fitted: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            if bounds.dim() == 0 {
                return Ok((1.0, 0.0));
            }
            let curve = &curves[j];
            let (abar, beta) = (gamma[j], gamma[n + j]);
            let steps = (grid.len() - 1) as f64;
            let reference = reference.values();
            let objective = |x: &[f64]| {
                let (k, z) = split(x);
                let offset = z * steps;
                let last = grid.len() - 1;
                let mut acc = 0.0;
                let mut ends = 0.0;
                for (i, r) in reference.iter().enumerate() {
                    let u = abar * (curve.eval_pos(k * i as f64 + offset) - beta);
                    let d = (u - r) * (u - r);
                    acc += d;
                    if i == 0 || i == last {
                        ends += d;
                    }
                }
                grid.spacing() * (acc - 0.5 * ends)
            };
            let mut search = cfg.search.clone();
            search.seed = search.seed.wrapping_add(j as u64);
            let starts = [pack(xi[j], xi[n + j]), pack(1.0, 0.0)];
            let report = search.minimize(objective, &bounds, &starts)?;
            let best = report
                .local
                .iter()
                .map(|l| (l.value, split(&l.point)))
                .min_by(|a, b| {
                    a.0.total_cmp(&b.0)
                        .then(a.1 .1.abs().total_cmp(&b.1 .1.abs()))
                        .then((a.1 .0 - 1.0).abs().total_cmp(&(b.1 .0 - 1.0).abs()))
                })
                .expect("at least one start");
            Ok(best.1)
        })
        .collect();

    let mut kappa = Vec::with_capacity(n);
    let mut zeta = Vec::with_capacity(n);
    for r in fitted {
        let (k, z) = r?;
        kappa.push(k);
        zeta.push(z);
    }
    let mut unconstrained = kappa.clone();
    unconstrained.extend(&zeta);

    // template time transform s -> (s - z) / k maps kappa_j -> kappa_j / k
    // and zeta_j -> zeta_j - kappa_j z / k
    let k = (kappa.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp();
    let z = k * zeta.iter().sum::<f64>() / kappa.iter().sum::<f64>();
    let mut xi_new: Vec<f64> = kappa.iter().map(|v| v / k).collect();
    xi_new.extend(zeta.iter().zip(&kappa).map(|(zj, kj)| zj - kj * z / k));
    let projected = project_phase(&xi_new)?;
    let mut values = projected.values;
    if cfg.fix_kappa {
        values[..n].fill(1.0);
    }
    if cfg.fix_zeta {
        values[n..].fill(0.0);
    }
    Ok(StageOutput {
        unconstrained,
        projected: values,
        floored: projected.floored,
    })
}

/// Interpolates between two feasible vectors: log-linearly on the scales,
/// linearly on the offsets, so the result stays feasible.
fn blend(prev: &[f64], next: &[f64], t: f64) -> Vec<f64> {
    let n = prev.len() / 2;
    let mut out: Vec<f64> = prev[..n]
        .iter()
        .zip(&next[..n])
        .map(|(a, b)| (a.ln() + t * (b.ln() - a.ln())).exp())
        .collect();
    out.extend(prev[n..].iter().zip(&next[n..]).map(|(a, b)| a + t * (b - a)));
    out
}

/// Accepts `candidate` if it does not increase the objective beyond the
/// slack, otherwise bisects toward `current`. Returns the accepted vector
/// and its objective.
fn safeguarded(current: &[f64], candidate: Vec<f64>, v_current: f64, eval: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let limit = v_current + MONOTONE_SLACK * v_current.abs().max(f64::MIN_POSITIVE);
    let v = eval(&candidate);
    if v <= limit {
        return (candidate, v);
    }
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        t *= 0.5;
        let trial = blend(current, &candidate, t);
        let v = eval(&trial);
        if v <= limit {
            return (trial, v);
        }
    }
    (current.to_vec(), v_current)
}

/// Estimates the in-control template and parameter bank from `curves`.
pub fn estimate_frechet_mean(curves: &[SampledCurve], cfg: &FrechetConfig) -> Result<FrechetMeanResult> {
    let grid = check_curves(curves)?;
    let n = curves.len();
    if let Some(j) = curves.iter().position(|c| c.is_constant()) {
        return Err(Error::Identifiability(format!("training curve {j} is constant")));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    cfg.registration.validate()?;
    let weights = resolve_weights(cfg.weights.as_deref(), n)?;

    let objective = |bank: &ParamBank| {
        let parts = pulled_back(curves, bank);
        let mean = weighted_average(grid, &parts, &weights);
        (dispersion(grid, &parts, &mean, &weights), mean)
    };

    let mut bank = ParamBank::identity(n);
    let (mut v, mut reference) = objective(&bank);
    let mut trace = vec![v];
    let mut floored = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        iterations += 1;
        let prev = bank.clone();

        let amp = amplitude_stage(curves, &bank.xi, &reference)?;
        floored.extend(amp.floored.iter().copied());
        let (gamma, v_amp) = safeguarded(&bank.gamma, amp.projected, v, |g| {
            objective(&ParamBank {
                gamma: g.to_vec(),
                xi: bank.xi.clone(),
            })
            .0
        });
        bank.gamma = gamma;
        v = v_amp;
        reference = objective(&bank).1;

        let phase = phase_stage(curves, &bank.gamma, &bank.xi, &reference, &cfg.registration)?;
        let (xi, v_phase) = safeguarded(&bank.xi, phase.projected, v, |x| {
            objective(&ParamBank {
                gamma: bank.gamma.clone(),
                xi: x.to_vec(),
            })
            .0
        });
        bank.xi = xi;
        v = v_phase;
        reference = objective(&bank).1;
        trace.push(v);

        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        if dist(&bank.gamma, &prev.gamma) < cfg.tolerance && dist(&bank.xi, &prev.xi) < cfg.tolerance {
            converged = true;
            break;
        }
    }
    floored.sort_unstable();
    floored.dedup();

    let f0 = build_mean_curve(curves, &bank, &weights)?;
    let frechet_variance = frechet_objective(curves, &bank, &weights)?;
    let ic_params = curves
        .par_iter()
        .map(|c| register(c, &f0, &cfg.registration))
        .collect::<Result<Vec<_>>>()?;

    Ok(FrechetMeanResult {
        f0,
        bank,
        weights,
        frechet_variance,
        ic_params,
        curves: curves.to_vec(),
        iterations,
        converged,
        objective_trace: trace,
        floored,
    })
}
