//! Phase II: EWMA charts for a stream of curves.
//!
//! Each new curve is registered to the in-control template `f0`, giving
//! `theta_j` and the fitted curve `fhat_j`. The smoothed curve `ftilde_j`
//! stays inside the deformation family: its parameters minimize
//! `lambda |fhat(theta) - fhat_j|^2 + (1 - lambda) |fhat(theta) - ftilde_{j-1}|^2`.
//! A deviance `D_j` is smoothed the same way and charted against an upper
//! limit; the registered parameters get their own scalar EWMA charts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{same_grid, SampledCurve};
use crate::error::{Error, Result};
use crate::frechet::FrechetMeanResult;
use crate::sim::{deform_unchecked, fit_objective, register, register_from, RegisterConfig, SimParams, PARAM_NAMES};

/// Smoothing weights tried in the reference application.
pub const LAMBDA_GRID: [f64; 4] = [0.05, 0.10, 0.15, 0.20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariabilityMode {
    /// `D_j = |fhat_j - ftilde_{j-1}|^2`.
    #[default]
    Deviance,
    /// `D_j` is the in-control Fréchet function evaluated at `ftilde_j`.
    FrechetFunction,
}

impl std::str::FromStr for VariabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deviance" => Ok(VariabilityMode::Deviance),
            "frechet_function" | "frechet-function" => Ok(VariabilityMode::FrechetFunction),
            other => Err(Error::Config(format!("unknown variability mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EwmaConfig {
    pub lambda: f64,
    pub limit_level: f64,
    pub registration: RegisterConfig,
    pub variability_mode: VariabilityMode,
    /// Use the raw curve instead of its registered fit in the deviance.
    pub raw_deviance: bool,
    /// Add in-control parameters to the databank and refresh the parameter
    /// limits as the stream goes on.
    pub enrich: bool,
    /// Number of random orders of the training set replayed to calibrate
    /// the deviance limit.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for EwmaConfig {
    fn default() -> Self {
        EwmaConfig {
            lambda: 0.1,
            limit_level: 0.95,
            registration: RegisterConfig::default(),
            variability_mode: VariabilityMode::Deviance,
            raw_deviance: false,
            enrich: false,
            replicates: 200,
            seed: 0,
        }
    }
}

impl EwmaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.limit_level > 0.0 && self.limit_level < 1.0) {
            return Err(Error::Config(format!(
                "limit level must lie in (0, 1), got {}",
                self.limit_level
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("at least one calibration replicate is required".into()));
        }
        self.registration.validate()
    }
}

/// Exponentially weighted update `lambda x + (1 - lambda) prev`.
pub fn ewma_update(lambda: f64, x: f64, prev: f64) -> f64 {
    lambda * x + (1.0 - lambda) * prev
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwmaState {
    pub step: usize,
    /// Parameters of the smoothed curve from the joint fit.
    pub theta_tilde: SimParams,
    pub f_tilde: SampledCurve,
    pub d_tilde: f64,
    /// Scalar EWMA of the registered parameters, per coordinate.
    pub param_ewma: SimParams,
}

impl EwmaState {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Summary of the in-control training curves needed by the Fréchet-function
/// variability mode: their weighted mean and weighted spread, so that
/// `sum_k w_k |g - f_k|^2 = |g - mean|^2 + spread`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReference {
    pub mean: SampledCurve,
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamLimit {
    pub lcl: f64,
    pub ucl: f64,
}

impl ParamLimit {
    pub fn violated(&self, x: f64) -> bool {
        x < self.lcl || x > self.ucl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub deviance_ucl: f64,
    /// Limits for `alpha, beta, kappa, zeta`; `None` where the in-control
    /// databank shows no spread (e.g. a pinned parameter).
    pub params: [Option<ParamLimit>; 4],
    pub reference: IcReference,
}

impl ControlLimits {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub step: usize,
    /// Registered parameters of the observed curve.
    pub params: SimParams,
    pub residual_norm: f64,
    pub theta_tilde: SimParams,
    pub param_ewma: SimParams,
    pub d: f64,
    pub d_tilde: f64,
    pub ooc: bool,
    /// Per-parameter flags in `alpha, beta, kappa, zeta` order.
    pub ooc_params: [bool; 4],
}

impl ChartPoint {
    pub fn any_param_ooc(&self) -> bool {
        self.ooc_params.iter().any(|f| *f)
    }
}

/// Type-7 (linear interpolation) empirical quantile; `None` on empty input.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, p))
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        return v[lo];
    }
    v[lo] + frac * (v[hi] - v[lo])
}

/// Per-parameter limits from the central `level` band of `bank`.
pub fn param_limits(bank: &[SimParams], level: f64) -> [Option<ParamLimit>; 4] {
    let mut out = [None; 4];
    if bank.is_empty() {
        return out;
    }
    for (c, slot) in out.iter_mut().enumerate() {
        let mut col: Vec<f64> = bank.iter().map(|p| p.to_array()[c]).collect();
        col.sort_by(f64::total_cmp);
        let lcl = quantile_sorted(&col, (1.0 - level) / 2.0);
        let ucl = quantile_sorted(&col, (1.0 + level) / 2.0);
        if ucl - lcl > 1e-12 * lcl.abs().max(ucl.abs()).max(1.0) {
            *slot = Some(ParamLimit { lcl, ucl });
        }
    }
    out
}

fn ic_reference(ic: &FrechetMeanResult) -> Result<IcReference> {
    let grid = ic.f0.grid();
    let mut mean = vec![0.0; grid.len()];
    for (c, w) in ic.curves.iter().zip(&ic.weights) {
        same_grid(c, &ic.f0)?;
        for (m, v) in mean.iter_mut().zip(c.values()) {
            *m += w * v;
        }
    }
    let spread = ic
        .curves
        .iter()
        .zip(&ic.weights)
        .map(|(c, w)| w * grid.dist2(c.values(), &mean))
        .sum();
    Ok(IcReference {
        mean: SampledCurve::new(grid, mean)?,
        spread,
    })
}

/// Curve entering the deviance for an observation.
fn observed<'a>(raw: &'a SampledCurve, fitted: &'a SampledCurve, cfg: &EwmaConfig) -> &'a SampledCurve {
    if cfg.raw_deviance {
        raw
    } else {
        fitted
    }
}

/// Starting state and calibrated limits from a Phase I databank.
pub fn init_state(f0: &SampledCurve, ic: &FrechetMeanResult, cfg: &EwmaConfig) -> Result<(EwmaState, ControlLimits)> {
    cfg.validate()?;
    let n = ic.curves.len();
    if n == 0 || ic.ic_params.len() != n || ic.weights.len() != n {
        return Err(Error::Config("the in-control databank is empty or inconsistent".into()));
    }
    same_grid(f0, &ic.f0)?;
    let grid = f0.grid();
    let fitted: Vec<SampledCurve> = ic.ic_params.iter().map(|r| deform_unchecked(f0, &r.params)).collect();

    let d0: f64 = (0..n)
        .map(|k| ic.weights[k] * grid.dist2(observed(&ic.curves[k], &fitted[k], cfg).values(), f0.values()))
        .sum();
    let scale = grid.dot(f0.values(), f0.values()).max(f64::MIN_POSITIVE);
    if !(d0 > 1e-14 * scale) {
        return Err(Error::Config(
            "in-control curves coincide with the template; the deviance chart is degenerate".into(),
        ));
    }
    let state = EwmaState {
        step: 0,
        theta_tilde: SimParams::IDENTITY,
        f_tilde: f0.clone(),
        d_tilde: d0,
        param_ewma: SimParams::IDENTITY,
    };
    let bank: Vec<SimParams> = ic.ic_params.iter().map(|r| r.params).collect();
    let mut limits = ControlLimits {
        deviance_ucl: 0.0,
        params: param_limits(&bank, cfg.limit_level),
        reference: ic_reference(ic)?,
    };

    let pooled = replay_deviance(f0, ic, &fitted, &state, &limits, cfg)?;
    let ucl = quantile(&pooled, cfg.limit_level).unwrap_or(0.0);
    if !(ucl > 0.0) {
        return Err(Error::Config("calibrated deviance limit is not positive".into()));
    }
    limits.deviance_ucl = ucl;
    Ok((state, limits))
}

/// Runs the chart recursion over `cfg.replicates` seeded random orders of
/// the training curves (reusing their in-control registrations) and returns
/// every smoothed deviance.
fn replay_deviance(
    f0: &SampledCurve,
    ic: &FrechetMeanResult,
    fitted: &[SampledCurve],
    start: &EwmaState,
    limits: &ControlLimits,
    cfg: &EwmaConfig,
) -> Result<Vec<f64>> {
    let n = ic.curves.len();
    let runs: Vec<Result<Vec<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut state = start.clone();
            let mut out = Vec::with_capacity(n);
            for k in order {
                let theta = ic.ic_params[k].params;
                let obs = observed(&ic.curves[k], &fitted[k], cfg);
                let (next, _) = advance(&state, &theta, &fitted[k], obs, f0, limits, cfg)?;
                out.push(next.d_tilde);
                state = next;
            }
            Ok(out)
        })
        .collect();
    let mut pooled = Vec::with_capacity(cfg.replicates * n);
    for run in runs {
        pooled.extend(run?);
    }
    Ok(pooled)
}

/// Joint-fit objective `lambda |fhat(theta) - fhat_j|^2 + (1 - lambda) |fhat(theta) - prev|^2`.
pub fn ewma_fit_objective(
    theta: &SimParams,
    f_hat_j: &SampledCurve,
    f_tilde_prev: &SampledCurve,
    f0: &SampledCurve,
    lambda: f64,
) -> Result<f64> {
    same_grid(f_hat_j, f0)?;
    same_grid(f_tilde_prev, f0)?;
    let g = crate::sim::apply_deformation(f0, theta)?;
    let grid = f0.grid();
    Ok(lambda * grid.dist2(g.values(), f_hat_j.values()) + (1.0 - lambda) * grid.dist2(g.values(), f_tilde_prev.values()))
}

/// Smoothed parameters for the next state.
///
/// The two-term objective equals `|fhat(theta) - mix|^2` plus a constant,
/// with `mix = lambda fhat_j + (1 - lambda) ftilde_{j-1}`, so the fit is a
/// registration of `mix`; the amplitude pair at each phase is the weighted
/// combination of the two single-curve closed forms. The previous smoothed
/// parameters and any `anchors` seed the phase search.
pub fn ewma_fit_step(
    f_hat_j: &SampledCurve,
    state: &EwmaState,
    f0: &SampledCurve,
    cfg: &EwmaConfig,
    anchors: &[SimParams],
) -> Result<SimParams> {
    same_grid(f_hat_j, f0)?;
    same_grid(&state.f_tilde, f0)?;
    let lambda = cfg.lambda;
    let mix: Vec<f64> = f_hat_j
        .values()
        .iter()
        .zip(state.f_tilde.values())
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    let mix = SampledCurve::new(f0.grid(), mix)?;
    let mut starts = vec![state.theta_tilde];
    starts.extend_from_slice(anchors);
    let found = register_from(&mix, f0, &cfg.registration, &starts)?.params;
    // an anchor that fits at least as well wins, which keeps fixed points exact
    let mut best = (fit_objective(&mix, f0, &found)?, found);
    for a in starts.iter().rev() {
        let v = fit_objective(&mix, f0, a)?;
        if v <= best.0 {
            best = (v, *a);
        }
    }
    Ok(best.1)
}

/// Raw and smoothed variability for one step. `f_obs` is the curve entering
/// the deviance, `f_tilde_new` the freshly smoothed curve.
pub fn deviance_step(
    f_obs: &SampledCurve,
    prev: &EwmaState,
    f_tilde_new: &SampledCurve,
    reference: &IcReference,
    cfg: &EwmaConfig,
) -> Result<(f64, f64)> {
    same_grid(f_obs, &prev.f_tilde)?;
    same_grid(f_tilde_new, &prev.f_tilde)?;
    let grid = f_obs.grid();
    let d = match cfg.variability_mode {
        VariabilityMode::Deviance => grid.dist2(f_obs.values(), prev.f_tilde.values()),
        VariabilityMode::FrechetFunction => {
            same_grid(&reference.mean, f_obs)?;
            grid.dist2(f_tilde_new.values(), reference.mean.values()) + reference.spread
        }
    };
    Ok((d, ewma_update(cfg.lambda, d, prev.d_tilde)))
}

fn advance(
    state: &EwmaState,
    theta: &SimParams,
    f_hat: &SampledCurve,
    f_obs: &SampledCurve,
    f0: &SampledCurve,
    limits: &ControlLimits,
    cfg: &EwmaConfig,
) -> Result<(EwmaState, f64)> {
    let theta_tilde = ewma_fit_step(f_hat, state, f0, cfg, std::slice::from_ref(theta))?;
    let f_tilde = deform_unchecked(f0, &theta_tilde);
    let (d, d_tilde) = deviance_step(f_obs, state, &f_tilde, &limits.reference, cfg)?;
    let prev = state.param_ewma.to_array();
    let cur = theta.to_array();
    let mut smoothed = [0.0; 4];
    for c in 0..4 {
        smoothed[c] = ewma_update(cfg.lambda, cur[c], prev[c]);
    }
    Ok((
        EwmaState {
            step: state.step + 1,
            theta_tilde,
            f_tilde,
            d_tilde,
            param_ewma: SimParams::from_array(smoothed),
        },
        d,
    ))
}

/// One monitoring step: registration, joint fit, variability update and
/// out-of-control decisions.
pub fn monitor_curve(
    fj: &SampledCurve,
    state: &EwmaState,
    f0: &SampledCurve,
    limits: &ControlLimits,
    cfg: &EwmaConfig,
) -> Result<(EwmaState, ChartPoint)> {
    let step = state.step + 1;
    let attach = |e: Error| Error::Step {
        step,
        source: Box::new(e),
    };
    same_grid(fj, f0).map_err(attach)?;
    let reg = register(fj, f0, &cfg.registration).map_err(attach)?;
    let f_hat = deform_unchecked(f0, &reg.params);
    let obs = observed(fj, &f_hat, cfg);
    let (next, d) = advance(state, &reg.params, &f_hat, obs, f0, limits, cfg).map_err(attach)?;
    let smoothed = next.param_ewma.to_array();
    let mut ooc_params = [false; 4];
    for c in 0..4 {
        ooc_params[c] = limits.params[c].is_some_and(|l| l.violated(smoothed[c]));
    }
    let point = ChartPoint {
        step,
        params: reg.params,
        residual_norm: reg.residual_norm,
        theta_tilde: next.theta_tilde,
        param_ewma: next.param_ewma,
        d,
        d_tilde: next.d_tilde,
        ooc: next.d_tilde > limits.deviance_ucl,
        ooc_params,
    };
    Ok((next, point))
}

/// A monitoring session: template, limits, running state and, when
/// enrichment is on, the growing parameter databank.
#[derive(Debug, Clone)]
pub struct Session {
    pub f0: SampledCurve,
    pub limits: ControlLimits,
    pub state: EwmaState,
    pub cfg: EwmaConfig,
    bank: Vec<SimParams>,
}

impl Session {
    pub fn new(ic: &FrechetMeanResult, cfg: EwmaConfig) -> Result<Self> {
        let (state, limits) = init_state(&ic.f0, ic, &cfg)?;
        Ok(Session {
            f0: ic.f0.clone(),
            limits,
            state,
            bank: ic.ic_params.iter().map(|r| r.params).collect(),
            cfg,
        })
    }

    /// Resumes from previously calibrated limits and a saved state.
    pub fn resume(ic: &FrechetMeanResult, cfg: EwmaConfig, limits: ControlLimits, state: EwmaState) -> Result<Self> {
        cfg.validate()?;
        same_grid(&state.f_tilde, &ic.f0)?;
        Ok(Session {
            f0: ic.f0.clone(),
            limits,
            state,
            bank: ic.ic_params.iter().map(|r| r.params).collect(),
            cfg,
        })
    }

    pub fn step(&mut self, fj: &SampledCurve) -> Result<ChartPoint> {
        let (state, point) = monitor_curve(fj, &self.state, &self.f0, &self.limits, &self.cfg)?;
        self.state = state;
        if self.cfg.enrich && !point.ooc && !point.any_param_ooc() {
            self.bank.push(point.params);
            self.limits.params = param_limits(&self.bank, self.cfg.limit_level);
        }
        Ok(point)
    }

    pub fn databank_len(&self) -> usize {
        self.bank.len()
    }
}

/// Human-readable name of a per-parameter chart.
pub fn param_name(c: usize) -> &'static str {
    PARAM_NAMES[c]
}
