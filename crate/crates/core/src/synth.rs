//! Synthetic shape-invariant data and brute-force reference solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::curve::{same_grid, SampledCurve, TimeGrid, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::ewma::{quantile, ControlLimits, EwmaConfig, EwmaState, Session};
use crate::frechet::FrechetMeanResult;
use crate::optim::{project_amplitude, project_phase};
use crate::sim::{deform_unchecked, profiled_objective, RegisterConfig, RegistrationResult, SimParams, MAX_SHIFT};

/// Analytic base curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseCurve {
    /// `offset + amplitude * sin(2 pi t)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        offset: f64,
    },
    /// `1 + 2 / (1 + exp(-steepness (t - midpoint)))`.
    Sigmoid {
        #[serde(default = "twelve")]
        steepness: f64,
        #[serde(default = "half")]
        midpoint: f64,
    },
    /// Background level with a morning and an evening Gaussian bump.
    DoublePeak {
        #[serde(default = "first_peak")]
        first: f64,
        #[serde(default = "second_peak")]
        second: f64,
        #[serde(default = "peak_width")]
        width: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn twelve() -> f64 {
    12.0
}
fn half() -> f64 {
    0.5
}
fn first_peak() -> f64 {
    0.33
}
fn second_peak() -> f64 {
    0.8
}
fn peak_width() -> f64 {
    0.08
}

impl Default for BaseCurve {
    fn default() -> Self {
        BaseCurve::Sine {
            amplitude: 1.0,
            offset: 2.0,
        }
    }
}

impl BaseCurve {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            BaseCurve::Sine { amplitude, offset } => offset + amplitude * (2.0 * PI * t).sin(),
            BaseCurve::Sigmoid { steepness, midpoint } => 1.0 + 2.0 / (1.0 + (-steepness * (t - midpoint)).exp()),
            BaseCurve::DoublePeak { first, second, width } => {
                let bump = |c: f64, w: f64| (-((t - c) / w).powi(2)).exp();
                1.0 + 1.5 * bump(first, width) + bump(second, 1.25 * width)
            }
        }
    }

    pub fn sample(&self, grid: TimeGrid) -> Result<SampledCurve> {
        let c = SampledCurve::from_fn(grid, |t| self.value(t))?;
        if c.is_constant() {
            return Err(Error::Config("base curve is constant".into()));
        }
        Ok(c)
    }
}

/// Sampling law of one deformation coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ParamLaw {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    /// Normal restricted to `[low, high]`.
    TruncNormal { mean: f64, sd: f64, low: f64, high: f64 },
}

impl ParamLaw {
    fn support(&self) -> (f64, f64) {
        match *self {
            ParamLaw::Fixed { value } => (value, value),
            ParamLaw::Uniform { low, high } | ParamLaw::TruncNormal { low, high, .. } => (low, high),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("laws.{name}: support [{lo}, {hi}] is invalid")));
        }
        if let ParamLaw::TruncNormal { mean, sd, .. } = *self {
            if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                return Err(Error::Config(format!("laws.{name}: sd must be positive")));
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            ParamLaw::Fixed { value } => Some(value),
            ParamLaw::Uniform { low, high } => Some(0.5 * (low + high)),
            ParamLaw::TruncNormal { .. } => None,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ParamLaw::Fixed { value } => value,
            ParamLaw::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    rng.random_range(low..=high)
                }
            }
            ParamLaw::TruncNormal { mean, sd, low, high } => {
                let normal = Normal::new(mean, sd).expect("validated sd");
                for _ in 0..10_000 {
                    let x = normal.sample(rng);
                    if (low..=high).contains(&x) {
                        return x;
                    }
                }
                mean.clamp(low, high)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamLaws {
    pub alpha: ParamLaw,
    pub beta: ParamLaw,
    pub kappa: ParamLaw,
    pub zeta: ParamLaw,
}

impl Default for ParamLaws {
    fn default() -> Self {
        ParamLaws {
            alpha: ParamLaw::Fixed { value: 1.0 },
            beta: ParamLaw::Fixed { value: 0.0 },
            kappa: ParamLaw::Fixed { value: 1.0 },
            zeta: ParamLaw::Fixed { value: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub base: BaseCurve,
    pub grid_points: usize,
    /// Number of curves (training set size or stream length).
    pub n: usize,
    pub laws: ParamLaws,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            base: BaseCurve::default(),
            grid_points: DEFAULT_GRID_POINTS,
            n: 20,
            laws: ParamLaws::default(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        TimeGrid::new(self.grid_points).map_err(|e| Error::Config(format!("grid_points: {e}")))?;
        if self.n == 0 {
            return Err(Error::Config("n: at least one curve is required".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma: must be non-negative".into()));
        }
        let l = &self.laws;
        l.alpha.validate("alpha")?;
        l.beta.validate("beta")?;
        l.kappa.validate("kappa")?;
        l.zeta.validate("zeta")?;
        if !(l.alpha.support().0 > 0.0) {
            return Err(Error::Config("laws.alpha: support must be positive".into()));
        }
        if !(l.kappa.support().0 > 0.0) {
            return Err(Error::Config("laws.kappa: support must be positive".into()));
        }
        let (zlo, zhi) = l.zeta.support();
        if zlo < -MAX_SHIFT || zhi > MAX_SHIFT {
            return Err(Error::Config("laws.zeta: support must lie in [-1/2, 1/2]".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid_points)
    }
}

/// Persistent change of the parameter law: multipliers for the scales,
/// additive deltas for the offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Shift {
    pub alpha_mult: f64,
    pub beta_add: f64,
    pub kappa_mult: f64,
    pub zeta_add: f64,
}

impl Default for Shift {
    fn default() -> Self {
        Shift::NONE
    }
}

impl Shift {
    pub const NONE: Shift = Shift {
        alpha_mult: 1.0,
        beta_add: 0.0,
        kappa_mult: 1.0,
        zeta_add: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_mult > 0.0 && self.kappa_mult > 0.0) {
            return Err(Error::Config("shift multipliers must be positive".into()));
        }
        if !(self.beta_add.is_finite() && self.zeta_add.is_finite() && self.alpha_mult.is_finite() && self.kappa_mult.is_finite()) {
            return Err(Error::Config("shift entries must be finite".into()));
        }
        Ok(())
    }

    fn apply(&self, p: SimParams) -> SimParams {
        SimParams {
            alpha: p.alpha * self.alpha_mult,
            beta: p.beta + self.beta_add,
            kappa: p.kappa * self.kappa_mult,
            zeta: (p.zeta + self.zeta_add).clamp(-MAX_SHIFT, MAX_SHIFT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSet {
    pub base: SampledCurve,
    pub curves: Vec<SampledCurve>,
    pub params: Vec<SimParams>,
}

fn draw(laws: &ParamLaws, rng: &mut ChaCha8Rng) -> SimParams {
    SimParams {
        alpha: laws.alpha.sample(rng),
        beta: laws.beta.sample(rng),
        kappa: laws.kappa.sample(rng),
        zeta: laws.zeta.sample(rng),
    }
}

fn add_noise(c: &SampledCurve, sigma: f64, rng: &mut ChaCha8Rng) -> SampledCurve {
    if sigma == 0.0 {
        return c.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let v = c.values().iter().map(|x| x + normal.sample(rng)).collect();
    SampledCurve::new(c.grid(), v).expect("finite noise")
}

/// Training set: parameters drawn from the laws and projected onto the
/// centrality constraints, curves deformed from the base plus grid noise.
pub fn generate_ic_set(spec: &SynthSpec) -> Result<SynthSet> {
    spec.validate()?;
    let base = spec.base.sample(spec.grid()?)?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw: Vec<SimParams> = (0..n).map(|_| draw(&spec.laws, &mut rng)).collect();

    let mut amp: Vec<f64> = raw.iter().map(|p| p.alpha).collect();
    amp.extend(raw.iter().map(|p| p.beta));
    let mut phase: Vec<f64> = raw.iter().map(|p| p.kappa).collect();
    phase.extend(raw.iter().map(|p| p.zeta));
    let amp = project_amplitude(&amp)?.values;
    let phase = project_phase(&phase)?.values;
    let params: Vec<SimParams> = (0..n)
        .map(|j| SimParams {
            alpha: amp[j],
            beta: amp[n + j],
            kappa: phase[j],
            zeta: phase[n + j],
        })
        .collect();
    let curves = params
        .iter()
        .map(|p| add_noise(&deform_unchecked(&base, p), spec.noise_sigma, &mut rng))
        .collect();
    Ok(SynthSet { base, curves, params })
}

/// Monitoring stream of `spec.n` curves; steps `at_step` onward (1-based)
/// have their parameters shifted. Random draws do not depend on the shift,
/// so streams that differ only in the shift agree before `at_step`.
pub fn inject_shift(spec: &SynthSpec, shift: &Shift, at_step: usize) -> Result<SynthSet> {
    stream_with_id(spec, shift, at_step, 0)
}

pub fn generate_stream(spec: &SynthSpec) -> Result<SynthSet> {
    stream_with_id(spec, &Shift::NONE, 1, 0)
}

fn stream_with_id(spec: &SynthSpec, shift: &Shift, at_step: usize, stream: u64) -> Result<SynthSet> {
    spec.validate()?;
    shift.validate()?;
    if at_step == 0 {
        return Err(Error::Config("at_step counts from 1".into()));
    }
    let base = spec.base.sample(spec.grid()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let mut params = Vec::with_capacity(spec.n);
    let mut curves = Vec::with_capacity(spec.n);
    for step in 1..=spec.n {
        let p = draw(&spec.laws, &mut rng);
        let p = if step >= at_step { shift.apply(p) } else { p };
        curves.push(add_noise(&deform_unchecked(&base, &p), spec.noise_sigma, &mut rng));
        params.push(p);
    }
    Ok(SynthSet { base, curves, params })
}

/// Phase box and resolution of an exhaustive registration search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteGrid {
    pub kappa_bounds: (f64, f64),
    pub zeta_bounds: (f64, f64),
    pub kappa_points: usize,
    pub zeta_points: usize,
    pub fix_kappa: bool,
    pub fix_zeta: bool,
}

impl BruteGrid {
    /// Grid over the same box as `cfg`.
    pub fn matching(cfg: &RegisterConfig, kappa_points: usize, zeta_points: usize) -> Self {
        BruteGrid {
            kappa_bounds: cfg.kappa_bounds,
            zeta_bounds: cfg.zeta_bounds,
            kappa_points,
            zeta_points,
            fix_kappa: cfg.fix_kappa,
            fix_zeta: cfg.fix_zeta,
        }
    }

    fn kappas(&self) -> Vec<f64> {
        if self.fix_kappa {
            vec![1.0]
        } else {
            linspace(self.kappa_bounds, self.kappa_points)
        }
    }

    fn zetas(&self) -> Vec<f64> {
        if self.fix_zeta {
            vec![0.0]
        } else {
            linspace(self.zeta_bounds, self.zeta_points)
        }
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `(objective, kappa, zeta)`.
type Key = (f64, f64, f64);

/// Ordering shared with the registration search: objective, then smaller
/// `|zeta|`, then `kappa` closer to one.
fn better(a: Key, b: Key) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.2.abs().total_cmp(&b.2.abs()))
        .then((a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .is_lt()
}

/// Exhaustive registration over the phase grid with the amplitude pair in
/// closed form at every node.
pub fn brute_force_register(fj: &SampledCurve, f0: &SampledCurve, grid: &BruteGrid) -> Result<RegistrationResult> {
    same_grid(fj, f0)?;
    if f0.is_constant() {
        return Err(Error::Identifiability("base curve is constant".into()));
    }
    let mut best: Option<(Key, (f64, f64))> = None;
    for &k in &grid.kappas() {
        for &z in &grid.zetas() {
            let (a, b, v) = profiled_objective(fj, f0, k, z);
            if best.is_none_or(|(key, _)| better((v, k, z), key)) {
                best = Some(((v, k, z), (a, b)));
            }
        }
    }
    let ((objective, kappa, zeta), (alpha, beta)) =
        best.ok_or_else(|| Error::Config("brute-force grid is empty".into()))?;
    Ok(RegistrationResult {
        params: SimParams { alpha, beta, kappa, zeta },
        residual_norm: objective.sqrt(),
        objective,
    })
}

/// Exhaustive registration over the full four-parameter grid, with the
/// misfit of every amplitude pair assembled from per-phase moments.
pub fn brute_force_register_full(
    fj: &SampledCurve,
    f0: &SampledCurve,
    grid: &BruteGrid,
    alpha: ((f64, f64), usize),
    beta: ((f64, f64), usize),
) -> Result<RegistrationResult> {
    same_grid(fj, f0)?;
    if !(alpha.0 .0 > 0.0) {
        return Err(Error::Config("alpha grid must be positive".into()));
    }
    let tg = f0.grid();
    let f = fj.values();
    let s_ff = tg.dot(f, f);
    let s_f = tg.integral(f);
    let alphas = linspace(alpha.0, alpha.1);
    let betas = linspace(beta.0, beta.1);
    let mut best: Option<(Key, (f64, f64))> = None;
    for &k in &grid.kappas() {
        for &z in &grid.zetas() {
            let w = f0.warped_values_unchecked(k, z);
            let (s_fw, s_ww, s_w) = (tg.dot(f, &w), tg.dot(&w, &w), tg.integral(&w));
            for &a in &alphas {
                for &b in &betas {
                    let v = (s_ff - 2.0 * a * s_fw - 2.0 * b * s_f + a * a * s_ww + 2.0 * a * b * s_w + b * b).max(0.0);
                    if best.is_none_or(|(key, _)| better((v, k, z), key)) {
                        best = Some(((v, k, z), (a, b)));
                    }
                }
            }
        }
    }
    let ((objective, kappa, zeta), (alpha, beta)) =
        best.ok_or_else(|| Error::Config("brute-force grid is empty".into()))?;
    Ok(RegistrationResult {
        params: SimParams { alpha, beta, kappa, zeta },
        residual_norm: objective.sqrt(),
        objective,
    })
}

/// Monte Carlo run-length experiment on seeded streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    /// Stream law; `n` is the stream length, replicate `r` uses random
    /// stream `r` of `seed`.
    pub stream: SynthSpec,
    pub shift: Shift,
    /// First shifted step; past the stream length for in-control runs.
    pub at_step: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub first_alarm: Option<usize>,
    pub alarms: usize,
    pub alarms_before_shift: usize,
    /// `first alarm at or after the shift - at_step + 1`.
    pub detection_delay: Option<usize>,
    /// First post-shift alarm of each parameter chart.
    pub param_delay: [Option<usize>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengthSummary {
    pub replicates: Vec<ReplicateOutcome>,
    pub steps_before_shift: usize,
    /// Deviance-chart alarms per in-control step, pooled over replicates.
    pub false_alarm_rate: f64,
    /// Detection-delay quartiles, undetected replicates counting as
    /// infinite; `None` without post-shift steps.
    pub delay_quartiles: Option<[f64; 3]>,
    pub undetected: usize,
}

/// Runs every replicate stream through a fresh monitoring session built on
/// `ic`, `limits` and `cfg`.
pub fn run_length_experiment(
    ic: &FrechetMeanResult,
    limits: &ControlLimits,
    start: &EwmaState,
    cfg: &EwmaConfig,
    exp: &Experiment,
) -> Result<RunLengthSummary> {
    if exp.replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    exp.stream.validate()?;
    let outcomes = (0..exp.replicates)
        .into_par_iter()
        .map(|r| {
            let set = stream_with_id(&exp.stream, &exp.shift, exp.at_step, r as u64)?;
            same_grid(&set.base, &ic.f0)?;
            let mut session = Session::resume(ic, cfg.clone(), limits.clone(), start.clone())?;
            let mut out = ReplicateOutcome {
                replicate: r,
                first_alarm: None,
                alarms: 0,
                alarms_before_shift: 0,
                detection_delay: None,
                param_delay: [None; 4],
            };
            for curve in &set.curves {
                let p = session.step(curve)?;
                let after = p.step >= exp.at_step;
                let delay = p.step + 1 - exp.at_step.min(p.step + 1);
                if p.ooc {
                    out.alarms += 1;
                    out.first_alarm.get_or_insert(p.step);
                    if after {
                        out.detection_delay.get_or_insert(delay);
                    } else {
                        out.alarms_before_shift += 1;
                    }
                }
                if after {
                    for c in 0..4 {
                        if p.ooc_params[c] {
                            out.param_delay[c].get_or_insert(delay);
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let steps_before = exp.at_step.saturating_sub(1).min(exp.stream.n);
    let false_alarms: usize = outcomes.iter().map(|o| o.alarms_before_shift).sum();
    let false_alarm_rate = if steps_before == 0 {
        0.0
    } else {
        false_alarms as f64 / (steps_before * exp.replicates) as f64
    };
    let delay_quartiles = (exp.at_step <= exp.stream.n).then(|| {
        let d: Vec<f64> = outcomes
            .iter()
            .map(|o| o.detection_delay.map_or(f64::INFINITY, |d| d as f64))
            .collect();
        [0.25, 0.5, 0.75].map(|p| quantile(&d, p).expect("non-empty"))
    });
    let undetected = if exp.at_step <= exp.stream.n {
        outcomes.iter().filter(|o| o.detection_delay.is_none()).count()
    } else {
        0
    };
    Ok(RunLengthSummary {
        replicates: outcomes,
        steps_before_shift: steps_before,
        false_alarm_rate,
        delay_quartiles,
        undetected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::register;

    fn spread_laws() -> ParamLaws {
        ParamLaws {
            alpha: ParamLaw::Uniform { low: 0.8, high: 1.25 },
            beta: ParamLaw::TruncNormal {
                mean: 0.0,
                sd: 0.2,
                low: -0.5,
                high: 0.5,
            },
            kappa: ParamLaw::Uniform { low: 0.9, high: 1.1 },
            zeta: ParamLaw::Uniform { low: -0.05, high: 0.05 },
        }
    }

    #[test]
    fn degenerate_spec_copies_base() {
        let spec = SynthSpec {
            n: 5,
            ..SynthSpec::default()
        };
        let set = generate_ic_set(&spec).unwrap();
        assert_eq!(set.curves.len(), 5);
        assert!(set.curves.iter().all(|c| *c == set.base));
        assert!(set.params.iter().all(|p| *p == SimParams::IDENTITY));
    }

    #[test]
    fn seeded_and_centred() {
        let spec = SynthSpec {
            n: 30,
            laws: spread_laws(),
            noise_sigma: 0.05,
            seed: 4,
            ..SynthSpec::default()
        };
        let a = generate_ic_set(&spec).unwrap();
        assert_eq!(a, generate_ic_set(&spec).unwrap());
        let log_alpha: f64 = a.params.iter().map(|p| p.alpha.ln()).sum();
        let log_kappa: f64 = a.params.iter().map(|p| p.kappa.ln()).sum();
        let beta: f64 = a.params.iter().map(|p| p.beta).sum();
        let zeta: f64 = a.params.iter().map(|p| p.zeta).sum();
        for s in [log_alpha, log_kappa, beta, zeta] {
            assert!(s.abs() < 1e-12, "{s}");
        }
        let other = generate_ic_set(&SynthSpec { seed: 5, ..spec }).unwrap();
        assert_ne!(a.curves, other.curves);
    }

    #[test]
    fn zeta_moments() {
        let spec = SynthSpec {
            n: 10_000,
            grid_points: 11,
            laws: ParamLaws {
                zeta: ParamLaw::Uniform { low: -0.2, high: 0.2 },
                ..ParamLaws::default()
            },
            seed: 1,
            ..SynthSpec::default()
        };
        let set = generate_ic_set(&spec).unwrap();
        let z: Vec<f64> = set.params.iter().map(|p| p.zeta).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let law_var = 0.4f64.powi(2) / 12.0;
        assert!(mean.abs() < 3.0 * (law_var / n).sqrt());
        // variance of the sample variance of a uniform: (mu4 - sigma^4) / n
        let mu4 = 0.2f64.powi(4) / 5.0;
        assert!((var - law_var).abs() < 3.0 * ((mu4 - law_var * law_var) / n).sqrt());
    }

    #[test]
    fn trunc_normal_stays_in_support() {
        let law = ParamLaw::TruncNormal {
            mean: 0.0,
            sd: 1.0,
            low: 0.5,
            high: 0.6,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!((0.5..=0.6).contains(&law.sample(&mut rng)));
        }
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let bad = SynthSpec {
            laws: ParamLaws {
                alpha: ParamLaw::Uniform { low: -1.0, high: 1.0 },
                ..ParamLaws::default()
            },
            ..SynthSpec::default()
        };
        match generate_ic_set(&bad) {
            Err(Error::Config(msg)) => assert!(msg.contains("laws.alpha")),
            other => panic!("{other:?}"),
        }
        let bad = SynthSpec {
            laws: ParamLaws {
                zeta: ParamLaw::Uniform { low: -0.7, high: 0.0 },
                ..ParamLaws::default()
            },
            ..SynthSpec::default()
        };
        assert!(generate_ic_set(&bad).is_err());
    }

    #[test]
    fn identity_shift_is_bitwise_neutral() {
        let spec = SynthSpec {
            n: 40,
            laws: spread_laws(),
            noise_sigma: 0.1,
            seed: 2,
            ..SynthSpec::default()
        };
        assert_eq!(inject_shift(&spec, &Shift::NONE, 10).unwrap(), generate_stream(&spec).unwrap());
        let shifted = inject_shift(
            &spec,
            &Shift {
                alpha_mult: 1.6,
                ..Shift::NONE
            },
            10,
        )
        .unwrap();
        let plain = generate_stream(&spec).unwrap();
        assert_eq!(shifted.curves[..9], plain.curves[..9]);
        for j in 9..40 {
            assert!((shifted.params[j].alpha - 1.6 * plain.params[j].alpha).abs() < 1e-15);
            assert_eq!(shifted.params[j].zeta, plain.params[j].zeta);
        }
        assert!(inject_shift(&spec, &Shift::NONE, 0).is_err());
    }

    #[test]
    fn shift_from_first_step() {
        let spec = SynthSpec {
            n: 10,
            ..SynthSpec::default()
        };
        let s = inject_shift(
            &spec,
            &Shift {
                zeta_add: 0.2,
                ..Shift::NONE
            },
            1,
        )
        .unwrap();
        assert!(s.params.iter().all(|p| p.zeta == 0.2));
    }

    #[test]
    fn shifted_alpha_moments() {
        let spec = SynthSpec {
            n: 4000,
            grid_points: 11,
            laws: spread_laws(),
            seed: 3,
            ..SynthSpec::default()
        };
        let s = inject_shift(
            &spec,
            &Shift {
                alpha_mult: 1.6,
                ..Shift::NONE
            },
            100,
        )
        .unwrap();
        let after: Vec<f64> = s.params[99..].iter().map(|p| p.alpha).collect();
        let n = after.len() as f64;
        let mean = after.iter().sum::<f64>() / n;
        let law_mean = 1.6 * 1.025;
        let sd = 1.6 * 0.45 / 12f64.sqrt();
        assert!((mean - law_mean).abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn brute_force_identity() {
        let f0 = BaseCurve::default().sample(TimeGrid::new(101).unwrap()).unwrap();
        let grid = BruteGrid::matching(&RegisterConfig::default(), 31, 41);
        let r = brute_force_register(&f0, &f0, &grid).unwrap();
        assert!((r.params.kappa - 1.0).abs() <= 0.05 + 1e-12);
        assert!(r.params.zeta.abs() <= 0.025 + 1e-12);
        assert!(r.objective < 1e-20);
    }

    #[test]
    fn brute_force_bounds_register() {
        let f0 = BaseCurve::Sigmoid {
            steepness: 12.0,
            midpoint: 0.5,
        }
        .sample(TimeGrid::new(101).unwrap())
        .unwrap();
        let cfg = RegisterConfig::default();
        let grid = BruteGrid::matching(&cfg, 61, 101);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let p = SimParams::new(
                rng.random_range(0.7..1.4),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.85..1.15),
                rng.random_range(-0.1..0.1),
            )
            .unwrap();
            let fj = deform_unchecked(&f0, &p);
            let oracle = brute_force_register(&fj, &f0, &grid).unwrap();
            let found = register(&fj, &f0, &cfg).unwrap();
            assert!(found.objective <= oracle.objective + 1e-12);
        }
    }

    #[test]
    fn reduced_and_full_grids_agree() {
        let f0 = BaseCurve::default().sample(TimeGrid::new(51).unwrap()).unwrap();
        let fj = deform_unchecked(&f0, &SimParams::new(1.2, 0.3, 1.0, 0.04).unwrap());
        let grid = BruteGrid {
            fix_kappa: true,
            ..BruteGrid::matching(&RegisterConfig::default(), 1, 51)
        };
        let reduced = brute_force_register(&fj, &f0, &grid).unwrap();
        let full = brute_force_register_full(&fj, &f0, &grid, ((0.5, 2.0), 301), ((-1.0, 1.0), 401)).unwrap();
        assert_eq!(reduced.params.zeta, full.params.zeta);
        assert!((reduced.params.alpha - full.params.alpha).abs() <= 0.005 + 1e-9);
        assert!((reduced.params.beta - full.params.beta).abs() <= 0.005 + 1e-9);
        assert!(full.objective >= reduced.objective - 1e-12);
        assert!(full.objective - reduced.objective < 1e-4);
    }
}
