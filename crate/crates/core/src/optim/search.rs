//! Seeded multi-start local search on a box.
//!
//! Start points come from a Halton sequence under a seeded random rotation
//! (Cranley-Patterson). Unlike a Latin hypercube, the first `k` points of the
//! design do not depend on how many are requested, so adding restarts never
//! removes a start and the best value is non-increasing in the restart count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-coordinate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Shape(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(Error::Domain(format!("invalid bounds [{l}, {u}] on coordinate {i}")));
            }
        }
        Ok(BoxSpec { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }
}

/// Local search engine run from each start point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Bounded Nelder-Mead simplex descent with restarts at convergence;
    /// one-dimensional boxes use a bracketed Brent line search instead.
    #[default]
    NelderMead,
    /// Simulated annealing followed by a Nelder-Mead polish.
    Annealing,
}

/// Outcome of one local search.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub start: Vec<f64>,
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimReport {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// One entry per start, in start order (explicit starts first).
    pub local: Vec<LocalResult>,
}

/// Multi-start settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiStart {
    pub restarts: usize,
    pub seed: u64,
    pub engine: Engine,
    /// Simplex diameter (max-norm) at which a local search stops.
    pub xtol: f64,
    /// Evaluation budget per start.
    pub max_evals: usize,
}

impl Default for MultiStart {
    fn default() -> Self {
        MultiStart {
            restarts: 8,
            seed: 0,
            engine: Engine::NelderMead,
            xtol: 1e-10,
            max_evals: 4000,
        }
    }
}

/// Convenience wrapper around [`MultiStart::minimize`] with default
/// tolerances.
pub fn multistart_minimize<F>(objective: F, bounds: &BoxSpec, restarts: usize, seed: u64) -> Result<OptimReport>
where
    F: FnMut(&[f64]) -> f64,
{
    MultiStart {
        restarts,
        seed,
        ..MultiStart::default()
    }
    .minimize(objective, bounds, &[])
}

impl MultiStart {
    /// Runs one local search from every point in `extra_starts` (clamped to
    /// the box) and from `restarts` design points, and returns the best.
    /// Ties keep the earliest start.
    pub fn minimize<F>(&self, mut objective: F, bounds: &BoxSpec, extra_starts: &[Vec<f64>]) -> Result<OptimReport>
    where
        F: FnMut(&[f64]) -> f64,
    {
        if self.restarts == 0 && extra_starts.is_empty() {
            return Err(Error::Config("multi-start search needs at least one start".into()));
        }
        if !(self.xtol > 0.0) || self.max_evals == 0 {
            return Err(Error::Config("search tolerance and budget must be positive".into()));
        }
        let dim = bounds.dim();
        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(extra_starts.len() + self.restarts);
        for s in extra_starts {
            if s.len() != dim {
                return Err(Error::Shape(format!("start point has {} coordinates, box has {dim}", s.len())));
            }
            let mut s = s.clone();
            bounds.clamp(&mut s);
            starts.push(s);
        }
        starts.extend(design_points(bounds, self.restarts, self.seed));

        let mut local = Vec::with_capacity(starts.len());
        for (k, start) in starts.into_iter().enumerate() {
            let res = match self.engine {
                Engine::NelderMead if dim == 1 => line_search(&mut objective, bounds, &start, self.xtol, self.max_evals)?,
                Engine::NelderMead => nelder_mead(&mut objective, bounds, &start, self.xtol, self.max_evals)?,
                Engine::Annealing => {
                    let seed = self.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                    anneal(&mut objective, bounds, &start, self.xtol, self.max_evals, seed)?
                }
            };
            local.push(res);
        }
        let best = local
            .iter()
            .enumerate()
            .fold(0, |b, (i, r)| if r.value < local[b].value { i } else { b });
        Ok(OptimReport {
            best_point: local[best].point.clone(),
            best_value: local[best].value,
            evaluations: local.iter().map(|r| r.evaluations).sum(),
            converged: local.iter().any(|r| r.converged),
            local,
        })
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Rotated Halton points in the box; the prefix of length `k` is the same for
/// every `count >= k`.
fn design_points(bounds: &BoxSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|k| {
            (0..dim)
                .map(|d| {
                    let base = PRIMES[d % PRIMES.len()];
                    // dimensions beyond the prime table reuse bases with a
                    // different index offset
                    let idx = (k + 1) as u64 + (d / PRIMES.len()) as u64 * 7919;
                    let u = (radical_inverse(idx, base) + shift[d]).fract();
                    bounds.lower[d] + u * bounds.width(d)
                })
                .collect()
        })
        .collect()
}

struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { point: x.to_vec(), value: v });
        }
        Ok(v)
    }
}

/// Bounded Nelder-Mead from `start`. Trial points are clamped to the box.
/// After the simplex collapses the search is restarted from the best vertex
/// with a fresh simplex, until a restart brings no improvement.
pub fn nelder_mead<F>(objective: &mut F, bounds: &BoxSpec, start: &[f64], xtol: f64, max_evals: usize) -> Result<LocalResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut counted = Counted { f: objective, evals: 0 };
    let mut x = start.to_vec();
    bounds.clamp(&mut x);
    let mut fx = counted.eval(&x)?;
    let mut scale = 0.1;
    let mut converged = false;
    for _ in 0..8 {
        let (xn, fxn, conv) = nm_run(&mut counted, bounds, &x, fx, scale, xtol, max_evals)?;
        let improved = fxn < fx;
        if fxn <= fx {
            x = xn;
            fx = fxn;
        }
        converged = conv;
        if !conv || !improved || counted.evals >= max_evals {
            break;
        }
        scale = 0.01;
    }
    if !fx.is_finite() {
        return Err(Error::NonFinite { point: x, value: fx });
    }
    Ok(LocalResult {
        start: start.to_vec(),
        point: x,
        value: fx,
        evaluations: counted.evals,
        converged,
    })
}

/// Bounded one-dimensional search from `start`: Brent's method on a window
/// around the start, re-centred while the minimizer sits on an interior
/// window edge with a doubled width. The start itself is always a candidate.
pub fn line_search<F>(objective: &mut F, bounds: &BoxSpec, start: &[f64], xtol: f64, max_evals: usize) -> Result<LocalResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if bounds.dim() != 1 || start.len() != 1 {
        return Err(Error::Shape("line search needs a one-dimensional box".into()));
    }
    let mut counted = Counted { f: objective, evals: 0 };
    let (lo, hi) = (bounds.lower[0], bounds.upper[0]);
    let x0 = start[0].clamp(lo, hi);
    let mut best = (x0, counted.eval(&[x0])?);
    let mut half = 0.1 * (hi - lo);
    let mut centre = x0;
    let mut converged = false;
    for _ in 0..50 {
        let (a, b) = ((centre - half).max(lo), (centre + half).min(hi));
        if b <= a {
            converged = true;
            break;
        }
        let (x, fx, tol, ok) = brent_window(&mut counted, a, b, xtol, max_evals)?;
        if fx < best.1 {
            best = (x, fx);
        }
        if !ok {
            break;
        }
        let at_lo = x - a <= 3.0 * tol;
        let at_hi = b - x <= 3.0 * tol;
        if at_lo && a == lo || at_hi && b == hi {
            // the box edge itself is never sampled by the window search
            let edge = if at_lo { lo } else { hi };
            let fe = counted.eval(&[edge])?;
            if fe < best.1 {
                best = (edge, fe);
            }
        }
        if (at_lo && a > lo) || (at_hi && b < hi) {
            centre = x;
            half *= 2.0;
            continue;
        }
        converged = true;
        break;
    }
    Ok(LocalResult {
        start: start.to_vec(),
        point: vec![best.0],
        value: best.1,
        evaluations: counted.evals,
        converged,
    })
}

/// Brent's bounded minimization on `[a, b]`. Returns the minimizer, its
/// value, the final tolerance and whether it converged within budget.
fn brent_window<F>(counted: &mut Counted<'_, F>, a: f64, b: f64, xtol: f64, max_evals: usize) -> Result<(f64, f64, f64, bool)>
where
    F: FnMut(&[f64]) -> f64,
{
    let ratio = 0.5 * (3.0 - 5f64.sqrt());
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut sa, mut sb) = (a, b);
    let mut x = sa + ratio * (sb - sa);
    let (mut w, mut v) = (x, x);
    let mut fx = counted.eval(&[x])?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    loop {
        let xm = 0.5 * (sa + sb);
        let tol1 = sqrt_eps * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (sb - sa) {
            return Ok((x, fx, tol1, true));
        }
        if counted.evals >= max_evals {
            return Ok((x, fx, tol1, false));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let r = e;
            e = d;
            if p.abs() < (0.5 * q * r).abs() && p > q * (sa - x) && p < q * (sb - x) {
                d = p / q;
                let u = x + d;
                if u - sa < tol2 || sb - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { sa - x } else { sb - x };
            d = ratio * e;
        }
        let u = x + if d.abs() >= tol1 { d } else if d > 0.0 { tol1 } else { -tol1 };
        let fu = counted.eval(&[u])?;
        if fu <= fx {
            if u >= x {
                sa = x;
            } else {
                sb = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                sa = u;
            } else {
                sb = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
}

fn nm_run<F>(
    counted: &mut Counted<'_, F>,
    bounds: &BoxSpec,
    x0: &[f64],
    f0: f64,
    scale: f64,
    xtol: f64,
    max_evals: usize,
) -> Result<(Vec<f64>, f64, bool)>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Ok((Vec::new(), f0, true));
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for i in 0..n {
        let mut p = x0.to_vec();
        let w = bounds.width(i);
        let step = scale * w;
        p[i] = if p[i] + step <= bounds.upper[i] { p[i] + step } else { p[i] - step };
        bounds.clamp(&mut p);
        values.push(counted.eval(&p)?);
        simplex.push(p);
    }
    let clamp = |mut p: Vec<f64>| {
        bounds.clamp(&mut p);
        p
    };
    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];
        let diameter = simplex
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= xtol {
            return Ok((simplex[best].clone(), values[best], true));
        }
        if counted.evals >= max_evals {
            return Ok((simplex[best].clone(), values[best], false));
        }
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = clamp(along(1.0));
        let fr = counted.eval(&xr)?;
        if fr < values[best] {
            let xe = clamp(along(2.0));
            let fe = counted.eval(&xe)?;
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = clamp(along(0.5));
            let fc = counted.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = clamp(along(-0.5));
            let fc = counted.eval(&xc)?;
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        let xb = simplex[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            let p: Vec<f64> = xb.iter().zip(&simplex[i]).map(|(b, v)| b + 0.5 * (v - b)).collect();
            values[i] = counted.eval(&p)?;
            simplex[i] = p;
        }
    }
}

/// Simulated annealing with Gaussian proposals whose width and temperature
/// decay geometrically, then a Nelder-Mead polish from the best point seen.
fn anneal<F>(objective: &mut F, bounds: &BoxSpec, start: &[f64], xtol: f64, max_evals: usize, seed: u64) -> Result<LocalResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bounds.dim();
    let budget = (max_evals / 2).max(1);
    let mut counted = Counted { f: objective, evals: 0 };
    let mut x = start.to_vec();
    bounds.clamp(&mut x);
    let mut fx = counted.eval(&x)?;
    let mut best = (x.clone(), fx);
    let mut temp = fx.abs().max(1e-12) * 0.1;
    let cool = (1e-6_f64).powf(1.0 / budget as f64);
    let mut width = 0.2;
    let shrink = (1e-3_f64).powf(1.0 / budget as f64);
    for _ in 1..budget {
        let mut y: Vec<f64> = (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[i] + width * bounds.width(i) * z
            })
            .collect();
        bounds.clamp(&mut y);
        let fy = counted.eval(&y)?;
        let accept = fy <= fx || rng.random::<f64>() < (-(fy - fx) / temp).exp();
        if accept {
            x = y;
            fx = fy;
            if fx < best.1 {
                best = (x.clone(), fx);
            }
        }
        temp *= cool;
        width *= shrink;
    }
    let spent = counted.evals;
    let polish = nelder_mead(counted.f, bounds, &best.0, xtol, max_evals.saturating_sub(spent).max(1))?;
    let (point, value) = if polish.value <= best.1 { (polish.point, polish.value) } else { best };
    Ok(LocalResult {
        start: start.to_vec(),
        point,
        value,
        evaluations: spent + polish.evaluations,
        converged: polish.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(dim: usize, lo: f64, hi: f64) -> BoxSpec {
        BoxSpec::new(vec![lo; dim], vec![hi; dim]).unwrap()
    }

    #[test]
    fn convex_bowl() {
        let c = [0.3, -1.2, 2.0];
        let b = unit_box(3, -3.0, 3.0);
        let r = multistart_minimize(|x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum(), &b, 4, 1).unwrap();
        for (x, c) in r.best_point.iter().zip(&c) {
            assert!((x - c).abs() < 1e-6);
        }
        assert!(r.converged);
        assert!(b.contains(&r.best_point));
    }

    #[test]
    fn bowl_centred_outside_lands_on_boundary() {
        let b = unit_box(2, 0.0, 1.0);
        let r = multistart_minimize(|x: &[f64]| (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2), &b, 4, 3).unwrap();
        assert!((r.best_point[0] - 1.0).abs() < 1e-8);
        assert!(r.best_point[1].abs() < 1e-8);
    }

    #[test]
    fn line_search_quadratic_and_edges() {
        let b = unit_box(1, -0.5, 0.5);
        let mut f = |x: &[f64]| (x[0] - 0.1234).powi(2);
        let r = line_search(&mut f, &b, &[0.0], 1e-10, 4000).unwrap();
        assert!(r.converged);
        assert!((r.point[0] - 0.1234).abs() < 1e-7);
        assert!(r.evaluations < 60, "{}", r.evaluations);
        // minimizer outside the box: the edge is hit exactly
        let mut g = |x: &[f64]| (x[0] - 3.0).powi(2);
        let r = line_search(&mut g, &b, &[-0.4], 1e-10, 4000).unwrap();
        assert_eq!(r.point[0], 0.5);
        // the start wins ties and is never worse
        let mut flat = |_: &[f64]| 1.0;
        let r = line_search(&mut flat, &b, &[0.2], 1e-10, 4000).unwrap();
        assert_eq!(r.point[0], 0.2);
    }

    #[test]
    fn line_search_matches_dense_scan_on_wiggly_function() {
        let b = unit_box(1, -2.0, 2.0);
        let f = |x: &[f64]| (3.0 * x[0]).sin() + 0.1 * x[0] * x[0];
        let r = multistart_minimize(f, &b, 8, 1).unwrap();
        let scan = (0..=40_000)
            .map(|i| -2.0 + 4.0 * i as f64 / 40_000.0)
            .map(|x| f(&[x]))
            .fold(f64::INFINITY, f64::min);
        assert!(r.best_value <= scan + 1e-12);
    }

    /// Double well with minima at x = -1 (value 0) and x = 1.5 (value 0.5).
    fn double_well(x: &[f64]) -> f64 {
        let a = (x[0] + 1.0).powi(2) + x[1] * x[1];
        let b = (x[0] - 1.5).powi(2) + x[1] * x[1] + 0.5;
        a.min(b)
    }

    #[test]
    fn double_well_global_basin() {
        let b = unit_box(2, -2.0, 3.0);
        // single start inside the wrong basin gets stuck
        let local = MultiStart { restarts: 0, ..MultiStart::default() }
            .minimize(double_well, &b, &[vec![2.5, 0.5]])
            .unwrap();
        assert!((local.best_value - 0.5).abs() < 1e-6);
        let r = multistart_minimize(double_well, &b, 16, 11).unwrap();
        assert!(r.best_value.abs() < 1e-6);
        assert!((r.best_point[0] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn deterministic_under_seed() {
        let b = unit_box(3, -2.0, 2.0);
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[1] * x[1] + (x[2] - 0.2).abs();
        let r1 = multistart_minimize(f, &b, 6, 99).unwrap();
        let r2 = multistart_minimize(f, &b, 6, 99).unwrap();
        assert_eq!(r1.best_point, r2.best_point);
        assert_eq!(r1.best_value.to_bits(), r2.best_value.to_bits());
        assert_eq!(r1.evaluations, r2.evaluations);
        assert_eq!(r1.local, r2.local);
    }

    #[test]
    fn monotone_in_restarts() {
        let b = unit_box(2, -4.0, 4.0);
        let f = |x: &[f64]| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + 0.05 * (x[0] * x[0] + x[1] * x[1]);
        let mut prev = f64::INFINITY;
        for restarts in 1..20 {
            let r = multistart_minimize(f, &b, restarts, 5).unwrap();
            assert!(r.best_value <= prev);
            prev = r.best_value;
        }
    }

    #[test]
    fn best_not_worse_than_any_start() {
        let b = unit_box(2, -1.0, 1.0);
        let f = |x: &[f64]| (5.0 * x[0]).cos() + x[1].powi(4);
        let r = multistart_minimize(f, &b, 10, 2).unwrap();
        for l in &r.local {
            assert!(r.best_value <= f(&l.start));
            assert!(b.contains(&l.point));
        }
    }

    #[test]
    fn nan_objective_is_reported() {
        let b = unit_box(1, 0.0, 1.0);
        let err = multistart_minimize(|_: &[f64]| f64::NAN, &b, 2, 0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn annealing_engine_solves_bowl() {
        let b = unit_box(2, -3.0, 3.0);
        let ms = MultiStart {
            restarts: 3,
            seed: 4,
            engine: Engine::Annealing,
            ..MultiStart::default()
        };
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2);
        let r = ms.minimize(f, &b, &[]).unwrap();
        assert!((r.best_point[0] - 1.0).abs() < 1e-6);
        assert!((r.best_point[1] + 0.5).abs() < 1e-6);
        let r2 = ms.minimize(f, &b, &[]).unwrap();
        assert_eq!(r.best_point, r2.best_point);
    }

    #[test]
    fn design_prefix_is_nested() {
        let b = unit_box(3, -1.0, 2.0);
        let short = design_points(&b, 5, 42);
        let long = design_points(&b, 12, 42);
        assert_eq!(short[..], long[..5]);
        assert!(long.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn invalid_box() {
        assert!(BoxSpec::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSpec::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxSpec::new(vec![f64::NAN], vec![1.0]).is_err());
    }
}
