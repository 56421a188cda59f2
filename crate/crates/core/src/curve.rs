//! Sampled curves on a uniform grid over the unit interval.
//!
//! Curves are stored as their values at `m` equally spaced nodes
//! `t_i = i / (m - 1)`. Between nodes they are linear; outside `[0, 1]` they
//! are extended by the boundary value. All integrals use the composite
//! trapezoid rule, which is exact for the product of a piecewise-linear
//! curve with a constant and matches the representation used everywhere
//! else in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of nodes of the working grid.
pub const DEFAULT_GRID_POINTS: usize = 101;

/// Uniform grid on `[0, 1]` with `m >= 2` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct TimeGrid {
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    m: usize,
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        TimeGrid::new(r.m)
    }
}

impl From<TimeGrid> for GridRepr {
    fn from(g: TimeGrid) -> Self {
        GridRepr { m: g.m }
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { m: DEFAULT_GRID_POINTS }
    }
}

impl TimeGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("a grid needs at least 2 points, got {m}")));
        }
        Ok(TimeGrid { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        i as f64 / (self.m - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.point(i)).collect()
    }

    /// Trapezoid quadrature weights; they sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.m];
        w[0] = 0.5 * h;
        w[self.m - 1] = 0.5 * h;
        w
    }

    /// Trapezoid approximation of the integral of `a * b` for two value
    /// vectors sampled on this grid.
    #[inline]
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.m);
        debug_assert_eq!(b.len(), self.m);
        let interior: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let last = self.m - 1;
        self.spacing() * (interior - 0.5 * (a[0] * b[0] + a[last] * b[last]))
    }

    /// Trapezoid approximation of the integral of `a`.
    #[inline]
    pub fn integral(&self, a: &[f64]) -> f64 {
        let total: f64 = a.iter().sum();
        self.spacing() * (total - 0.5 * (a[0] + a[self.m - 1]))
    }

    /// Squared trapezoid L2 distance between two value vectors.
    #[inline]
    pub fn dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        let last = self.m - 1;
        let sq = |x: f64, y: f64| (x - y) * (x - y);
        let interior: f64 = a.iter().zip(b).map(|(&x, &y)| sq(x, y)).sum();
        self.spacing() * (interior - 0.5 * (sq(a[0], b[0]) + sq(a[last], b[last])))
    }
}

/// A real-valued function on `[0, 1]` stored by its values on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "curve has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("curve value {i} is not finite")));
        }
        Ok(SampledCurve { grid, values })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub(crate) fn from_values_unchecked(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        SampledCurve { grid, values }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation inside `[0, 1]`, boundary value outside.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("evaluation point {t} is not finite")));
        }
        Ok(self.eval_clamped(t))
    }

    #[inline]
    pub(crate) fn eval_clamped(&self, t: f64) -> f64 {
        self.eval_pos(t * (self.values.len() - 1) as f64)
    }

    /// Evaluation at a position measured in grid steps from the left end.
    #[inline]
    pub(crate) fn eval_pos(&self, pos: f64) -> f64 {
        let last = self.values.len() - 1;
        if pos <= 0.0 {
            return self.values[0];
        }
        if pos >= last as f64 {
            return self.values[last];
        }
        let i = (pos.floor() as usize).min(last - 1);
        let frac = pos - i as f64;
        if frac == 0.0 {
            return self.values[i];
        }
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Value of the curve at the warped argument `(t - zeta) / kappa`.
    pub fn warp_evaluate(&self, t: f64, kappa: f64, zeta: f64) -> Result<f64> {
        check_warp(kappa, zeta)?;
        self.evaluate((t - zeta) / kappa)
    }

    /// Values of `t -> self((t - zeta) / kappa)` at this curve's own nodes.
    pub fn warped_values(&self, kappa: f64, zeta: f64) -> Result<Vec<f64>> {
        check_warp(kappa, zeta)?;
        Ok(self.warped_values_unchecked(kappa, zeta))
    }

    #[inline]
    pub(crate) fn warped_values_unchecked(&self, kappa: f64, zeta: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        self.fill_warped(kappa, zeta, &mut out);
        out
    }

    /// Writes the warped values into `out`, reusing its allocation.
    #[inline]
    pub(crate) fn fill_warped(&self, kappa: f64, zeta: f64, out: &mut Vec<f64>) {
        out.clear();
        if kappa == 1.0 && zeta == 0.0 {
            out.extend_from_slice(&self.values);
            return;
        }
        let steps = (self.grid.len() - 1) as f64;
        let offset = zeta * steps;
        out.extend((0..self.grid.len()).map(|i| self.eval_pos((i as f64 - offset) / kappa)));
    }

    /// Trapezoid integral over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        self.grid.integral(&self.values)
    }

    pub fn norm(&self) -> f64 {
        self.grid.dot(&self.values, &self.values).max(0.0).sqrt()
    }

    pub fn sup_distance(&self, other: &SampledCurve) -> Result<f64> {
        same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Whether the curve is numerically constant.
    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        self.values.iter().all(|v| (v - first).abs() <= 1e-14 * scale)
    }
}

fn check_warp(kappa: f64, zeta: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("phase scale must be positive and finite, got {kappa}")));
    }
    if !zeta.is_finite() {
        return Err(Error::Domain(format!("phase shift {zeta} is not finite")));
    }
    Ok(())
}

pub(crate) fn same_grid(f: &SampledCurve, g: &SampledCurve) -> Result<()> {
    if f.grid != g.grid {
        return Err(Error::Shape(format!(
            "curves live on grids of {} and {} points",
            f.grid.len(),
            g.grid.len()
        )));
    }
    Ok(())
}

/// Trapezoid approximation of the L2 inner product over `[0, 1]`.
pub fn l2_inner(f: &SampledCurve, g: &SampledCurve) -> Result<f64> {
    same_grid(f, g)?;
    Ok(f.grid.dot(&f.values, &g.values))
}

pub fn l2_distance(f: &SampledCurve, g: &SampledCurve) -> Result<f64> {
    same_grid(f, g)?;
    Ok(f.grid.dist2(&f.values, &g.values).max(0.0).sqrt())
}

/// Re-samples `c` onto `grid` by linear interpolation.
pub fn resample(c: &SampledCurve, grid: TimeGrid) -> SampledCurve {
    if c.grid == grid {
        return c.clone();
    }
    let values = grid.points().into_iter().map(|t| c.eval_clamped(t)).collect();
    SampledCurve::from_values_unchecked(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn identity(m: usize) -> SampledCurve {
        SampledCurve::from_fn(TimeGrid::new(m).unwrap(), |t| t).unwrap()
    }

    #[test]
    fn evaluate_interpolates_and_extends() {
        let c = identity(11);
        assert_abs_diff_eq!(c.evaluate(0.45).unwrap(), 0.45, epsilon = 1e-15);
        assert_eq!(c.evaluate(-0.3).unwrap(), 0.0);
        assert_eq!(c.evaluate(1.7).unwrap(), 1.0);
        assert!(matches!(c.evaluate(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(c.evaluate(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn warp_evaluate_cases() {
        let c = identity(11);
        assert_abs_diff_eq!(c.warp_evaluate(0.5, 1.0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.warp_evaluate(0.5, 0.5, 0.25).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(c.warp_evaluate(0.1, 1.0, 0.5).unwrap(), 0.0);
        assert!(c.warp_evaluate(0.1, 0.0, 0.0).is_err());
        assert!(c.warp_evaluate(0.1, -1.0, 0.0).is_err());
    }

    #[test]
    fn identity_warp_is_exact_at_nodes() {
        let grid = TimeGrid::new(37).unwrap();
        let c = SampledCurve::from_fn(grid, |t| (3.0 * t).sin() + t * t).unwrap();
        for (i, t) in grid.points().into_iter().enumerate() {
            assert_eq!(c.warp_evaluate(t, 1.0, 0.0).unwrap(), c.values()[i]);
            assert_eq!(c.evaluate(t).unwrap(), c.values()[i]);
        }
        assert_eq!(c.warped_values(1.0, 0.0).unwrap(), c.values());
    }

    #[test]
    fn inner_products() {
        let grid = TimeGrid::new(21).unwrap();
        let one = SampledCurve::constant(grid, 1.0).unwrap();
        let zero = SampledCurve::constant(grid, 0.0).unwrap();
        let g = SampledCurve::from_fn(grid, |t| (7.0 * t).cos()).unwrap();
        assert_abs_diff_eq!(l2_inner(&one, &one).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(l2_inner(&zero, &g).unwrap(), 0.0);

        let id = identity(101);
        assert!((l2_inner(&id, &id).unwrap() - 1.0 / 3.0).abs() <= 1e-4);
    }

    #[test]
    fn distances() {
        let grid = TimeGrid::new(101).unwrap();
        let zero = SampledCurve::constant(grid, 0.0).unwrap();
        let one = SampledCurve::constant(grid, 1.0).unwrap();
        assert_abs_diff_eq!(l2_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(l2_distance(&one, &one).unwrap(), 0.0);
        let id = identity(101);
        assert!((l2_distance(&zero, &id).unwrap() - 1.0 / 3f64.sqrt()).abs() <= 1e-4);
    }

    #[test]
    fn grid_mismatch_is_a_shape_error() {
        let a = identity(11);
        let b = identity(12);
        assert!(matches!(l2_inner(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(l2_distance(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn construction_checks() {
        assert!(TimeGrid::new(1).is_err());
        let grid = TimeGrid::new(3).unwrap();
        assert!(matches!(SampledCurve::new(grid, vec![0.0; 4]), Err(Error::Shape(_))));
        assert!(matches!(SampledCurve::new(grid, vec![0.0, f64::NAN, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn resample_linear_and_constant_exactly() {
        let fine = TimeGrid::new(101).unwrap();
        let r = resample(&identity(11), fine);
        let exact = identity(101);
        assert!(r.sup_distance(&exact).unwrap() <= 1e-15);

        let c = SampledCurve::constant(TimeGrid::new(7).unwrap(), 2.5).unwrap();
        let r = resample(&c, TimeGrid::new(13).unwrap());
        assert!(r.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn resample_sine_respects_interpolation_bound() {
        // |f - I f| <= h^2 / 8 * max|f''| for linear interpolation.
        let coarse = TimeGrid::new(24).unwrap();
        let f = |t: f64| (2.0 * PI * t).sin();
        let c = SampledCurve::from_fn(coarse, f).unwrap();
        let fine = TimeGrid::new(101).unwrap();
        let r = resample(&c, fine);
        let h = coarse.spacing();
        let bound = h * h / 8.0 * (2.0 * PI).powi(2);
        for (t, v) in fine.points().into_iter().zip(r.values()) {
            assert!((v - f(t)).abs() <= bound + 1e-15, "t={t}");
        }
    }

    #[test]
    fn quadrature_error_is_second_order() {
        let f = |t: f64| (2.0 * t).exp();
        let g = |t: f64| (3.0 * t).cos();
        // integral of exp(2t)cos(3t) over [0,1]
        let exact = {
            let e2 = 2f64.exp();
            (e2 * (2.0 * 3f64.cos() + 3.0 * 3f64.sin()) - 2.0) / 13.0
        };
        let err = |m: usize| {
            let grid = TimeGrid::new(m).unwrap();
            let a = SampledCurve::from_fn(grid, f).unwrap();
            let b = SampledCurve::from_fn(grid, g).unwrap();
            (l2_inner(&a, &b).unwrap() - exact).abs()
        };
        let e1 = err(41);
        let e2 = err(81);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn curve(grid: TimeGrid) -> impl Strategy<Value = SampledCurve> {
            prop::collection::vec(-10.0..10.0f64, grid.len())
                .prop_map(move |v| SampledCurve::new(grid, v).unwrap())
        }

        proptest! {
            #[test]
            fn triangle_inequality(
                (f, g, h) in (2usize..40).prop_flat_map(|m| {
                    let grid = TimeGrid::new(m).unwrap();
                    (curve(grid), curve(grid), curve(grid))
                })
            ) {
                let fh = l2_distance(&f, &h).unwrap();
                let fg = l2_distance(&f, &g).unwrap();
                let gh = l2_distance(&g, &h).unwrap();
                prop_assert!(fh <= fg + gh + 1e-12);
                prop_assert!((fg - l2_distance(&g, &f).unwrap()).abs() <= 1e-12);
            }
        }
    }
}
