//! Projections onto the centrality constraint sets.
//!
//! Both parameter vectors are stored as `n` positive scales followed by `n`
//! real offsets. Scales are normalized to unit geometric mean by centering
//! their logarithms. Amplitude offsets are mean-centered. Phase shifts are
//! projected onto `{sum = 0} ∩ [-1/2, 1/2]^n`, which is the Euclidean
//! projection `clip(x - mu)` for the unique `mu` that zeroes the sum.

use crate::error::{Error, Result};

/// Scales below this value are raised to it before normalization.
pub const POSITIVITY_FLOOR: f64 = 1e-6;

/// Output of a projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub values: Vec<f64>,
    /// Indices of scales that were at or below [`POSITIVITY_FLOOR`] and got
    /// raised to it.
    pub floored: Vec<usize>,
}

fn split(v: &[f64], what: &str) -> Result<usize> {
    if v.is_empty() || !v.len().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "{what} vector must hold n scales and n offsets, got length {}",
            v.len()
        )));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("{what} entry {i} is not finite")));
    }
    Ok(v.len() / 2)
}

fn normalize_scales(scales: &[f64], out: &mut Vec<f64>, floored: &mut Vec<usize>) {
    let logs: Vec<f64> = scales
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if s <= POSITIVITY_FLOOR {
                floored.push(i);
                POSITIVITY_FLOOR.ln()
            } else {
                s.ln()
            }
        })
        .collect();
    let center = logs.iter().sum::<f64>() / logs.len() as f64;
    out.extend(logs.iter().map(|l| (l - center).exp()));
}

/// Projects `(a_1..a_n, b_1..b_n)` (inverse amplitude scales, then offsets)
/// onto `{prod a_j^(1/n) = 1, sum b_j = 0, a_j > 0}`.
pub fn project_amplitude(gamma: &[f64]) -> Result<Projected> {
    let n = split(gamma, "amplitude")?;
    let mut values = Vec::with_capacity(2 * n);
    let mut floored = Vec::new();
    normalize_scales(&gamma[..n], &mut values, &mut floored);
    let offsets = &gamma[n..];
    let mean = offsets.iter().sum::<f64>() / n as f64;
    values.extend(offsets.iter().map(|b| b - mean));
    Ok(Projected { values, floored })
}

/// Projects `(k_1..k_n, z_1..z_n)` onto
/// `{prod k_j^(1/n) = 1, sum z_j = 0, z_j in [-1/2, 1/2]}`.
pub fn project_phase(xi: &[f64]) -> Result<Projected> {
    let n = split(xi, "phase")?;
    let mut values = Vec::with_capacity(2 * n);
    let mut floored = Vec::new();
    normalize_scales(&xi[..n], &mut values, &mut floored);
    values.extend(project_centered_box(&xi[n..], 0.5));
    Ok(Projected { values, floored })
}

/// Euclidean projection of `x` onto `{sum = 0} ∩ [-bound, bound]^n`.
fn project_centered_box(x: &[f64], bound: f64) -> Vec<f64> {
    let clip = |v: f64| v.clamp(-bound, bound);
    let total = |mu: f64| x.iter().map(|&v| clip(v - mu)).sum::<f64>();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if x.iter().all(|&v| (v - mean).abs() <= bound) {
        return x.iter().map(|v| v - mean).collect();
    }
    // total(mu) is non-increasing; bracket its root.
    let lo_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_x = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_x - bound, hi_x + bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // On the active piece the sum is affine in mu; solve it exactly.
    let mu0 = 0.5 * (lo + hi);
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut fixed = 0.0;
    for &v in x {
        let d = v - mu0;
        if d > bound {
            fixed += bound;
        } else if d < -bound {
            fixed -= bound;
        } else {
            free_sum += v;
            free += 1;
        }
    }
    let mu = if free > 0 {
        (free_sum + fixed) / free as f64
    } else {
        mu0
    };
    x.iter().map(|&v| clip(v - mu)).collect()
}
