use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which the design is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Minimizes `|design * x - target|` through a thin SVD.
///
/// Fails with an identifiability error when the design does not have full
/// column rank (relative singular-value cutoff `1e-10`).
pub fn least_squares_solve(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = design.shape();
    if rows != target.len() {
        return Err(Error::Shape(format!(
            "design has {rows} rows but target has {} entries",
            target.len()
        )));
    }
    if cols == 0 || rows < cols {
        return Err(Error::Identifiability(format!(
            "a {rows}x{cols} design cannot have full column rank"
        )));
    }
    if design.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("least-squares input is not finite".into()));
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(Error::Identifiability(format!(
            "design is rank deficient (singular values {smin:e} / {smax:e})"
        )));
    }
    svd.solve(target, 0.0)
        .map_err(|e| Error::Identifiability(format!("least-squares solve failed: {e}")))
}
