//! Functional completion: evaluate the fitted low-rank expansion anywhere.

use crate::decomposition::FsvdModel;
use crate::error::{FsvdError, Result};

/// `X̂_i(t) = Σ_r ρ_r a_ir φ_r(t)` at each of `times`.
pub fn complete(model: &FsvdModel, i: usize, times: &[f64]) -> Result<Vec<f64>> {
    if i >= model.n() {
        return Err(FsvdError::SubjectOutOfRange {
            index: i,
            n: model.n(),
        });
    }
    Ok(times
        .iter()
        .map(|&t| model.components.iter().map(|c| c.value(i, t)).sum())
        .collect())
}

/// Completion of every subject on a shared grid, one row per subject.
pub fn complete_grid(model: &FsvdModel, grid: &[f64]) -> Vec<Vec<f64>> {
    let phis: Vec<Vec<f64>> = model
        .components
        .iter()
        .map(|c| c.phi.evaluate_many(grid))
        .collect();
    (0..model.n())
        .map(|i| {
            let mut row = vec![0.0; grid.len()];
            for (c, phi) in model.components.iter().zip(&phis) {
                let s = c.rho * c.a[i];
                for (x, p) in row.iter_mut().zip(phi) {
                    *x += s * p;
                }
            }
            row
        })
        .collect()
}
