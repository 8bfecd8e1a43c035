//! Penalized weighted least squares over natural cubic splines.

use std::sync::Arc;

use super::{DesignRow, SplineBasis, SplineFunction};
use crate::data::FunctionalDataset;
use crate::error::{FsvdError, Result};
use crate::linalg::BandedSym;

/// One subject's contribution to the weighted fit.
#[derive(Clone, Copy, Debug)]
pub struct WlsRow<'a> {
    pub subject_weight: f64,
    pub times: &'a [f64],
    pub targets: &'a [f64],
    pub inv_j: f64,
}

/// Evaluation rows of every observation time, cached per dataset.
#[derive(Clone, Debug)]
pub(crate) struct Design {
    pub rows: Vec<Vec<DesignRow>>,
}

impl Design {
    pub fn new(basis: &SplineBasis, data: &FunctionalDataset) -> Self {
        Design {
            rows: data
                .subjects()
                .iter()
                .map(|s| s.points.iter().map(|p| basis.value_row(p.time)).collect())
                .collect(),
        }
    }

    pub fn from_times(basis: &SplineBasis, times: &[&[f64]]) -> Self {
        Design {
            rows: times
                .iter()
                .map(|ts| ts.iter().map(|&t| basis.value_row(t)).collect())
                .collect(),
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(FsvdError::InvalidConfig(format!(
            "smoothing parameter must be finite and >= 0, got {nu}"
        )));
    }
    Ok(())
}

/// Minimize `Σ_i inv_j_i Σ_j (y_ij - w_i f(t_ij))² + ν ∫ f''²` in the local
/// basis. Subjects with zero weight are skipped.
pub(crate) fn solve_coefficients(
    basis: &SplineBasis,
    design: &Design,
    weights: &[f64],
    inv_j: &[f64],
    targets: &[Vec<f64>],
    nu: f64,
) -> Result<Vec<f64>> {
    check_nu(nu)?;
    let k = basis.len();
    let mut a = BandedSym::zeros(k, super::bspline::BAND);
    let mut b = vec![0.0; k];
    for (i, rows) in design.rows.iter().enumerate() {
        let w = weights[i];
        if w == 0.0 || rows.is_empty() {
            continue;
        }
        let ww = inv_j[i] * w * w;
        let wy = inv_j[i] * w;
        for (r, &y) in rows.iter().zip(&targets[i]) {
            r.accumulate_outer(&mut a, ww);
            r.accumulate(&mut b, wy * y);
        }
    }
    if nu > 0.0 {
        a.axpy(nu, basis.penalty_band());
    }
    solve_with_jitter(a, &b)
}

/// Cholesky solve; on a nonpositive pivot retry once with a small ridge
/// `1e-10 * trace / K` on the diagonal.
pub(crate) fn solve_with_jitter(a: BandedSym, b: &[f64]) -> Result<Vec<f64>> {
    match a.clone().cholesky_solve(b) {
        Err(FsvdError::SingularSystem) => {
            let mut a = a;
            let jitter = 1e-10 * a.trace() / a.dim() as f64;
            if !(jitter > 0.0) {
                return Err(FsvdError::SingularSystem);
            }
            a.add_diagonal(jitter);
            a.cholesky_solve(b)
        }
        other => other,
    }
}

/// Penalized weighted least-squares spline fit, returned in knot-value form.
pub fn solve_penalized_wls(
    basis: &Arc<SplineBasis>,
    rows: &[WlsRow<'_>],
    nu: f64,
) -> Result<SplineFunction> {
    check_nu(nu)?;
    for r in rows {
        if r.times.len() != r.targets.len() {
            return Err(FsvdError::DimensionMismatch(format!(
                "{} times but {} targets",
                r.times.len(),
                r.targets.len()
            )));
        }
    }
    let times: Vec<&[f64]> = rows.iter().map(|r| r.times).collect();
    let design = Design::from_times(basis, &times);
    let weights: Vec<f64> = rows.iter().map(|r| r.subject_weight).collect();
    let inv_j: Vec<f64> = rows.iter().map(|r| r.inv_j).collect();
    let targets: Vec<Vec<f64>> = rows.iter().map(|r| r.targets.to_vec()).collect();
    let c = solve_coefficients(basis, &design, &weights, &inv_j, &targets, nu)?;
    Ok(SplineFunction::from_coefficients(Arc::clone(basis), &c))
}
