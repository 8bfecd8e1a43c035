//! Scalar-on-function regression through the component scores.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decomposition::FsvdModel;
use crate::error::{FsvdError, Result};
use crate::spline::SplineFunction;

pub const DEFAULT_R_USE: usize = 3;
const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct RegressionModel {
    pub alpha: f64,
    pub beta_coeffs: Vec<f64>,
    pub beta_fn: SplineFunction,
    pub score_matrix_cond: f64,
    pub fitted: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub alpha: f64,
    pub beta_coeffs: Vec<f64>,
    pub knots: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub score_matrix_cond: f64,
    pub fitted: Vec<f64>,
}

impl RegressionModel {
    pub fn summary(&self) -> RegressionSummary {
        RegressionSummary {
            alpha: self.alpha,
            beta_coeffs: self.beta_coeffs.clone(),
            knots: self.beta_fn.basis().knots().to_vec(),
            beta_values: self.beta_fn.values().to_vec(),
            score_matrix_cond: self.score_matrix_cond,
            fitted: self.fitted.clone(),
        }
    }
}

/// OLS of `z` on `[1, ξ_1..ξ_R]` with `ξ_ir = ρ_r a_ir`.
pub fn regress(model: &FsvdModel, z: &[f64], r_use: usize) -> Result<RegressionModel> {
    let n = model.n();
    if z.len() != n {
        return Err(FsvdError::LengthMismatch(z.len(), n));
    }
    if r_use == 0 || r_use > model.rank() {
        return Err(FsvdError::NotEnoughComponents {
            have: model.rank(),
            need: r_use.max(1),
        });
    }
    if n <= r_use + 1 {
        return Err(FsvdError::InvalidConfig(format!(
            "need more than {} subjects for {r_use} predictors",
            r_use + 1
        )));
    }
    let scores = model.scores(r_use);
    let x = DMatrix::from_fn(n, r_use + 1, |i, j| if j == 0 { 1.0 } else { scores[i][j - 1] });
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(FsvdError::RankDeficientDesign(cond));
    }
    let y = DVector::from_column_slice(z);
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| FsvdError::InvalidConfig(e.to_string()))?;
    let fitted = (&x * &coef).iter().copied().collect();
    let beta_coeffs: Vec<f64> = coef.iter().skip(1).copied().collect();
    let terms: Vec<(f64, &SplineFunction)> = beta_coeffs
        .iter()
        .zip(&model.components)
        .map(|(b, c)| (*b, &c.phi))
        .collect();
    Ok(RegressionModel {
        alpha: coef[0],
        beta_fn: SplineFunction::linear_combination(&terms)?,
        beta_coeffs,
        score_matrix_cond: cond,
        fitted,
    })
}
