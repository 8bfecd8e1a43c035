//! Time-series factor model read off the decomposition.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomposition::FsvdModel;
use crate::error::{FsvdError, Result};
use crate::spline::SplineFunction;

const ORTHO_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FactorModel {
    pub k: usize,
    /// n × K loading matrix, row-major, orthonormal columns.
    pub loadings: Vec<Vec<f64>>,
    pub factors: Vec<SplineFunction>,
    pub rotation: Vec<Vec<f64>>,
}

/// Serializable view used by the JSON writer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorSummary {
    pub k: usize,
    pub loadings: Vec<Vec<f64>>,
    pub rotation: Vec<Vec<f64>>,
    pub knots: Vec<f64>,
    pub factor_values: Vec<Vec<f64>>,
}

impl FactorModel {
    /// `Σ_k L_ik F_k(t)`.
    pub fn signal(&self, i: usize, t: f64) -> f64 {
        self.loadings[i]
            .iter()
            .zip(&self.factors)
            .map(|(l, f)| l * f.evaluate(t))
            .sum()
    }

    pub fn summary(&self) -> FactorSummary {
        FactorSummary {
            k: self.k,
            loadings: self.loadings.clone(),
            rotation: self.rotation.clone(),
            knots: self
                .factors
                .first()
                .map(|f| f.basis().knots().to_vec())
                .unwrap_or_default(),
            factor_values: self.factors.iter().map(|f| f.values().to_vec()).collect(),
        }
    }
}

/// Loadings `L = Q Bᵀ` and factors `F = B R D φ`, where `QR` is the thin QR
/// of the fitted vectors `(a_1..a_K)` and `D = diag(ρ)`. When the vectors are
/// already orthonormal `R = I` and this is `F = B D φ`.
pub fn factor_model(model: &FsvdModel, k: usize, b: Option<&DMatrix<f64>>) -> Result<FactorModel> {
    if k == 0 || model.rank() < k {
        return Err(FsvdError::NotEnoughComponents {
            have: model.rank(),
            need: k.max(1),
        });
    }
    let b = match b {
        Some(b) => {
            if b.nrows() != k || b.ncols() != k {
                return Err(FsvdError::ShapeMismatch(format!(
                    "rotation is {}x{}, expected {k}x{k}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            let dev = (b.transpose() * b - DMatrix::identity(k, k)).abs().max();
            if !(dev <= ORTHO_TOL) {
                return Err(FsvdError::NonOrthogonalB(dev));
            }
            b.clone()
        }
        None => DMatrix::identity(k, k),
    };
    let n = model.n();
    let comps = &model.components[..k];
    let a = DMatrix::from_fn(n, k, |i, j| comps[j].a[i]);
    let qr = a.qr();
    let (mut q, mut r) = (qr.q(), qr.r());
    // Keep each column pointing the same way as the fitted vector.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    let l = &q * b.transpose();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, comps.iter().map(|c| c.rho)));
    let mix = &b * r * d;
    let factors = (0..k)
        .map(|row| {
            let terms: Vec<(f64, &SplineFunction)> =
                (0..k).map(|j| (mix[(row, j)], &comps[j].phi)).collect();
            SplineFunction::linear_combination(&terms)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorModel {
        k,
        loadings: (0..n).map(|i| l.row(i).iter().copied().collect()).collect(),
        factors,
        rotation: (0..k).map(|i| b.row(i).iter().copied().collect()).collect(),
    })
}
