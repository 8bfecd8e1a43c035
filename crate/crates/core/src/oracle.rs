//! Brute-force dense-grid references for testing the decomposition.
//!
//! With trapezoid weights `w_g` on the grid, `∫ X Xᵀ` becomes `M Mᵀ` for
//! `M = X diag(√w)`, so the functional SVD reduces to a matrix SVD of `M`.

use nalgebra::DMatrix;

use crate::error::{FsvdError, Result};
use crate::linalg::sign_fix;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGridData {
    pub grid: Vec<f64>,
    /// n × G, row-major.
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleComponent {
    pub rho: f64,
    pub a: Vec<f64>,
    pub phi_grid: Vec<f64>,
}

impl DenseGridData {
    pub fn new(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() < 3 {
            return Err(FsvdError::InvalidConfig("dense grid needs at least 3 points".into()));
        }
        if grid[0] != 0.0 || *grid.last().expect("nonempty") != 1.0 {
            return Err(FsvdError::InvalidConfig("dense grid must span [0,1]".into()));
        }
        if !grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(FsvdError::NonIncreasingKnots(
                grid.windows(2).position(|w| w[1] <= w[0]).unwrap_or(0) + 1,
            ));
        }
        if values.is_empty() || values.iter().any(|r| r.len() != grid.len()) {
            return Err(FsvdError::ShapeMismatch("values must be n × G".into()));
        }
        Ok(DenseGridData { grid, values })
    }

    /// `n` functions sampled on `g` equispaced points.
    pub fn sample(n: usize, g: usize, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let grid: Vec<f64> = (0..g).map(|k| k as f64 / (g - 1).max(1) as f64).collect();
        let values = (0..n).map(|i| grid.iter().map(|&t| f(i, t)).collect()).collect();
        DenseGridData::new(grid, values)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Trapezoid weights on the (possibly uneven) grid.
    pub fn weights(&self) -> Vec<f64> {
        let x = &self.grid;
        let g = x.len();
        (0..g)
            .map(|k| {
                let left = if k > 0 { x[k] - x[k - 1] } else { 0.0 };
                let right = if k + 1 < g { x[k + 1] - x[k] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Quadrature inner product of two sampled functions.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights().iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum()
    }

    fn weighted_svd(&self) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
        let w = self.weights();
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let m = DMatrix::from_fn(self.n(), self.grid.len(), |i, g| self.values[i][g] * sw[g]);
        let svd = m.svd(true, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
        let u = svd.u.expect("requested").select_columns(&order);
        let vt = svd.v_t.expect("requested").select_rows(&order);
        (s, u, vt, sw)
    }
}

/// Leading `r` functional singular triples of the sampled data.
pub fn dense_svd_reference(d: &DenseGridData, r: usize) -> Result<Vec<OracleComponent>> {
    if r > d.n().min(d.grid.len()) {
        return Err(FsvdError::NotEnoughComponents {
            have: d.n().min(d.grid.len()),
            need: r,
        });
    }
    let (s, u, vt, sw) = d.weighted_svd();
    Ok((0..r)
        .map(|k| {
            let mut a: Vec<f64> = u.column(k).iter().copied().collect();
            let mut phi: Vec<f64> = vt.row(k).iter().zip(&sw).map(|(v, w)| v / w).collect();
            let nrm = d.inner(&phi, &phi).sqrt();
            phi.iter_mut().for_each(|p| *p /= nrm);
            if sign_fix(&mut a) {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
            OracleComponent {
                rho: s[k] * nrm,
                a,
                phi_grid: phi,
            }
        })
        .collect())
}

/// `min_{f, a} Σ_i ‖X_i − a_i f‖²`, i.e. the energy beyond the first triple.
pub fn best_rank_one_error(d: &DenseGridData) -> f64 {
    let (s, ..) = d.weighted_svd();
    s.iter().skip(1).map(|v| v * v).sum()
}
