//! Accuracy metrics for vectors, functions, trajectories, labels and loadings.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{FsvdError, Result};
use crate::linalg::dot;

/// Trapezoid weights for an equispaced grid on [0,1] with `m` points.
pub fn trapezoid_weights(m: usize) -> Vec<f64> {
    if m < 2 {
        return vec![1.0; m];
    }
    let h = 1.0 / (m - 1) as f64;
    (0..m)
        .map(|k| if k == 0 || k == m - 1 { 0.5 * h } else { h })
        .collect()
}

fn weighted_dot(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(v).zip(w).map(|((a, b), c)| a * b * c).sum()
}

fn sine_from(uv: f64, uu: f64, vv: f64) -> Result<f64> {
    if !(uu > 0.0) || !(vv > 0.0) {
        return Err(FsvdError::ZeroNorm);
    }
    let c = uv / (uu.sqrt() * vv.sqrt());
    Ok((1.0 - c * c).max(0.0).sqrt())
}

/// Sine of the angle between two vectors.
pub fn dist_vectors(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(FsvdError::LengthMismatch(u.len(), v.len()));
    }
    sine_from(dot(u, v), dot(u, u), dot(v, v))
}

/// Sine of the angle between two functions sampled on a common equispaced
/// grid over [0,1], using trapezoid quadrature.
pub fn dist_functions(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(FsvdError::LengthMismatch(u.len(), v.len()));
    }
    let w = trapezoid_weights(u.len());
    sine_from(weighted_dot(u, v, &w), weighted_dot(u, u, &w), weighted_dot(v, v, &w))
}

/// `100 Σ‖X_i − X̂_i‖² / Σ‖X_i‖²` with rows sampled on an equispaced grid.
pub fn nmse_x(truth: &[Vec<f64>], est: &[Vec<f64>]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(FsvdError::LengthMismatch(truth.len(), est.len()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in truth.iter().zip(est) {
        if x.len() != y.len() {
            return Err(FsvdError::LengthMismatch(x.len(), y.len()));
        }
        let w = trapezoid_weights(x.len());
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        num += weighted_dot(&d, &d, &w);
        den += weighted_dot(x, x, &w);
    }
    if !(den > 0.0) {
        return Err(FsvdError::ZeroDenominator);
    }
    Ok(100.0 * num / den)
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index (Hubert and Arabie).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FsvdError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(FsvdError::InvalidConfig("ARI needs at least two items".into()));
    }
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v)).sum();
    let expected = sa * sb / choose2(n as f64);
    let max = 0.5 * (sa + sb);
    if max == expected {
        // Both partitions trivial in the same way.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Procrustes-aligned loading error `min_M 100‖A − ÂM‖²/‖A‖²` over
/// orthogonal M. Matrices are row-major n × K.
pub fn nmse_loadings(a: &[Vec<f64>], ahat: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    let k = a.first().map_or(0, Vec::len);
    if n == 0 || k == 0 || ahat.len() != n || ahat.iter().chain(a).any(|r| r.len() != k) {
        return Err(FsvdError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            n,
            k,
            ahat.len(),
            ahat.first().map_or(0, Vec::len)
        )));
    }
    let am = DMatrix::from_fn(n, k, |i, j| a[i][j]);
    let hm = DMatrix::from_fn(n, k, |i, j| ahat[i][j]);
    let cross = hm.transpose() * &am;
    let svd = cross.svd(true, true);
    let m = svd.u.expect("requested") * svd.v_t.expect("requested");
    let diff = &am - &hm * m;
    let norm_a = am.norm_squared();
    if !(norm_a > 0.0) {
        return Err(FsvdError::ZeroDenominator);
    }
    Ok(100.0 * diff.norm_squared() / norm_a)
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
