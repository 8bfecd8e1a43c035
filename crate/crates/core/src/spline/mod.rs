//! Natural cubic spline machinery.
//!
//! A [`SplineFunction`] is parameterized by its values at the knots (the
//! Reinsch form): evaluation is the natural cubic interpolant of those values
//! and the roughness `∫ f''²` is the quadratic form `g' P g` with
//! `P = Q R⁻¹ Q'`. Internally the penalized least-squares solves run in an
//! equivalent local basis (see [`bspline`]) so that every system is banded.

mod bspline;
mod wls;

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{FsvdError, Result};
use crate::linalg::{solve_tridiagonal_sym, BandedSym};

pub(crate) use bspline::DesignRow;
use bspline::NaturalCubicBasis;
pub use wls::{solve_penalized_wls, WlsRow};
pub(crate) use wls::{solve_coefficients, Design};

/// Default cap on the number of knots used for decomposition fits.
pub const MAX_KNOTS: usize = 200;

#[derive(Debug)]
pub struct SplineBasis {
    knots: Vec<f64>,
    gaps: Vec<f64>,
    natural: NaturalCubicBasis,
    penalty_c: BandedSym,
    gram_c: BandedSym,
    colloc: Vec<DesignRow>,
    penalty_g: OnceLock<DMatrix<f64>>,
    gram_g: OnceLock<DMatrix<f64>>,
}

impl PartialEq for SplineBasis {
    fn eq(&self, other: &Self) -> bool {
        self.knots == other.knots
    }
}

impl SplineBasis {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(FsvdError::TooFewKnots(knots.len()));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(FsvdError::NonIncreasingKnots(i + 1));
            }
        }
        if knots[0] < 0.0 || knots[knots.len() - 1] > 1.0 {
            return Err(FsvdError::InvalidConfig(
                "knots must lie inside [0,1]".into(),
            ));
        }
        let gaps = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let natural = NaturalCubicBasis::new(&knots);
        let penalty_c = natural.penalty_band();
        let gram_c = natural.gram_band();
        let colloc = natural.collocation();
        Ok(SplineBasis {
            knots,
            gaps,
            natural,
            penalty_c,
            gram_c,
            colloc,
            penalty_g: OnceLock::new(),
            gram_g: OnceLock::new(),
        })
    }

    /// Knots from observation times, thinned to at most `max_knots`.
    pub fn from_times(times: &[f64], max_knots: usize) -> Result<Self> {
        SplineBasis::new(select_knots(times, max_knots))
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Roughness matrix in knot-value coordinates: `Δ' W⁻¹ Δ` with Δ the
    /// divided second-difference operator and W the tridiagonal gap matrix.
    pub fn penalty(&self) -> &DMatrix<f64> {
        self.penalty_g.get_or_init(|| {
            let k = self.knots.len();
            let mut m = DMatrix::zeros(k, k);
            for col in 0..k {
                let mut e = vec![0.0; k];
                e[col] = 1.0;
                let delta = self.second_differences(&e);
                let gamma = self.solve_w(&delta);
                // column = Δ' γ
                for (j, &gj) in gamma.iter().enumerate() {
                    let i = j + 1;
                    m[(i - 1, col)] += gj / self.gaps[i - 1];
                    m[(i, col)] -= gj / self.gaps[i - 1] + gj / self.gaps[i];
                    m[(i + 1, col)] += gj / self.gaps[i];
                }
            }
            symmetrize(m)
        })
    }

    /// L2 Gram matrix of the cardinal (knot-value) basis.
    pub fn gram_l2(&self) -> &DMatrix<f64> {
        self.gram_g.get_or_init(|| {
            let k = self.knots.len();
            let e = rows_to_dense(&self.colloc, k);
            let einv = e
                .try_inverse()
                .expect("natural spline collocation matrix is nonsingular");
            let g = self.gram_c.to_dense();
            symmetrize(einv.transpose() * g * einv)
        })
    }

    /// `(Δ g)_j` for interior knots j = 1..K-2.
    fn second_differences(&self, g: &[f64]) -> Vec<f64> {
        let k = self.knots.len();
        (1..k - 1)
            .map(|i| (g[i + 1] - g[i]) / self.gaps[i] - (g[i] - g[i - 1]) / self.gaps[i - 1])
            .collect()
    }

    /// Solve the tridiagonal gap system W x = rhs.
    fn solve_w(&self, rhs: &[f64]) -> Vec<f64> {
        let k = self.knots.len();
        let diag: Vec<f64> = (1..k - 1)
            .map(|i| (self.gaps[i - 1] + self.gaps[i]) / 3.0)
            .collect();
        let off: Vec<f64> = (1..k - 2).map(|i| self.gaps[i] / 6.0).collect();
        solve_tridiagonal_sym(&diag, &off, rhs)
    }

    /// Second derivatives at all knots of the natural interpolant of `g`.
    fn curvature(&self, g: &[f64]) -> Vec<f64> {
        let k = self.knots.len();
        let inner = self.solve_w(&self.second_differences(g));
        let mut out = vec![0.0; k];
        out[1..k - 1].copy_from_slice(&inner);
        out
    }

    pub(crate) fn value_row(&self, t: f64) -> DesignRow {
        self.natural.value_row(t)
    }

    pub(crate) fn penalty_band(&self) -> &BandedSym {
        &self.penalty_c
    }

    /// `∫ f''²` for local-basis coefficients `c`. Summed interval by interval
    /// from knot curvatures, which stays accurate when knots nearly coincide
    /// (the banded quadratic form loses digits to 1/h³ entries there).
    pub(crate) fn roughness_coef(&self, c: &[f64]) -> f64 {
        self.natural.roughness(c)
    }

    pub(crate) fn gram_band(&self) -> &BandedSym {
        &self.gram_c
    }

    /// Knot values of the spline with local-basis coefficients `c`.
    pub(crate) fn coefficients_to_values(&self, c: &[f64]) -> Vec<f64> {
        self.colloc.iter().map(|r| r.dot(c)).collect()
    }
}

/// `Σ_s h_s (M_s² + M_s M_{s+1} + M_{s+1}²) / 3`: exact for f'' linear per gap.
pub(crate) fn interval_roughness(gaps: &[f64], m: &[f64]) -> f64 {
    gaps.iter()
        .zip(m.windows(2))
        .map(|(h, w)| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
        .sum()
}

fn rows_to_dense(rows: &[DesignRow], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), k);
    for (i, r) in rows.iter().enumerate() {
        for (p, &w) in r.w.iter().enumerate() {
            if r.start + p < k {
                m[(i, r.start + p)] = w;
            }
        }
    }
    m
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Sorted unique times, thinned by keeping every ⌈U / max_knots⌉-th one.
/// The last unique time always closes the knot vector so that no observation
/// falls beyond the outer knots.
pub fn select_knots(times: &[f64], max_knots: usize) -> Vec<f64> {
    let mut u: Vec<f64> = times.iter().copied().filter(|t| t.is_finite()).collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let max_knots = max_knots.max(3);
    if u.len() <= max_knots {
        return u;
    }
    let step = u.len().div_ceil(max_knots);
    let mut kept: Vec<f64> = u.iter().copied().step_by(step).collect();
    let last = *u.last().unwrap();
    if *kept.last().unwrap() != last {
        *kept.last_mut().unwrap() = last;
    }
    kept
}

/// A natural cubic spline stored by its knot values.
#[derive(Clone, Debug)]
pub struct SplineFunction {
    basis: Arc<SplineBasis>,
    values: Vec<f64>,
    curvature: Vec<f64>,
}

impl PartialEq for SplineFunction {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && *self.basis == *other.basis
    }
}

impl SplineFunction {
    pub fn from_values(basis: Arc<SplineBasis>, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(FsvdError::DimensionMismatch(format!(
                "{} knot values for {} knots",
                values.len(),
                basis.len()
            )));
        }
        let curvature = basis.curvature(&values);
        Ok(SplineFunction {
            basis,
            values,
            curvature,
        })
    }

    pub fn zero(basis: Arc<SplineBasis>) -> Self {
        let k = basis.len();
        SplineFunction {
            basis,
            values: vec![0.0; k],
            curvature: vec![0.0; k],
        }
    }

    pub(crate) fn from_coefficients(basis: Arc<SplineBasis>, c: &[f64]) -> Self {
        let values = basis.coefficients_to_values(c);
        SplineFunction::from_values(basis, values).expect("dimension matches by construction")
    }

    pub fn basis(&self) -> &Arc<SplineBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Natural cubic interpolant of the knot values; linear beyond the ends.
    pub fn evaluate(&self, t: f64) -> f64 {
        let x = self.basis.knots();
        let g = &self.values;
        let m = &self.curvature;
        let k = x.len();
        if t <= x[0] {
            let h = x[1] - x[0];
            let slope = (g[1] - g[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0;
            return g[0] + (t - x[0]) * slope;
        }
        if t >= x[k - 1] {
            let h = x[k - 1] - x[k - 2];
            let slope = (g[k - 1] - g[k - 2]) / h + h * (m[k - 2] + 2.0 * m[k - 1]) / 6.0;
            return g[k - 1] + (t - x[k - 1]) * slope;
        }
        let s = x.partition_point(|&v| v <= t).saturating_sub(1).min(k - 2);
        let h = x[s + 1] - x[s];
        let a = t - x[s];
        let b = x[s + 1] - t;
        (a * g[s + 1] + b * g[s]) / h
            - a * b / 6.0 * ((1.0 + a / h) * m[s + 1] + (1.0 + b / h) * m[s])
    }

    pub fn evaluate_many(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.evaluate(t)).collect()
    }

    pub fn l2_inner(&self, other: &SplineFunction) -> Result<f64> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && *self.basis != *other.basis {
            return Err(FsvdError::BasisMismatch);
        }
        let gram = self.basis.gram_l2();
        let k = self.values.len();
        let mut s = 0.0;
        for i in 0..k {
            let mut row = 0.0;
            for j in 0..k {
                row += gram[(i, j)] * other.values[j];
            }
            s += self.values[i] * row;
        }
        Ok(s)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).expect("same basis").max(0.0).sqrt()
    }

    /// `∫ f''(t)² dt` of the natural interpolant.
    pub fn roughness(&self) -> f64 {
        interval_roughness(&self.basis.gaps, &self.curvature)
    }

    pub fn scaled(&self, c: f64) -> SplineFunction {
        SplineFunction {
            basis: Arc::clone(&self.basis),
            values: self.values.iter().map(|v| v * c).collect(),
            curvature: self.curvature.iter().map(|v| v * c).collect(),
        }
    }

    /// `Σ w_k f_k` over functions sharing one basis.
    pub fn linear_combination(terms: &[(f64, &SplineFunction)]) -> Result<SplineFunction> {
        let first = terms
            .first()
            .ok_or_else(|| FsvdError::DimensionMismatch("empty linear combination".into()))?
            .1;
        let k = first.values.len();
        let mut values = vec![0.0; k];
        for (w, f) in terms {
            if !Arc::ptr_eq(&first.basis, &f.basis) && *first.basis != *f.basis {
                return Err(FsvdError::BasisMismatch);
            }
            for (v, x) in values.iter_mut().zip(&f.values) {
                *v += w * x;
            }
        }
        SplineFunction::from_values(Arc::clone(&first.basis), values)
    }
}
