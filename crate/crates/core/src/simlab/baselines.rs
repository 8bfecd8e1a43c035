//! Reference methods the decomposition is compared against.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::data::{FunctionalDataset, SubjectSeries};
use crate::error::{FsvdError, Result};
use crate::selection::default_nu_grid;
use crate::spline::{solve_penalized_wls, SplineBasis, SplineFunction, WlsRow, MAX_KNOTS};

/// Half-width of the averaging window used to put raw data on a grid.
pub const GRID_WINDOW: f64 = 0.2;

/// One subject's smoothing-spline reconstruction.
#[derive(Clone, Debug)]
pub enum SubjectCurve {
    Spline { fit: SplineFunction, nu: f64 },
    /// Fewer than three distinct times: linear interpolation (or a constant).
    Linear { times: Vec<f64>, values: Vec<f64> },
}

impl SubjectCurve {
    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            SubjectCurve::Spline { fit, .. } => fit.evaluate(t),
            SubjectCurve::Linear { times, values } => {
                if times.len() == 1 {
                    return values[0];
                }
                let s = (values[1] - values[0]) / (times[1] - times[0]);
                values[0] + s * (t - times[0])
            }
        }
    }
}

fn fit_points(basis: &Arc<SplineBasis>, ts: &[f64], ys: &[f64], nu: f64) -> Result<SplineFunction> {
    let row = [WlsRow {
        subject_weight: 1.0,
        times: ts,
        targets: ys,
        inv_j: 1.0 / ts.len() as f64,
    }];
    solve_penalized_wls(basis, &row, nu)
}

/// Natural cubic smoothing spline through one subject, with ν chosen by
/// leave-one-out CV over `grid` (ties to the smaller ν).
pub fn smooth_subject(s: &SubjectSeries, grid: &[f64]) -> Result<SubjectCurve> {
    let ts = s.times();
    let ys = s.values();
    if ts.is_empty() {
        return Err(FsvdError::InvalidDataset(format!("subject {} is empty", s.id)));
    }
    if ts.len() < 3 {
        return Ok(SubjectCurve::Linear { times: ts, values: ys });
    }
    let basis = Arc::new(SplineBasis::from_times(&ts, MAX_KNOTS)?);
    let mut best: Option<(f64, f64)> = None;
    for &nu in grid {
        let mut err = 0.0;
        for j in 0..ts.len() {
            let t_in: Vec<f64> = ts.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect();
            let y_in: Vec<f64> = ys.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect();
            err += match fit_points(&basis, &t_in, &y_in, nu) {
                Ok(f) => (ys[j] - f.evaluate(ts[j])).powi(2),
                Err(_) => f64::INFINITY,
            };
        }
        if err.is_finite() && best.is_none_or(|(e, _)| err < e) {
            best = Some((err, nu));
        }
    }
    let (_, nu) = best.ok_or(FsvdError::SingularSystem)?;
    Ok(SubjectCurve::Spline {
        fit: fit_points(&basis, &ts, &ys, nu)?,
        nu,
    })
}

/// Per-subject smoothing splines evaluated on `grid`, one row per subject.
pub fn smoothing_spline_baseline(ds: &FunctionalDataset, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let nus = default_nu_grid();
    ds.subjects()
        .iter()
        .map(|s| {
            let c = smooth_subject(s, &nus)?;
            Ok(grid.iter().map(|&t| c.evaluate(t)).collect())
        })
        .collect()
}

/// Regularize every subject onto `m` equispaced points: average the
/// observations within `GRID_WINDOW` of each point, otherwise take the
/// nearest observation.
pub fn regularize_to_grid(ds: &FunctionalDataset, m: usize) -> Vec<Vec<f64>> {
    let grid: Vec<f64> = if m == 1 {
        vec![0.5]
    } else {
        (0..m).map(|g| g as f64 / (m - 1) as f64).collect()
    };
    ds.subjects()
        .iter()
        .map(|s| {
            grid.iter()
                .map(|&t| {
                    let (mut sum, mut cnt) = (0.0, 0usize);
                    for p in &s.points {
                        if (p.time - t).abs() < GRID_WINDOW {
                            sum += p.value;
                            cnt += 1;
                        }
                    }
                    if cnt > 0 {
                        sum / cnt as f64
                    } else {
                        s.points
                            .iter()
                            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
                            .map_or(0.0, |p| p.value)
                    }
                })
                .collect()
        })
        .collect()
}

/// Leading `k` left singular vectors of the data regularized to a grid of
/// `round(mean J)` points; n × k, row-major.
pub fn raw_svd_loadings(ds: &FunctionalDataset, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = ds.n();
    let m = ((ds.total_points() as f64 / n as f64).round() as usize).max(1);
    if k > n.min(m) {
        return Err(FsvdError::NotEnoughComponents { have: n.min(m), need: k });
    }
    let rows = regularize_to_grid(ds, m);
    let y = DMatrix::from_fn(n, m, |i, g| rows[i][g]);
    let svd = y.svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok((0..n)
        .map(|i| order[..k].iter().map(|&c| u[(i, c)]).collect())
        .collect())
}
