//! Smoothing-parameter cross-validation and rank selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FunctionalDataset;
use crate::decomposition::{alternate, inv_count, FitConfig, FsvdModel, Workspace};
use crate::error::{FsvdError, Result};
use crate::parallel::map_indexed;
use crate::spline::{Design, SplineBasis};

pub const N_FOLDS: usize = 5;
pub const AIC_VARIANCE_FLOOR: f64 = 1e-12;

/// How observations are split into folds within each subject.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FoldScheme {
    /// Position in time order modulo 5.
    #[default]
    Cyclic,
    /// Seeded shuffle per subject, then position modulo 5.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub grid: Vec<f64>,
    #[serde(with = "crate::io::nonfinite_vec")]
    pub errors: Vec<f64>,
    pub best_nu: f64,
}

/// 20 log-spaced values from 1e-8 to 1e1.
pub fn default_nu_grid() -> Vec<f64> {
    log_grid(1e-8, 1e1, 20)
}

pub fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..m)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (m - 1) as f64))
        .collect()
}

/// Fold index of every observation, subject by subject.
pub fn fold_assignment(lengths: &[usize], scheme: FoldScheme, seed: u64) -> Vec<Vec<usize>> {
    match scheme {
        FoldScheme::Cyclic => lengths
            .iter()
            .map(|&j| (0..j).map(|k| k % N_FOLDS).collect())
            .collect(),
        FoldScheme::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            lengths
                .iter()
                .map(|&j| {
                    let mut order: Vec<usize> = (0..j).collect();
                    order.shuffle(&mut rng);
                    let mut fold = vec![0; j];
                    for (pos, &k) in order.iter().enumerate() {
                        fold[k] = pos % N_FOLDS;
                    }
                    fold
                })
                .collect()
        }
    }
}

struct FoldData {
    held_in: Design,
    held_in_targets: Vec<Vec<f64>>,
    held_in_inv_j: Vec<f64>,
    held_out: Design,
    held_out_targets: Vec<Vec<f64>>,
}

fn split_fold(
    design: &Design,
    targets: &[Vec<f64>],
    folds: &[Vec<usize>],
    m: usize,
) -> FoldData {
    let n = design.rows.len();
    let mut fd = FoldData {
        held_in: Design { rows: Vec::with_capacity(n) },
        held_in_targets: Vec::with_capacity(n),
        held_in_inv_j: Vec::with_capacity(n),
        held_out: Design { rows: Vec::with_capacity(n) },
        held_out_targets: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (mut ri, mut yi, mut ro, mut yo) = (vec![], vec![], vec![], vec![]);
        for ((r, y), &f) in design.rows[i].iter().zip(&targets[i]).zip(&folds[i]) {
            if f == m {
                ro.push(*r);
                yo.push(*y);
            } else {
                ri.push(*r);
                yi.push(*y);
            }
        }
        fd.held_in_inv_j.push(inv_count(ri.len()));
        fd.held_in.rows.push(ri);
        fd.held_in_targets.push(yi);
        fd.held_out.rows.push(ro);
        fd.held_out_targets.push(yo);
    }
    fd
}

pub(crate) fn cv_on_workspace(
    ws: &Workspace,
    times: &[Vec<f64>],
    targets: &[Vec<f64>],
    a0: &[f64],
    grid: &[f64],
    cfg: &FitConfig,
) -> Result<CvResult> {
    if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(FsvdError::InvalidConfig(
            "nu grid must be nonempty and positive".into(),
        ));
    }
    let lengths: Vec<usize> = times.iter().map(Vec::len).collect();
    let folds = fold_assignment(&lengths, cfg.folds, cfg.seed);
    let splits: Vec<FoldData> = (0..N_FOLDS)
        .map(|m| split_fold(&ws.design, targets, &folds, m))
        .collect();
    let basis: &SplineBasis = &ws.basis;
    let scores = map_indexed(grid.len() * N_FOLDS, |idx| {
        let (g, m) = (idx / N_FOLDS, idx % N_FOLDS);
        let fd = &splits[m];
        let fit = alternate(
            basis,
            &fd.held_in,
            &fd.held_in_inv_j,
            &fd.held_in_targets,
            a0,
            grid[g],
            cfg.tau,
            cfg.max_iter,
        );
        match fit {
            Ok(fit) => {
                let mut s = 0.0;
                for i in 0..fd.held_out.rows.len() {
                    let pred = fit.predict(&fd.held_out, i);
                    let sse: f64 = pred
                        .iter()
                        .zip(&fd.held_out_targets[i])
                        .map(|(p, y)| (y - p) * (y - p))
                        .sum();
                    s += ws.inv_j[i] * sse;
                }
                if s.is_finite() {
                    s
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    });
    let errors: Vec<f64> = (0..grid.len())
        .map(|g| scores[g * N_FOLDS..(g + 1) * N_FOLDS].iter().sum::<f64>() / N_FOLDS as f64)
        .collect();
    let mut best = 0;
    for g in 1..grid.len() {
        let better = errors[g] < errors[best] || (errors[g] == errors[best] && grid[g] < grid[best]);
        if better {
            best = g;
        }
    }
    if !errors[best].is_finite() {
        return Err(FsvdError::DegenerateScale);
    }
    Ok(CvResult {
        grid: grid.to_vec(),
        errors,
        best_nu: grid[best],
    })
}

/// Five-fold CV error of the rank-one fit for every ν in `grid`.
pub fn cv_select_nu(
    ds: &FunctionalDataset,
    basis: &std::sync::Arc<SplineBasis>,
    a0: &[f64],
    grid: &[f64],
    cfg: &FitConfig,
) -> Result<CvResult> {
    cfg.validate()?;
    if a0.len() != ds.n() {
        return Err(FsvdError::DimensionMismatch(format!(
            "start vector has length {}, dataset has {} subjects",
            a0.len(),
            ds.n()
        )));
    }
    let ws = Workspace::new(std::sync::Arc::clone(basis), ds);
    let times: Vec<Vec<f64>> = ds.subjects().iter().map(|s| s.times()).collect();
    let targets: Vec<Vec<f64>> = ds.subjects().iter().map(|s| s.values()).collect();
    cv_on_workspace(&ws, &times, &targets, a0, grid, cfg)
}

/// Index r (1-based) maximizing ρ_r / ρ_{r+1} for r ≤ min(R_max, len−1).
pub fn select_rank_ratio(rhos: &[f64], r_max: usize) -> Result<usize> {
    if rhos.len() < 2 {
        return Err(FsvdError::TooFewComponents {
            needed: 2,
            got: rhos.len(),
        });
    }
    let top = r_max.min(rhos.len() - 1).max(1);
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for r in 1..=top {
        let ratio = rhos[r - 1] / rhos[r];
        if ratio > best_ratio {
            best_ratio = ratio;
            best = r;
        }
    }
    Ok(best)
}

/// `AIC(R) = Σ_i J_i log σ̂²_{i,R} + 2nR` for R = 1..=r_max.
pub fn aic_values(ds: &FunctionalDataset, model: &FsvdModel, r_max: usize) -> Result<Vec<f64>> {
    if model.rank() < r_max {
        return Err(FsvdError::NotEnoughComponents {
            have: model.rank(),
            need: r_max,
        });
    }
    if model.n() != ds.n() {
        return Err(FsvdError::DimensionMismatch(format!(
            "model has {} subjects, dataset {}",
            model.n(),
            ds.n()
        )));
    }
    let n = ds.n();
    let mut resid: Vec<Vec<f64>> = ds.subjects().iter().map(|s| s.values()).collect();
    let times: Vec<Vec<f64>> = ds.subjects().iter().map(|s| s.times()).collect();
    let mut out = Vec::with_capacity(r_max);
    for (r, comp) in model.components[..r_max].iter().enumerate() {
        let mut aic = 0.0;
        for i in 0..n {
            let mut sse = 0.0;
            for (y, t) in resid[i].iter_mut().zip(&times[i]) {
                *y -= comp.value(i, *t);
                sse += *y * *y;
            }
            let j = times[i].len();
            if j > 0 {
                let var = (sse / j as f64).max(AIC_VARIANCE_FLOOR);
                aic += j as f64 * var.ln();
            }
        }
        aic += 2.0 * n as f64 * (r + 1) as f64;
        out.push(aic);
    }
    Ok(out)
}

pub fn select_rank_aic(ds: &FunctionalDataset, model: &FsvdModel, r_max: usize) -> Result<usize> {
    if r_max == 0 {
        return Err(FsvdError::TooFewComponents { needed: 1, got: 0 });
    }
    let aic = aic_values(ds, model, r_max)?;
    let mut best = 0;
    for r in 1..aic.len() {
        if aic[r] < aic[best] {
            best = r;
        }
    }
    Ok(best + 1)
}
