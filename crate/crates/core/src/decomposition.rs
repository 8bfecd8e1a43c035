//! The FSVD engine: rank-one alternating minimization, initialization and
//! deflation.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::data::{FunctionalDataset, MIN_POINTS_FOR_SPLINE};
use crate::error::{FsvdError, Result};
use crate::linalg::{dot, norm2, sign_fix};
use crate::selection::{self, CvResult, FoldScheme};
use crate::spline::{solve_coefficients, Design, SplineBasis, SplineFunction, MAX_KNOTS};

pub const DEFAULT_TAU: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const MAX_RANK: usize = 10;

const INIT_BINS: usize = 50;
const INIT_IMPUTE_ITERS: usize = 25;
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum NuChoice {
    Fixed(f64),
    /// Per-component cross-validation over the given grid.
    Cv(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankChoice {
    Fixed(usize),
    AutoRatio,
    AutoAic,
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub tau: f64,
    pub max_iter: usize,
    pub nu: NuChoice,
    pub rank: RankChoice,
    /// Upper bound on components fitted for automatic rank; defaults to min(n, 10).
    pub r_max: Option<usize>,
    pub folds: FoldScheme,
    pub max_knots: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tau: DEFAULT_TAU,
            max_iter: DEFAULT_MAX_ITER,
            nu: NuChoice::Cv(selection::default_nu_grid()),
            rank: RankChoice::AutoRatio,
            r_max: None,
            folds: FoldScheme::Cyclic,
            max_knots: MAX_KNOTS,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_rank(mut self, r: usize) -> Self {
        self.rank = RankChoice::Fixed(r);
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = NuChoice::Fixed(nu);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(FsvdError::InvalidConfig(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.max_iter == 0 {
            return Err(FsvdError::InvalidConfig("max_iter must be >= 1".into()));
        }
        match &self.nu {
            NuChoice::Fixed(v) if !v.is_finite() || *v < 0.0 => {
                return Err(FsvdError::InvalidConfig(format!("nu must be >= 0, got {v}")))
            }
            NuChoice::Cv(g) if g.is_empty() || g.iter().any(|v| !(*v > 0.0) || !v.is_finite()) => {
                return Err(FsvdError::InvalidConfig(
                    "nu grid must be nonempty and positive".into(),
                ))
            }
            _ => {}
        }
        if let RankChoice::Fixed(0) = self.rank {
            return Err(FsvdError::InvalidConfig("rank must be >= 1".into()));
        }
        if self.max_knots < 3 {
            return Err(FsvdError::InvalidConfig("max_knots must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FsvdComponent {
    pub rho: f64,
    pub a: Vec<f64>,
    pub phi: SplineFunction,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective after every half-step (ρφ-update then a-update).
    pub objective_trace: Vec<f64>,
}

impl FsvdComponent {
    /// Contribution `ρ a_i φ(t)` of this component.
    pub fn value(&self, i: usize, t: f64) -> f64 {
        self.rho * self.a[i] * self.phi.evaluate(t)
    }

    /// Largest increase between consecutive objective values.
    pub fn max_objective_increase(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct FsvdModel {
    pub basis: Arc<SplineBasis>,
    pub components: Vec<FsvdComponent>,
    pub nus: Vec<f64>,
    pub subject_ids: Vec<String>,
    pub tau: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub cv: Vec<Option<CvResult>>,
    pub warnings: Vec<String>,
}

impl FsvdModel {
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.rho).collect()
    }

    /// Scores ξ_ik = ρ_k a_ik for the first `k` components, one row per subject.
    pub fn scores(&self, k: usize) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.components[..k].iter().map(|c| c.rho * c.a[i]).collect())
            .collect()
    }

    pub fn truncate(&mut self, r: usize) {
        self.components.truncate(r);
        self.nus.truncate(r);
        self.cv.truncate(r);
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == id)
    }

    /// Largest |⟨φ_r, φ_s⟩| over distinct component pairs.
    pub fn max_cross_inner(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..self.components.len() {
            for s in r + 1..self.components.len() {
                let v = self.components[r]
                    .phi
                    .l2_inner(&self.components[s].phi)
                    .unwrap_or(f64::NAN);
                m = m.max(v.abs());
            }
        }
        m
    }
}

/// Per-dataset quantities reused across every fit on that dataset.
pub(crate) struct Workspace {
    pub basis: Arc<SplineBasis>,
    pub design: Design,
    pub inv_j: Vec<f64>,
}

impl Workspace {
    pub fn new(basis: Arc<SplineBasis>, ds: &FunctionalDataset) -> Self {
        let design = Design::new(&basis, ds);
        let inv_j = ds.subjects().iter().map(|s| inv_count(s.len())).collect();
        Workspace {
            basis,
            design,
            inv_j,
        }
    }
}

pub(crate) fn inv_count(j: usize) -> f64 {
    if j == 0 {
        0.0
    } else {
        1.0 / j as f64
    }
}

/// Raw output of the alternation, with ρφ in the solver basis.
pub(crate) struct RankOneFit {
    pub coef: Vec<f64>,
    pub a: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl RankOneFit {
    /// `a_i · ρφ(T_ij)` at arbitrary rows of the design.
    pub fn predict(&self, design: &Design, i: usize) -> Vec<f64> {
        let a = self.a[i];
        design.rows[i].iter().map(|r| a * r.dot(&self.coef)).collect()
    }
}

fn objective_coef(
    basis: &SplineBasis,
    design: &Design,
    inv_j: &[f64],
    targets: &[Vec<f64>],
    a: &[f64],
    coef: &[f64],
    nu: f64,
) -> f64 {
    let mut s = 0.0;
    for (i, rows) in design.rows.iter().enumerate() {
        let mut si = 0.0;
        for (r, y) in rows.iter().zip(&targets[i]) {
            let e = y - a[i] * r.dot(coef);
            si += e * e;
        }
        s += inv_j[i] * si;
    }
    s + nu * dot(a, a) * basis.roughness_coef(coef)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn alternate(
    basis: &SplineBasis,
    design: &Design,
    inv_j: &[f64],
    targets: &[Vec<f64>],
    a0: &[f64],
    nu: f64,
    tau: f64,
    max_iter: usize,
) -> Result<RankOneFit> {
    let n = design.rows.len();
    if a0.len() != n {
        return Err(FsvdError::DimensionMismatch(format!(
            "start vector has length {}, dataset has {n} subjects",
            a0.len()
        )));
    }
    let mut a = a0.to_vec();
    let na = norm2(&a);
    if !(na > 0.0) {
        return Err(FsvdError::ZeroNorm);
    }
    a.iter_mut().for_each(|x| *x /= na);

    let gram = basis.gram_band();
    let mut prev: Option<Vec<f64>> = None;
    let mut trace = Vec::with_capacity(2 * max_iter);
    let mut converged = false;
    let mut iterations = 0;
    let mut coef = vec![0.0; basis.len()];

    while iterations < max_iter {
        iterations += 1;
        coef = solve_coefficients(basis, design, &a, inv_j, targets, nu)?;
        trace.push(objective_coef(basis, design, inv_j, targets, &a, &coef, nu));

        let rel = prev.as_ref().map(|p| {
            let diff: Vec<f64> = coef.iter().zip(p).map(|(x, y)| x - y).collect();
            let num = gram.quad_form(&diff).max(0.0).sqrt();
            let den = gram.quad_form(&coef).max(0.0).sqrt();
            if den > 0.0 {
                num / den
            } else {
                f64::INFINITY
            }
        });

        // a-update: exact minimizer for fixed ρφ, then rescale to unit length
        // moving the norm into ρφ (the objective is invariant to that move).
        let rough = basis.roughness_coef(&coef);
        let mut a_new = vec![0.0; n];
        for (i, rows) in design.rows.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for (r, y) in rows.iter().zip(&targets[i]) {
                let f = r.dot(&coef);
                num += y * f;
                den += f * f;
            }
            let den = inv_j[i] * den + nu * rough;
            a_new[i] = if den > 0.0 { inv_j[i] * num / den } else { 0.0 };
        }
        let scale = norm2(&a_new);
        if !(scale > 1e-300) {
            return Err(FsvdError::DegenerateScale);
        }
        a_new.iter_mut().for_each(|x| *x /= scale);
        let mut s = scale;
        if sign_fix(&mut a_new) {
            s = -s;
        }
        coef.iter_mut().for_each(|x| *x *= s);
        a = a_new;
        trace.push(objective_coef(basis, design, inv_j, targets, &a, &coef, nu));
        debug_assert!(
            trace[trace.len() - 1]
                <= trace[trace.len() - 2] + MONOTONE_SLACK * trace[trace.len() - 2].max(1.0),
            "objective rose from {} to {}",
            trace[trace.len() - 2],
            trace[trace.len() - 1]
        );

        prev = Some(coef.clone());
        if rel.is_some_and(|r| r <= tau) {
            converged = true;
            break;
        }
    }
    Ok(RankOneFit {
        coef,
        a,
        iterations,
        converged,
        trace,
    })
}

fn component_from_fit(basis: &Arc<SplineBasis>, fit: RankOneFit) -> Result<FsvdComponent> {
    let rho = basis.gram_band().quad_form(&fit.coef).max(0.0).sqrt();
    if !(rho >= 1e-12) {
        return Err(FsvdError::DegenerateScale);
    }
    let unit: Vec<f64> = fit.coef.iter().map(|c| c / rho).collect();
    Ok(FsvdComponent {
        rho,
        a: fit.a,
        phi: SplineFunction::from_coefficients(Arc::clone(basis), &unit),
        iterations_used: fit.iterations,
        converged: fit.converged,
        objective_trace: fit.trace,
    })
}

fn dataset_targets(ds: &FunctionalDataset) -> Vec<Vec<f64>> {
    ds.subjects().iter().map(|s| s.values()).collect()
}

/// `Σ_i (1/J_i) Σ_j (Y_ij − a_i f(T_ij))² + ν·roughness(f)`.
pub fn objective(ds: &FunctionalDataset, a: &[f64], f: &SplineFunction, nu: f64) -> Result<f64> {
    if a.len() != ds.n() {
        return Err(FsvdError::DimensionMismatch(format!(
            "vector length {} vs {} subjects",
            a.len(),
            ds.n()
        )));
    }
    let mut s = 0.0;
    for (s_i, &ai) in ds.subjects().iter().zip(a) {
        let mut si = 0.0;
        for p in &s_i.points {
            let e = p.value - ai * f.evaluate(p.time);
            si += e * e;
        }
        s += inv_count(s_i.len()) * si;
    }
    Ok(s + nu * f.roughness())
}

/// Algorithm-1 style alternating minimization for one component.
pub fn fit_rank_one(
    ds: &FunctionalDataset,
    basis: &Arc<SplineBasis>,
    a0: &[f64],
    nu: f64,
    cfg: &FitConfig,
) -> Result<FsvdComponent> {
    cfg.validate()?;
    let ws = Workspace::new(Arc::clone(basis), ds);
    let targets = dataset_targets(ds);
    let fit = alternate(basis, &ws.design, &ws.inv_j, &targets, a0, nu, cfg.tau, cfg.max_iter)?;
    component_from_fit(basis, fit)
}

/// Subtract `Σ ρ_r a_ir φ_r(T_ij)` from every observation.
pub fn residualize(ds: &FunctionalDataset, comps: &[FsvdComponent]) -> Result<FunctionalDataset> {
    for c in comps {
        if c.a.len() != ds.n() {
            return Err(FsvdError::DimensionMismatch(format!(
                "component vector length {} vs {} subjects",
                c.a.len(),
                ds.n()
            )));
        }
    }
    Ok(ds.map_values(|i, p| p.value - comps.iter().map(|c| c.value(i, p.time)).sum::<f64>()))
}

/// Starting vector from residual data: bin onto an equispaced grid, impute
/// the missing cells by iterated rank-one SVD, return the leading left
/// singular vector.
pub fn initialize_vector(ds: &FunctionalDataset, prior: &[FsvdComponent]) -> Result<Vec<f64>> {
    let resid = residualize(ds, prior)?;
    let times: Vec<Vec<f64>> = resid.subjects().iter().map(|s| s.times()).collect();
    let targets = dataset_targets(&resid);
    init_from_targets(&times, &targets, resid.time_union().len())
}

pub(crate) fn init_from_targets(
    times: &[Vec<f64>],
    targets: &[Vec<f64>],
    union_size: usize,
) -> Result<Vec<f64>> {
    let n = times.len();
    let q = INIT_BINS.min(union_size).max(1);
    let mut sum = vec![0.0; n * q];
    let mut cnt = vec![0usize; n * q];
    for i in 0..n {
        for (&t, &y) in times[i].iter().zip(&targets[i]) {
            let b = ((t * q as f64).floor() as isize).clamp(0, q as isize - 1) as usize;
            sum[i * q + b] += y;
            cnt[i * q + b] += 1;
        }
    }
    let cols: Vec<usize> = (0..q).filter(|&b| (0..n).any(|i| cnt[i * q + b] > 0)).collect();
    if cols.is_empty() {
        return Err(FsvdError::AllMissingColumn);
    }
    let m = cols.len();
    let mut y = DMatrix::<f64>::zeros(n, m);
    let mut observed = vec![false; n * m];
    for (c, &b) in cols.iter().enumerate() {
        let (mut cs, mut cc) = (0.0, 0usize);
        for i in 0..n {
            if cnt[i * q + b] > 0 {
                let v = sum[i * q + b] / cnt[i * q + b] as f64;
                y[(i, c)] = v;
                observed[i * m + c] = true;
                cs += v;
                cc += 1;
            }
        }
        let mean = cs / cc as f64;
        for i in 0..n {
            if !observed[i * m + c] {
                y[(i, c)] = mean;
            }
        }
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(FsvdError::AllZeroInput);
    }
    let any_missing = observed.iter().any(|o| !o);
    if any_missing {
        for _ in 0..INIT_IMPUTE_ITERS {
            let (u, s, v) = leading_triplet(&y)?;
            for i in 0..n {
                for c in 0..m {
                    if !observed[i * m + c] {
                        y[(i, c)] = s * u[i] * v[c];
                    }
                }
            }
        }
    }
    let (mut u, _, _) = leading_triplet(&y)?;
    sign_fix(&mut u);
    Ok(u)
}

fn leading_triplet(y: &DMatrix<f64>) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let svd = y.clone().svd(true, true);
    let (idx, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(FsvdError::AllZeroInput)?;
    if !(s > 0.0) {
        return Err(FsvdError::AllZeroInput);
    }
    let u = svd.u.as_ref().expect("requested").column(idx).iter().copied().collect();
    let v = svd.v_t.as_ref().expect("requested").row(idx).iter().copied().collect();
    Ok((u, s, v))
}

/// Knot vector for a dataset: union of times of subjects with enough points
/// for a spline, thinned to `max_knots`.
pub fn model_basis(ds: &FunctionalDataset, max_knots: usize) -> Result<SplineBasis> {
    let mut times: Vec<f64> = ds
        .subjects()
        .iter()
        .filter(|s| s.len() >= MIN_POINTS_FOR_SPLINE)
        .flat_map(|s| s.points.iter().map(|p| p.time))
        .collect();
    let mut uniq = times.clone();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    if uniq.len() < 3 {
        times = ds.time_union();
    }
    SplineBasis::from_times(&times, max_knots)
}

/// Sequential FSVD: initialize, tune ν, fit one component, deflate, repeat.
pub fn fsvd(ds: &FunctionalDataset, cfg: &FitConfig) -> Result<FsvdModel> {
    cfg.validate()?;
    let basis = Arc::new(model_basis(ds, cfg.max_knots)?);
    fsvd_with_basis(ds, basis, cfg)
}

pub fn fsvd_with_basis(
    ds: &FunctionalDataset,
    basis: Arc<SplineBasis>,
    cfg: &FitConfig,
) -> Result<FsvdModel> {
    cfg.validate()?;
    let n = ds.n();
    let r_max = cfg.r_max.unwrap_or(n.min(MAX_RANK)).max(1);
    let r_fit = match cfg.rank {
        RankChoice::Fixed(r) => r,
        _ => r_max,
    };
    let ws = Workspace::new(Arc::clone(&basis), ds);
    let times: Vec<Vec<f64>> = ds.subjects().iter().map(|s| s.times()).collect();
    let union = ds.time_union().len();
    let mut targets = dataset_targets(ds);

    let mut model = FsvdModel {
        basis: Arc::clone(&basis),
        components: Vec::new(),
        nus: Vec::new(),
        subject_ids: ds.subject_ids(),
        tau: cfg.tau,
        max_iter: cfg.max_iter,
        seed: cfg.seed,
        cv: Vec::new(),
        warnings: Vec::new(),
    };

    for r in 0..r_fit {
        let step = (|| -> Result<(FsvdComponent, f64, Option<CvResult>)> {
            let a0 = init_from_targets(&times, &targets, union)?;
            let (nu, cv) = match &cfg.nu {
                NuChoice::Fixed(v) => (*v, None),
                NuChoice::Cv(grid) => {
                    let cv = selection::cv_on_workspace(&ws, &times, &targets, &a0, grid, cfg)?;
                    (cv.best_nu, Some(cv))
                }
            };
            let fit = alternate(
                &basis,
                &ws.design,
                &ws.inv_j,
                &targets,
                &a0,
                nu,
                cfg.tau,
                cfg.max_iter,
            )?;
            Ok((component_from_fit(&basis, fit)?, nu, cv))
        })();
        let (comp, nu, cv) = match step {
            Ok(v) => v,
            Err(e) if r > 0 && !matches!(cfg.rank, RankChoice::Fixed(_)) => {
                model
                    .warnings
                    .push(format!("stopped after {r} components: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        if !comp.converged {
            model.warnings.push(format!(
                "component {} hit the iteration cap ({}) before converging",
                r + 1,
                cfg.max_iter
            ));
        }
        if let Some(prev) = model.components.last() {
            if comp.rho > prev.rho {
                model.warnings.push(format!(
                    "component {} has larger singular value than component {r}",
                    r + 1
                ));
            }
        }
        for (i, (ys, ts)) in targets.iter_mut().zip(&times).enumerate() {
            let a = comp.rho * comp.a[i];
            for (y, t) in ys.iter_mut().zip(ts) {
                *y -= a * comp.phi.evaluate(*t);
            }
        }
        model.components.push(comp);
        model.nus.push(nu);
        model.cv.push(cv);
    }

    match cfg.rank {
        RankChoice::Fixed(_) => {}
        RankChoice::AutoRatio => {
            if model.rank() >= 2 {
                let r = selection::select_rank_ratio(&model.rhos(), r_max)?;
                model.truncate(r);
            }
        }
        RankChoice::AutoAic => {
            let top = model.rank();
            let r = selection::select_rank_aic(ds, &model, top)?;
            model.truncate(r);
        }
    }
    Ok(model)
}
