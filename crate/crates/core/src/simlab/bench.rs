//! Monte Carlo replicate harness: generate, fit, score, aggregate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::baselines::{raw_svd_loadings, smoothing_spline_baseline};
use super::generators::*;
use super::metrics::*;
use crate::data::{format_f64, FunctionalDataset};
use crate::decomposition::{fsvd, FitConfig, RankChoice};
use crate::error::{FsvdError, Result};
use crate::parallel::map_indexed;
use crate::tasks::{cluster, complete_grid, factor_model, regress, EmConfig, DEFAULT_R_USE};

/// Points of the grid on which regression coefficient curves are reported.
pub const BETA_GRID: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fsvd,
    SmoothingSpline,
    RawSvd,
    FsvdGmm,
    FsvdEm,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Fsvd,
        Method::SmoothingSpline,
        Method::RawSvd,
        Method::FsvdGmm,
        Method::FsvdEm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Fsvd => "fsvd",
            Method::SmoothingSpline => "smoothing_spline",
            Method::RawSvd => "raw_svd",
            Method::FsvdGmm => "fsvd_gmm",
            Method::FsvdEm => "fsvd_em",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name() == s)
    }

    pub fn applies_to(&self, kind: ScenarioKind) -> bool {
        use ScenarioKind::*;
        matches!(
            (kind, self),
            (CompletionHetero | CompletionHomo, Method::Fsvd | Method::SmoothingSpline)
                | (Clustering, Method::FsvdGmm | Method::FsvdEm)
                | (Regression, Method::Fsvd)
                | (Factor, Method::Fsvd | Method::RawSvd)
        )
    }

    /// Metric names this method reports on `kind`, in report order.
    pub fn metrics(&self, kind: ScenarioKind) -> Vec<String> {
        use ScenarioKind::*;
        if !self.applies_to(kind) {
            return Vec::new();
        }
        match (kind, self) {
            (CompletionHetero, Method::Fsvd) => {
                let mut m: Vec<String> = (1..=TRUE_RANK).map(|k| format!("dist_phi_{k}")).collect();
                m.extend((1..=TRUE_RANK).map(|k| format!("dist_a_{k}")));
                m.push("nmse_x".into());
                m
            }
            (CompletionHomo, Method::Fsvd) => {
                let mut m: Vec<String> = (1..=TRUE_RANK).map(|k| format!("dist_phi_{k}")).collect();
                m.push("nmse_x".into());
                m
            }
            (_, Method::SmoothingSpline) => vec!["nmse_x".into()],
            (Clustering, _) => vec!["ari".into()],
            (Regression, _) => vec!["beta_ise".into()],
            (Factor, _) => vec!["nmse_a".into()],
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub j_low: usize,
    pub j_high: usize,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub fit: FitConfig,
    pub em: EmConfig,
    /// Run replicates one after another instead of on the thread pool.
    pub sequential: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            replicates: 100,
            methods: Method::ALL.to_vec(),
            seed: 0,
            fit: FitConfig::default().with_rank(TRUE_RANK),
            em: EmConfig::default(),
            sequential: false,
        }
    }
}

/// Everything measured on one replicate.
#[derive(Clone, Debug, Default)]
pub struct ReplicateOutcome {
    pub values: BTreeMap<(Method, String), f64>,
    pub failures: Vec<(Method, String)>,
    /// Estimated coefficient function on `BETA_GRID` points (regression only).
    pub beta_hat: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub scenario: String,
    pub n: usize,
    #[serde(rename = "J_low")]
    pub j_low: usize,
    #[serde(rename = "J_high")]
    pub j_high: usize,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub spec: ScenarioSpec,
    pub rows: Vec<BenchRow>,
    /// Per-replicate values (NaN where the method failed), keyed by (method, metric).
    pub samples: BTreeMap<(Method, String), Vec<f64>>,
    /// Pointwise mean of the estimated coefficient function, with the grid and truth.
    pub beta_curve: Option<BetaCurve>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaCurve {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    pub replicates: usize,
}

impl BenchReport {
    pub fn row(&self, method: Method, metric: &str) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.method == method.name() && r.metric == metric)
    }

    /// Finite per-replicate values of one metric.
    pub fn values(&self, method: Method, metric: &str) -> Vec<f64> {
        self.samples
            .get(&(method, metric.to_string()))
            .map(|v| v.iter().copied().filter(|x| x.is_finite()).collect())
            .unwrap_or_default()
    }
}

pub fn beta_grid() -> Vec<f64> {
    (0..BETA_GRID).map(|k| k as f64 / (BETA_GRID - 1) as f64).collect()
}

pub fn true_beta(t: f64) -> f64 {
    beta_coefficients()
        .iter()
        .enumerate()
        .map(|(k, b)| b * fourier(k + 1, t))
        .sum()
}

pub fn generate(
    spec: &ScenarioSpec,
    seed: u64,
) -> Result<(FunctionalDataset, Option<Vec<f64>>, ScenarioTruth)> {
    let (n, jl, jh) = (spec.n, spec.j_low, spec.j_high);
    Ok(match spec.kind {
        ScenarioKind::CompletionHetero => {
            let (d, t) = gen_completion(n, jl, jh, false, seed)?;
            (d, None, t)
        }
        ScenarioKind::CompletionHomo => {
            let (d, t) = gen_completion(n, jl, jh, true, seed)?;
            (d, None, t)
        }
        ScenarioKind::Clustering => {
            let (d, t) = gen_clustering(n, jl, jh, TRUE_RANK, seed)?;
            (d, None, t)
        }
        ScenarioKind::Regression => {
            let (d, z, t) = gen_regression(n, jl, jh, false, seed)?;
            (d, Some(z), t)
        }
        ScenarioKind::Factor => {
            let (d, t) = gen_factor(n, jl, jh, seed)?;
            (d, None, t)
        }
    })
}

fn record(
    out: &mut ReplicateOutcome,
    method: Method,
    kind: ScenarioKind,
    res: Result<Vec<(String, f64)>>,
) {
    match res {
        Ok(vals) => {
            for (m, v) in vals {
                out.values.insert((method, m), v);
            }
        }
        Err(e) => {
            for m in method.metrics(kind) {
                out.failures.push((method, format!("{m}: {e}")));
            }
        }
    }
}

/// Generate one dataset with `seed` and score every requested method on it.
pub fn run_replicate(spec: &ScenarioSpec, cfg: &BenchConfig, seed: u64) -> ReplicateOutcome {
    let mut out = ReplicateOutcome::default();
    let kind = spec.kind;
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .copied()
        .filter(|m| m.applies_to(kind))
        .collect();
    let (ds, z, truth) = match generate(spec, seed) {
        Ok(v) => v,
        Err(e) => {
            for m in &methods {
                record(&mut out, *m, kind, Err(FsvdError::InvalidConfig(e.to_string())));
            }
            return out;
        }
    };
    let needs_fit = methods
        .iter()
        .any(|m| matches!(m, Method::Fsvd | Method::FsvdGmm | Method::FsvdEm));
    let mut fit_cfg = cfg.fit.clone();
    fit_cfg.seed = seed;
    if matches!(fit_cfg.rank, RankChoice::Fixed(_)) {
        fit_cfg.rank = RankChoice::Fixed(TRUE_RANK);
    }
    let model = if needs_fit { Some(fsvd(&ds, &fit_cfg)) } else { None };
    let model_err = |e: &FsvdError| FsvdError::InvalidConfig(format!("fit failed: {e}"));

    for method in methods {
        let res: Result<Vec<(String, f64)>> = (|| match method {
            Method::Fsvd => {
                let model = model.as_ref().expect("fit requested").as_ref().map_err(model_err)?;
                if model.rank() < TRUE_RANK {
                    return Err(FsvdError::NotEnoughComponents {
                        have: model.rank(),
                        need: TRUE_RANK,
                    });
                }
                let mut v = Vec::new();
                match kind {
                    ScenarioKind::CompletionHetero | ScenarioKind::CompletionHomo => {
                        for (k, c) in model.components.iter().take(TRUE_RANK).enumerate() {
                            let g = c.phi.evaluate_many(&truth.grid);
                            v.push((format!("dist_phi_{}", k + 1), dist_functions(&g, &truth.true_functions[k])?));
                        }
                        if kind == ScenarioKind::CompletionHetero {
                            for (k, c) in model.components.iter().take(TRUE_RANK).enumerate() {
                                v.push((format!("dist_a_{}", k + 1), dist_vectors(&c.a, &truth.true_vectors[k])?));
                            }
                        }
                        let xhat = complete_grid(model, &truth.grid);
                        v.push(("nmse_x".into(), nmse_x(&truth.subjectwise_x, &xhat)?));
                    }
                    ScenarioKind::Regression => {
                        let z = z.as_ref().expect("regression response");
                        let reg = regress(model, z, DEFAULT_R_USE)?;
                        let grid = beta_grid();
                        let est: Vec<f64> = reg.beta_fn.evaluate_many(&grid);
                        let w = trapezoid_weights(grid.len());
                        let ise = est
                            .iter()
                            .zip(&grid)
                            .zip(&w)
                            .map(|((b, t), w)| w * (b - true_beta(*t)).powi(2))
                            .sum();
                        v.push(("beta_ise".into(), ise));
                        out.beta_hat = Some(est);
                    }
                    ScenarioKind::Factor => {
                        let fm = factor_model(model, TRUE_RANK, None)?;
                        v.push(("nmse_a".into(), nmse_loadings(&truth.loadings(), &fm.loadings)?));
                    }
                    ScenarioKind::Clustering => {}
                }
                Ok(v)
            }
            Method::SmoothingSpline => {
                let xhat = smoothing_spline_baseline(&ds, &truth.grid)?;
                Ok(vec![("nmse_x".into(), nmse_x(&truth.subjectwise_x, &xhat)?)])
            }
            Method::RawSvd => {
                let l = raw_svd_loadings(&ds, TRUE_RANK)?;
                Ok(vec![("nmse_a".into(), nmse_loadings(&truth.loadings(), &l)?)])
            }
            Method::FsvdGmm | Method::FsvdEm => {
                let model = model.as_ref().expect("fit requested").as_ref().map_err(model_err)?;
                let labels = truth.labels.as_ref().expect("clustering truth has labels");
                let mut em = cfg.em.clone();
                em.seed = seed;
                let cm = cluster(&ds, model, TRUE_RANK, TRUE_RANK.min(model.rank()), &em)?;
                let est = if method == Method::FsvdGmm { &cm.init_labels } else { &cm.labels };
                Ok(vec![("ari".into(), adjusted_rand_index(labels, est)?)])
            }
        })();
        record(&mut out, method, kind, res);
    }
    out
}

/// Run `cfg.replicates` replicates with sub-seeds `seed + r` and aggregate.
pub fn run_bench(spec: &ScenarioSpec, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.replicates == 0 {
        return Err(FsvdError::InvalidConfig("replicates must be at least 1".into()));
    }
    if spec.n < TRUE_RANK || spec.j_low == 0 || spec.j_low > spec.j_high {
        return Err(FsvdError::InvalidConfig(format!(
            "invalid scenario: n={}, J={}..{}",
            spec.n, spec.j_low, spec.j_high
        )));
    }
    cfg.fit.validate()?;
    let run = |r: usize| run_replicate(spec, cfg, cfg.seed.wrapping_add(r as u64));
    let outcomes = if cfg.sequential {
        crate::parallel::map_indexed_sequential(cfg.replicates, run)
    } else {
        map_indexed(cfg.replicates, run)
    };
    Ok(aggregate(spec, cfg, &outcomes))
}

pub fn aggregate(spec: &ScenarioSpec, cfg: &BenchConfig, outcomes: &[ReplicateOutcome]) -> BenchReport {
    let mut rows = Vec::new();
    let mut samples = BTreeMap::new();
    for method in cfg.methods.iter().filter(|m| m.applies_to(spec.kind)) {
        for metric in method.metrics(spec.kind) {
            let key = (*method, metric.clone());
            let vals: Vec<f64> = outcomes
                .iter()
                .map(|o| o.values.get(&key).copied().unwrap_or(f64::NAN))
                .collect();
            let ok: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
            let (mean, sd) = mean_sd(&ok);
            rows.push(BenchRow {
                scenario: spec.kind.name().to_string(),
                n: spec.n,
                j_low: spec.j_low,
                j_high: spec.j_high,
                method: method.name().to_string(),
                metric,
                mean,
                sd,
                failures: vals.len() - ok.len(),
            });
            samples.insert(key, vals);
        }
    }
    let curves: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.beta_hat.as_ref()).collect();
    let beta_curve = (!curves.is_empty()).then(|| {
        let grid = beta_grid();
        let mean = (0..grid.len())
            .map(|g| curves.iter().map(|c| c[g]).sum::<f64>() / curves.len() as f64)
            .collect();
        BetaCurve {
            truth: grid.iter().map(|&t| true_beta(t)).collect(),
            grid,
            mean,
            replicates: curves.len(),
        }
    });
    BenchReport {
        spec: *spec,
        rows,
        samples,
        beta_curve,
    }
}

pub fn write_report_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Tidy per-replicate values: `scenario,n,J_low,J_high,method,metric,replicate,value`.
pub fn write_samples_csv<W: Write>(reports: &[BenchReport], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scenario", "n", "J_low", "J_high", "method", "metric", "replicate", "value"])?;
    for rep in reports {
        let s = &rep.spec;
        for ((method, metric), vals) in &rep.samples {
            for (r, v) in vals.iter().enumerate() {
                wr.write_record([
                    s.kind.name(),
                    &s.n.to_string(),
                    &s.j_low.to_string(),
                    &s.j_high.to_string(),
                    method.name(),
                    metric,
                    &r.to_string(),
                    &format_f64(*v),
                ])?;
            }
        }
        if let Some(c) = &rep.beta_curve {
            for (series, vals) in [("beta_true", &c.truth), ("beta_mean", &c.mean)] {
                for (t, v) in c.grid.iter().zip(vals) {
                    wr.write_record([
                        s.kind.name(),
                        &s.n.to_string(),
                        &s.j_low.to_string(),
                        &s.j_high.to_string(),
                        "fsvd",
                        series,
                        &format_f64(*t),
                        &format_f64(*v),
                    ])?;
                }
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Fixed-width summary table.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<18} {:>4} {:>7} {:<17} {:<11} {:>10} {:>10} {:>5}",
        "scenario", "n", "J", "method", "metric", "mean", "sd", "fail"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<18} {:>4} {:>7} {:<17} {:<11} {:>10.4} {:>10.4} {:>5}",
            r.scenario,
            r.n,
            format!("{}-{}", r.j_low, r.j_high),
            r.method,
            r.metric,
            r.mean,
            r.sd,
            r.failures
        );
    }
    s
}
