//! Model-based clustering of trajectories in the component score space.
//!
//! Start from a full-covariance Gaussian mixture on the scores (itself seeded
//! by k-means++), then run EM on the raw observations under
//! `Y_i | Z_i = h ~ N(Φ_i μ_h, Φ_i Σ_h Φ_iᵀ + σ_h² I)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FunctionalDataset;
use crate::decomposition::FsvdModel;
use crate::error::{FsvdError, Result};

pub const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 100;
const NOISE_FLOOR: f64 = 1e-8;
const LOGLIK_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Absolute ridge added to each Σ_h; `None` uses `1e-8 · tr(Σ_h) / K`.
    pub ridge: Option<f64>,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 500,
            tol: 1e-8,
            ridge: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub h: usize,
    pub k: usize,
    pub pi: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma_mat: Vec<Vec<Vec<f64>>>,
    pub noise_var: Vec<f64>,
    pub responsibilities: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub loglik_trace: Vec<f64>,
    /// Labels of the score-space mixture used to start EM.
    pub init_labels: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ClusterModel {
    /// Largest drop between consecutive log-likelihood values (0 if none).
    pub fn max_loglik_decrease(&self) -> f64 {
        self.loglik_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = j;
        }
    }
    best
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn ridge_for(sigma: &DMatrix<f64>, cfg: &EmConfig, floor: f64) -> f64 {
    let k = sigma.nrows() as f64;
    cfg.ridge.unwrap_or(1e-8 * sigma.trace() / k).max(floor)
}

/// Log density of N(mean, cov) at x.
fn log_normal(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<f64> {
    let chol = cov.clone().cholesky()?;
    let d = x - mean;
    let sol = chol.solve(&d);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let p = x.len() as f64;
    Some(-0.5 * (p * (2.0 * std::f64::consts::PI).ln() + logdet + d.dot(&sol)))
}

fn kmeans_pp(x: &[Vec<f64>], h: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.len();
    let mut centers = vec![x[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < h {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(x[pick].clone());
        for (d, p) in d2.iter_mut().zip(x) {
            *d = d.min(sq_dist(p, centers.last().expect("nonempty")));
        }
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in x.iter().enumerate() {
            let mut best = 0;
            for c in 1..h {
                if sq_dist(p, &centers[c]) < sq_dist(p, &centers[best]) {
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = x[0].len();
        let mut sums = vec![vec![0.0; dim]; h];
        let mut counts = vec![0usize; h];
        for (p, &l) in x.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..h {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Empty cluster: move it to the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&x[a], &centers[labels[a]]).total_cmp(&sq_dist(&x[b], &centers[labels[b]]))
                    })
                    .expect("n > 0");
                centers[c] = x[far].clone();
            }
        }
    }
    labels
}

struct Gmm {
    pi: Vec<f64>,
    mu: Vec<DVector<f64>>,
    sigma: Vec<DMatrix<f64>>,
}

fn gmm_m_step(x: &[DVector<f64>], resp: &[Vec<f64>], cfg: &EmConfig, floor: f64) -> Gmm {
    let (n, h, k) = (x.len(), resp[0].len(), x[0].len());
    let mut g = Gmm {
        pi: vec![0.0; h],
        mu: vec![DVector::zeros(k); h],
        sigma: vec![DMatrix::zeros(k, k); h],
    };
    for c in 0..h {
        let w: f64 = resp.iter().map(|r| r[c]).sum();
        g.pi[c] = w / n as f64;
        if w <= 0.0 {
            g.sigma[c] = DMatrix::identity(k, k) * floor.max(1e-12);
            continue;
        }
        let mut m = DVector::zeros(k);
        for (xi, r) in x.iter().zip(resp) {
            m += xi * r[c];
        }
        m /= w;
        let mut s = DMatrix::zeros(k, k);
        for (xi, r) in x.iter().zip(resp) {
            let d = xi - &m;
            s += &d * d.transpose() * r[c];
        }
        s /= w;
        let ridge = ridge_for(&s, cfg, floor);
        for j in 0..k {
            s[(j, j)] += ridge;
        }
        g.mu[c] = m;
        g.sigma[c] = s;
    }
    g
}

/// Responsibilities and total log-likelihood of the score-space mixture.
fn gmm_e_step(x: &[DVector<f64>], g: &Gmm) -> Result<(Vec<Vec<f64>>, f64)> {
    let h = g.pi.len();
    let mut resp = Vec::with_capacity(x.len());
    let mut ll = 0.0;
    for xi in x {
        let mut lp = vec![f64::NEG_INFINITY; h];
        for c in 0..h {
            if g.pi[c] > 0.0 {
                let l = log_normal(xi, &g.mu[c], &g.sigma[c])
                    .ok_or(FsvdError::SingularClusterCovariance(c))?;
                lp[c] = g.pi[c].ln() + l;
            }
        }
        let lse = logsumexp(&lp);
        ll += lse;
        resp.push(lp.iter().map(|v| (v - lse).exp()).collect());
    }
    Ok((resp, ll))
}

fn hard(labels: &[usize], h: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&l| (0..h).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn fit_score_gmm(x: &[DVector<f64>], h: usize, cfg: &EmConfig, floor: f64) -> Result<(Gmm, Vec<Vec<f64>>)> {
    let pts: Vec<Vec<f64>> = x.iter().map(|v| v.iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, Gmm)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let labels = kmeans_pp(&pts, h, &mut rng);
        let g = gmm_m_step(x, &hard(&labels, h), cfg, floor);
        let Ok((_, ll)) = gmm_e_step(x, &g) else { continue };
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, g));
        }
    }
    let (_, mut g) = best.ok_or(FsvdError::SingularClusterCovariance(0))?;
    let (mut resp, mut ll) = gmm_e_step(x, &g)?;
    for _ in 0..cfg.max_iter {
        g = gmm_m_step(x, &resp, cfg, floor);
        let (r, l) = gmm_e_step(x, &g)?;
        let done = (l - ll).abs() <= cfg.tol * ll.abs().max(1.0);
        resp = r;
        ll = l;
        if done {
            break;
        }
    }
    Ok((g, resp))
}

struct Subject {
    phi: DMatrix<f64>,
    y: DVector<f64>,
}

struct Moments {
    m: DVector<f64>,
    v: DMatrix<f64>,
}

/// E-step on raw observations: log-likelihood, responsibilities and the
/// conditional moments of ξ_i given (Y_i, Z_i = h).
fn raw_e_step(
    subj: &[Subject],
    pi: &[f64],
    mu: &[DVector<f64>],
    sigma: &[DMatrix<f64>],
    noise: &[f64],
) -> Option<(f64, Vec<Vec<f64>>, Vec<Vec<Moments>>)> {
    let h = pi.len();
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(subj.len());
    let mut moments = Vec::with_capacity(subj.len());
    for s in subj {
        let j = s.y.len();
        let mut lp = vec![f64::NEG_INFINITY; h];
        let mut mi = Vec::with_capacity(h);
        for c in 0..h {
            let ps = &s.phi * &sigma[c];
            let mut cov = &ps * s.phi.transpose();
            for d in 0..j {
                cov[(d, d)] += noise[c];
            }
            let chol = cov.cholesky()?;
            let resid = &s.y - &s.phi * &mu[c];
            let sol = chol.solve(&resid);
            let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let l = -0.5 * (j as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + resid.dot(&sol));
            if pi[c] > 0.0 {
                lp[c] = pi[c].ln() + l;
            }
            // G = Σ Φᵀ C⁻¹, so m = μ + G r and V = Σ − G Φ Σ.
            let g = chol.solve(&ps).transpose();
            let m = &mu[c] + &g * &resid;
            let v = &sigma[c] - &g * &ps;
            mi.push(Moments { m, v });
        }
        let lse = logsumexp(&lp);
        if !lse.is_finite() {
            return None;
        }
        ll += lse;
        resp.push(lp.iter().map(|v| (v - lse).exp()).collect());
        moments.push(mi);
    }
    Some((ll, resp, moments))
}

/// Cluster subjects using the first `k` components of `model`.
pub fn cluster(
    ds: &FunctionalDataset,
    model: &FsvdModel,
    h: usize,
    k: usize,
    cfg: &EmConfig,
) -> Result<ClusterModel> {
    if h == 0 {
        return Err(FsvdError::InvalidConfig("need at least one cluster".into()));
    }
    if k == 0 || model.rank() < k {
        return Err(FsvdError::NotEnoughComponents {
            have: model.rank(),
            need: k.max(1),
        });
    }
    let n = ds.n();
    if model.n() != n {
        return Err(FsvdError::DimensionMismatch(format!(
            "model has {} subjects, dataset {n}",
            model.n()
        )));
    }
    if n < h {
        return Err(FsvdError::InvalidConfig(format!("{n} subjects cannot fill {h} clusters")));
    }
    if ds.subjects().iter().any(|s| s.is_empty()) {
        return Err(FsvdError::InvalidDataset("every subject needs an observation".into()));
    }
    let comps = &model.components[..k];
    let scores: Vec<DVector<f64>> = model
        .scores(k)
        .into_iter()
        .map(DVector::from_vec)
        .collect();
    let spread = {
        let mean = scores.iter().fold(DVector::zeros(k), |a, x| a + x) / n as f64;
        scores.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / (n * k) as f64
    };
    let floor = 1e-12 * spread.max(1e-300);
    let (gmm, init_resp) = fit_score_gmm(&scores, h, cfg, floor)?;
    let init_labels: Vec<usize> = init_resp.iter().map(|r| argmax(r)).collect();

    let subj: Vec<Subject> = ds
        .subjects()
        .iter()
        .map(|s| Subject {
            phi: DMatrix::from_fn(s.len(), k, |j, c| comps[c].phi.evaluate(s.points[j].time)),
            y: DVector::from_iterator(s.len(), s.points.iter().map(|p| p.value)),
        })
        .collect();

    let mut pi = gmm.pi.clone();
    let mut mu = gmm.mu.clone();
    let mut sigma = gmm.sigma.clone();
    let mut noise = vec![0.0; h];
    for c in 0..h {
        let (mut num, mut den) = (0.0, 0.0);
        for ((s, x), r) in subj.iter().zip(&scores).zip(&init_resp) {
            num += r[c] * (&s.y - &s.phi * x).norm_squared();
            den += r[c] * s.y.len() as f64;
        }
        noise[c] = if den > 0.0 { (num / den).max(NOISE_FLOOR) } else { 1.0 };
    }

    let mut trace: Vec<f64> = Vec::new();
    let mut warnings = Vec::new();
    let mut resp;
    let mut iter = 0;
    loop {
        let (ll, r, moments) =
            raw_e_step(&subj, &pi, &mu, &sigma, &noise).ok_or(FsvdError::EmDivergence(iter))?;
        resp = r;
        if let Some(&prev) = trace.last() {
            if ll < prev - LOGLIK_SLACK * prev.abs().max(1.0) {
                warnings.push(format!("log-likelihood decreased at iteration {iter}"));
            }
        }
        let done = trace
            .last()
            .is_some_and(|&prev| (ll - prev).abs() <= cfg.tol * prev.abs().max(1.0));
        trace.push(ll);
        if done || iter >= cfg.max_iter {
            break;
        }
        iter += 1;
        for c in 0..h {
            let w: f64 = resp.iter().map(|r| r[c]).sum();
            pi[c] = w / n as f64;
            if w <= 0.0 {
                continue;
            }
            let mut m = DVector::zeros(k);
            for (mi, r) in moments.iter().zip(&resp) {
                m += &mi[c].m * r[c];
            }
            m /= w;
            let mut s = DMatrix::zeros(k, k);
            let (mut num, mut den) = (0.0, 0.0);
            for ((mi, r), sb) in moments.iter().zip(&resp).zip(&subj) {
                let d = &mi[c].m - &m;
                s += (&mi[c].v + &d * d.transpose()) * r[c];
                let e = (&sb.y - &sb.phi * &mi[c].m).norm_squared()
                    + (&sb.phi * &mi[c].v * sb.phi.transpose()).trace();
                num += r[c] * e;
                den += r[c] * sb.y.len() as f64;
            }
            s /= w;
            s = (&s + s.transpose()) * 0.5;
            let ridge = ridge_for(&s, cfg, floor);
            for j in 0..k {
                s[(j, j)] += ridge;
            }
            mu[c] = m;
            sigma[c] = s;
            noise[c] = (num / den).max(NOISE_FLOOR);
        }
    }
    if iter >= cfg.max_iter && trace.len() > 1 {
        warnings.push(format!("EM stopped at the iteration cap ({})", cfg.max_iter));
    }
    Ok(ClusterModel {
        h,
        k,
        pi,
        mu: mu.iter().map(|m| m.iter().copied().collect()).collect(),
        sigma_mat: sigma
            .iter()
            .map(|s| (0..k).map(|r| s.row(r).iter().copied().collect()).collect())
            .collect(),
        noise_var: noise,
        labels: resp.iter().map(|r| argmax(r)).collect(),
        responsibilities: resp,
        loglik_trace: trace,
        init_labels,
        warnings,
    })
}
