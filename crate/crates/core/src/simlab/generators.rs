//! Synthetic scenarios with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FunctionalDataset, SubjectSeries};
use crate::error::{FsvdError, Result};
use crate::linalg::gram_schmidt_columns;

pub const TRUE_RANK: usize = 3;
pub const DENSE_GRID: usize = 201;
pub const FACTOR_BASIS: usize = 7;
const NOISE_FRACTION: f64 = 0.05;
const CLUSTER_B_FRACTION: f64 = 0.2;
const MAX_LABEL_DRAWS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CompletionHetero,
    CompletionHomo,
    Clustering,
    Regression,
    Factor,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::CompletionHetero => "completion_hetero",
            ScenarioKind::CompletionHomo => "completion_homo",
            ScenarioKind::Clustering => "clustering",
            ScenarioKind::Regression => "regression",
            ScenarioKind::Factor => "factor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "completion_hetero" | "hetero" => ScenarioKind::CompletionHetero,
            "completion_homo" | "homo" => ScenarioKind::CompletionHomo,
            "clustering" => ScenarioKind::Clustering,
            "regression" => ScenarioKind::Regression,
            "factor" => ScenarioKind::Factor,
            _ => return None,
        })
    }
}

/// Everything a generator knows about the data it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub variant: ScenarioKind,
    pub n: usize,
    pub j_low: usize,
    pub j_high: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub rhos: Vec<f64>,
    /// φ_k (or F_k for the factor scenario) on `grid`.
    pub true_functions: Vec<Vec<f64>>,
    /// a_k as columns; all zero for the homogeneous scenario.
    pub true_vectors: Vec<Vec<f64>>,
    /// X_i = Σ_g x_coefs[i][g] ψ_g over the first `x_coefs[i].len()` Fourier functions.
    pub x_coefs: Vec<Vec<f64>>,
    pub subjectwise_x: Vec<Vec<f64>>,
    pub noise_vars: Vec<f64>,
    pub labels: Option<Vec<usize>>,
    pub beta_coeffs: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    /// Mixing vectors c_k of the factor functions.
    pub factor_coeffs: Option<Vec<Vec<f64>>>,
}

impl ScenarioTruth {
    /// n × K loading matrix stored row-major.
    pub fn loadings(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.true_vectors.iter().map(|a| a[i]).collect())
            .collect()
    }

    /// Evaluate X_i at arbitrary times.
    pub fn x_at(&self, i: usize, t: f64) -> f64 {
        self.x_coefs[i]
            .iter()
            .enumerate()
            .map(|(g, c)| c * fourier(g + 1, t))
            .sum()
    }
}

/// `g`-th non-constant Fourier function on [0,1], orthonormal in L2:
/// √2 sin 2πt, √2 cos 2πt, √2 sin 4πt, ...
pub fn fourier(g: usize, t: f64) -> f64 {
    let freq = g.div_ceil(2) as f64;
    let x = 2.0 * std::f64::consts::PI * freq * t;
    std::f64::consts::SQRT_2 * if g % 2 == 1 { x.sin() } else { x.cos() }
}

pub fn dense_grid() -> Vec<f64> {
    (0..DENSE_GRID)
        .map(|k| k as f64 / (DENSE_GRID - 1) as f64)
        .collect()
}

/// ρ_k = 2 exp((K − k + 1)/2), k = 1..K.
pub fn true_rhos(k: usize) -> Vec<f64> {
    (1..=k)
        .map(|kk| 2.0 * ((k - kk + 1) as f64 / 2.0).exp())
        .collect()
}

/// a_ik = sin(kπ(i + n/4)/(2n)), i 1-based, orthonormalized column by column.
pub fn sine_loadings(n: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut cols: Vec<Vec<f64>> = (1..=k)
        .map(|kk| {
            (1..=n)
                .map(|i| {
                    let x = kk as f64 * std::f64::consts::PI * (i as f64 + n as f64 / 4.0)
                        / (2.0 * n as f64);
                    x.sin()
                })
                .collect()
        })
        .collect();
    gram_schmidt_columns(&mut cols)?;
    Ok(cols)
}

/// β_k = (4 − k)^{−1.2} (−1)^k.
pub fn beta_coefficients() -> Vec<f64> {
    (1..=TRUE_RANK)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * ((4 - k) as f64).powf(-1.2)
        })
        .collect()
}

fn check_sizes(n: usize, j_low: usize, j_high: usize, min_n: usize) -> Result<()> {
    if n < min_n {
        return Err(FsvdError::InvalidConfig(format!("n must be >= {min_n}, got {n}")));
    }
    if j_low == 0 || j_low > j_high {
        return Err(FsvdError::InvalidConfig(format!(
            "need 1 <= J_low <= J_high, got {j_low}..{j_high}"
        )));
    }
    Ok(())
}

fn subject_id(i: usize) -> String {
    format!("s{:04}", i + 1)
}

/// Sample J_i, T_ij and Y_ij = X_i(T_ij) + ε_ij for every subject.
fn sample_observations(
    rng: &mut ChaCha8Rng,
    truth: &ScenarioTruth,
) -> Result<FunctionalDataset> {
    let mut subjects = Vec::with_capacity(truth.n);
    for i in 0..truth.n {
        let j = rng.random_range(truth.j_low..=truth.j_high);
        let sd = truth.noise_vars[i].sqrt();
        let mut times: Vec<f64> = (0..j).map(|_| rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                let e: f64 = rng.sample(StandardNormal);
                truth.x_at(i, t) + sd * e
            })
            .collect();
        subjects.push(SubjectSeries::from_pairs(subject_id(i), &times, &values));
    }
    FunctionalDataset::new(subjects)
}

fn fill_dense(truth: &mut ScenarioTruth) {
    let grid = truth.grid.clone();
    truth.subjectwise_x = (0..truth.n)
        .map(|i| grid.iter().map(|&t| truth.x_at(i, t)).collect())
        .collect();
}

fn fourier_functions(k: usize, grid: &[f64]) -> Vec<Vec<f64>> {
    (1..=k)
        .map(|g| grid.iter().map(|&t| fourier(g, t)).collect())
        .collect()
}

/// Completion scenario: X_i = Σ_k ρ_k (a_ik + b_ik) φ_k.
pub fn gen_completion(
    n: usize,
    j_low: usize,
    j_high: usize,
    homogeneous: bool,
    seed: u64,
) -> Result<(FunctionalDataset, ScenarioTruth)> {
    check_sizes(n, j_low, j_high, TRUE_RANK)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = TRUE_RANK;
    let rhos = true_rhos(k);
    let a = if homogeneous {
        vec![vec![0.0; n]; k]
    } else {
        sine_loadings(n, k)?
    };
    let mut x_coefs = vec![vec![0.0; k]; n];
    let mut noise_vars = vec![0.0; n];
    for i in 0..n {
        let mut energy = 0.0;
        for kk in 0..k {
            let sd = if homogeneous {
                (1.0 / n as f64).sqrt()
            } else {
                a[kk][i].abs()
            };
            let e: f64 = rng.sample(StandardNormal);
            x_coefs[i][kk] = rhos[kk] * (a[kk][i] + sd * e);
            energy += rhos[kk] * rhos[kk] * (a[kk][i] * a[kk][i] + sd * sd);
        }
        noise_vars[i] = NOISE_FRACTION * energy;
    }
    let grid = dense_grid();
    let mut truth = ScenarioTruth {
        variant: if homogeneous {
            ScenarioKind::CompletionHomo
        } else {
            ScenarioKind::CompletionHetero
        },
        n,
        j_low,
        j_high,
        seed,
        true_functions: fourier_functions(k, &grid),
        grid,
        rhos,
        true_vectors: a,
        x_coefs,
        subjectwise_x: Vec::new(),
        noise_vars,
        labels: None,
        beta_coeffs: None,
        beta_grid: None,
        factor_coeffs: None,
    };
    fill_dense(&mut truth);
    let ds = sample_observations(&mut rng, &truth)?;
    Ok((ds, truth))
}

/// Gram-Schmidt that zeroes columns lying in the span of earlier ones, which
/// happens whenever there are fewer clusters than components.
fn orthonormalize_profiles(cols: &mut [Vec<f64>]) {
    for k in 0..cols.len() {
        let before = crate::linalg::norm2(&cols[k]);
        let (head, tail) = cols.split_at_mut(k);
        for q in head.iter() {
            let proj = crate::linalg::dot(&tail[0], q);
            tail[0].iter_mut().zip(q).for_each(|(x, v)| *x -= proj * v);
        }
        let after = crate::linalg::norm2(&tail[0]);
        if after <= 1e-10 * before.max(1e-300) {
            tail[0].iter_mut().for_each(|x| *x = 0.0);
        } else {
            tail[0].iter_mut().for_each(|x| *x /= after);
        }
    }
}

/// Clustering scenario: subjects in cluster h share the loading profile a_h.
pub fn gen_clustering(
    n: usize,
    j_low: usize,
    j_high: usize,
    h: usize,
    seed: u64,
) -> Result<(FunctionalDataset, ScenarioTruth)> {
    check_sizes(n, j_low, j_high, h.max(TRUE_RANK))?;
    if h == 0 {
        return Err(FsvdError::InvalidConfig("need at least one cluster".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = TRUE_RANK;
    let rhos = true_rhos(k);
    let mut labels = Vec::new();
    let mut ok = false;
    for _ in 0..MAX_LABEL_DRAWS {
        labels = (0..n).map(|_| rng.random_range(0..h)).collect::<Vec<usize>>();
        if (0..h).all(|c| labels.contains(&c)) {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(FsvdError::EmptyCluster);
    }
    let profiles: Vec<Vec<f64>> = (0..h)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|kk| labels.iter().map(|&z| profiles[z][kk]).collect())
        .collect();
    orthonormalize_profiles(&mut a);
    let b_sd: Vec<f64> = a
        .iter()
        .map(|col| (CLUSTER_B_FRACTION * col.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt())
        .collect();
    let mut x_coefs = vec![vec![0.0; k]; n];
    let mut total = 0.0;
    for i in 0..n {
        for kk in 0..k {
            let e: f64 = rng.sample(StandardNormal);
            x_coefs[i][kk] = rhos[kk] * (a[kk][i] + b_sd[kk] * e);
            total += rhos[kk] * rhos[kk] * (a[kk][i] * a[kk][i] + b_sd[kk] * b_sd[kk]);
        }
    }
    let noise = NOISE_FRACTION * total / n as f64;
    let grid = dense_grid();
    let mut truth = ScenarioTruth {
        variant: ScenarioKind::Clustering,
        n,
        j_low,
        j_high,
        seed,
        true_functions: fourier_functions(k, &grid),
        grid,
        rhos,
        true_vectors: a,
        x_coefs,
        subjectwise_x: Vec::new(),
        noise_vars: vec![noise; n],
        labels: Some(labels),
        beta_coeffs: None,
        beta_grid: None,
        factor_coeffs: None,
    };
    fill_dense(&mut truth);
    let ds = sample_observations(&mut rng, &truth)?;
    Ok((ds, truth))
}

/// Regression scenario: heterogeneous predictors and Z_i = ⟨β, X_i⟩ + ϑ_i.
///
/// The response noise variance is `sqrt(mean ⟨X_i, β⟩²) * 5%`, a standard
/// deviation-like quantity used as a variance exactly as specified.
pub fn gen_regression(
    n: usize,
    j_low: usize,
    j_high: usize,
    noiseless_response: bool,
    seed: u64,
) -> Result<(FunctionalDataset, Vec<f64>, ScenarioTruth)> {
    let (ds, mut truth) = gen_completion(n, j_low, j_high, false, seed)?;
    // Separate stream so the predictors match gen_completion for the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_2e6e_55a0_0001);
    let beta = beta_coefficients();
    let signal: Vec<f64> = truth
        .x_coefs
        .iter()
        .map(|c| c.iter().zip(&beta).map(|(x, b)| x * b).sum())
        .collect();
    let var = (signal.iter().map(|s| s * s).sum::<f64>() / n as f64).sqrt() * NOISE_FRACTION;
    let z: Vec<f64> = if noiseless_response {
        signal.clone()
    } else {
        let normal = Normal::new(0.0, var.sqrt())
            .map_err(|e| FsvdError::InvalidConfig(e.to_string()))?;
        signal.iter().map(|s| s + normal.sample(&mut rng)).collect()
    };
    truth.variant = ScenarioKind::Regression;
    truth.beta_grid = Some(
        truth
            .grid
            .iter()
            .map(|&t| beta.iter().enumerate().map(|(k, b)| b * fourier(k + 1, t)).sum())
            .collect(),
    );
    truth.beta_coeffs = Some(beta);
    Ok((ds, z, truth))
}

/// Factor scenario: Y_ij = Σ_k ρ_k a_ik F_k(T_ij) + ε_ij with F_k = Σ_g c_kg ψ_g.
pub fn gen_factor(
    n: usize,
    j_low: usize,
    j_high: usize,
    seed: u64,
) -> Result<(FunctionalDataset, ScenarioTruth)> {
    check_sizes(n, j_low, j_high, TRUE_RANK)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = TRUE_RANK;
    let rhos = true_rhos(k);
    let a = sine_loadings(n, k)?;
    let mut c: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..FACTOR_BASIS).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    gram_schmidt_columns(&mut c)?;
    let mut x_coefs = vec![vec![0.0; FACTOR_BASIS]; n];
    let mut noise_vars = vec![0.0; n];
    for i in 0..n {
        for kk in 0..k {
            for g in 0..FACTOR_BASIS {
                x_coefs[i][g] += rhos[kk] * a[kk][i] * c[kk][g];
            }
            noise_vars[i] += NOISE_FRACTION * rhos[kk] * rhos[kk] * a[kk][i] * a[kk][i];
        }
    }
    let grid = dense_grid();
    let true_functions = c
        .iter()
        .map(|ck| {
            grid.iter()
                .map(|&t| ck.iter().enumerate().map(|(g, v)| v * fourier(g + 1, t)).sum())
                .collect()
        })
        .collect();
    let mut truth = ScenarioTruth {
        variant: ScenarioKind::Factor,
        n,
        j_low,
        j_high,
        seed,
        grid,
        rhos,
        true_functions,
        true_vectors: a,
        x_coefs,
        subjectwise_x: Vec::new(),
        noise_vars,
        labels: None,
        beta_coeffs: None,
        beta_grid: None,
        factor_coeffs: Some(c),
    };
    fill_dense(&mut truth);
    let ds = sample_observations(&mut rng, &truth)?;
    Ok((ds, truth))
}
