//! Small dense/banded kernels used by the spline solver and the estimators.

use crate::error::{FsvdError, Result};

/// Symmetric matrix stored by its lower band.
///
/// Entry `(i, j)` with `i - bw <= j <= i` lives at `data[i * (bw + 1) + (i - j)]`.
#[derive(Clone, Debug)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Value at `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Add `v` to the symmetric pair `(i, j)`/`(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * (self.bw + 1)]).sum()
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            let k = i * (self.bw + 1);
            self.data[k] += v;
        }
    }

    /// `self += alpha * other` (same shape).
    pub fn axpy(&mut self, alpha: f64, other: &BandedSym) {
        debug_assert_eq!(self.n, other.n);
        debug_assert_eq!(self.bw, other.bw);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Quadratic form `x' A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            s += self.data[self.idx(i, i)] * x[i] * x[i];
            for j in lo..i {
                s += 2.0 * self.data[self.idx(i, j)] * x[i] * x[j];
            }
        }
        s
    }

    /// Bilinear form `x' A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            s += self.data[self.idx(i, i)] * x[i] * y[i];
            for j in lo..i {
                let a = self.data[self.idx(i, j)];
                s += a * (x[i] * y[j] + x[j] * y[i]);
            }
        }
        s
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// In-place Cholesky solve of `A x = b`; `A` is consumed into its factor.
    pub fn cholesky_solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let bw = self.bw;
        if b.len() != n {
            return Err(FsvdError::DimensionMismatch(format!(
                "rhs length {} vs system {}",
                b.len(),
                n
            )));
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = self.data[self.idx(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(FsvdError::SingularSystem);
                    }
                    let k = self.idx(i, i);
                    self.data[k] = sum.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = sum / self.data[self.idx(j, j)];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * y[k];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in (i + 1)..=hi {
                s -= self.data[self.idx(k, i)] * y[k];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        Ok(y)
    }
}

/// Solve a symmetric tridiagonal system (Thomas algorithm).
///
/// `diag` has length m, `off` has length m-1 (entries `(i, i+1)`).
pub fn solve_tridiagonal_sym(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    if m == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = if m > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < m {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flip `v` so that its entries sum positive; on an exact tie the first
/// nonzero entry is made positive. Returns true when a flip happened.
pub fn sign_fix(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    let flip = if s != 0.0 {
        s < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    flip
}

/// Modified Gram-Schmidt on the columns of a column-major `rows x cols` block.
pub fn gram_schmidt_columns(cols: &mut [Vec<f64>]) -> Result<()> {
    for k in 0..cols.len() {
        for l in 0..k {
            let (head, tail) = cols.split_at_mut(k);
            let proj = dot(&tail[0], &head[l]);
            for (x, q) in tail[0].iter_mut().zip(&head[l]) {
                *x -= proj * q;
            }
        }
        let nrm = norm2(&cols[k]);
        if nrm <= 1e-300 {
            return Err(FsvdError::ZeroNorm);
        }
        for x in cols[k].iter_mut() {
            *x /= nrm;
        }
    }
    Ok(())
}
