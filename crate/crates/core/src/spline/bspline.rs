//! Local (banded) basis for the natural cubic spline space on a knot vector.
//!
//! Clamped cubic B-splines on K distinct knots span K+2 functions; imposing
//! zero second derivative at both ends leaves K. The two constraints are
//! eliminated by folding the outermost B-spline into its two neighbours, so
//! every natural basis function keeps local support and all Gram/penalty
//! matrices stay banded with half-bandwidth 3.

use crate::linalg::BandedSym;

pub(crate) const BAND: usize = 3;

/// Nonzero natural-basis weights of one evaluation functional.
///
/// Entry `w[k]` multiplies coefficient `start + k`; slots at or beyond the
/// basis dimension are always zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct DesignRow {
    pub start: usize,
    pub w: [f64; 4],
}

impl DesignRow {
    #[inline]
    pub fn dot(&self, c: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, &w) in self.w.iter().enumerate() {
            if let Some(x) = c.get(self.start + k) {
                s += w * x;
            }
        }
        s
    }

    /// `A += weight * r r'`.
    #[inline]
    pub fn accumulate_outer(&self, a: &mut BandedSym, weight: f64) {
        let n = a.dim();
        for p in 0..4 {
            let i = self.start + p;
            if i >= n || self.w[p] == 0.0 {
                continue;
            }
            let wp = weight * self.w[p];
            for q in 0..=p {
                let j = self.start + q;
                if self.w[q] != 0.0 {
                    a.add(i, j, wp * self.w[q]);
                }
            }
        }
    }

    /// `b += weight * r`.
    #[inline]
    pub fn accumulate(&self, b: &mut [f64], weight: f64) {
        for (k, &w) in self.w.iter().enumerate() {
            if let Some(x) = b.get_mut(self.start + k) {
                *x += weight * w;
            }
        }
    }

    fn axpy(&self, alpha: f64, other: &DesignRow) -> DesignRow {
        debug_assert_eq!(self.start, other.start);
        let mut w = self.w;
        for k in 0..4 {
            w[k] += alpha * other.w[k];
        }
        DesignRow { start: self.start, w }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct NaturalCubicBasis {
    knots: Vec<f64>,
    /// Clamped knot vector of length K + 6.
    ext: Vec<f64>,
    /// B_0 = left0 * N_0 + left1 * N_1 in the natural parameterization.
    left: [f64; 2],
    /// B_{K+1} = right0 * N_{K-2} + right1 * N_{K-1}.
    right: [f64; 2],
    /// Second-derivative rows at each knot.
    curvature_rows: Vec<DesignRow>,
    gaps: Vec<f64>,
}

impl NaturalCubicBasis {
    /// `knots` must be strictly increasing with length >= 3 (checked by caller).
    pub fn new(knots: &[f64]) -> Self {
        let k = knots.len();
        let mut ext = Vec::with_capacity(k + 6);
        ext.extend_from_slice(&[knots[0]; 3]);
        ext.extend_from_slice(knots);
        ext.extend_from_slice(&[knots[k - 1]; 3]);
        let mut basis = NaturalCubicBasis {
            knots: knots.to_vec(),
            ext,
            left: [0.0; 2],
            right: [0.0; 2],
            curvature_rows: Vec::new(),
            gaps: knots.windows(2).map(|w| w[1] - w[0]).collect(),
        };
        let d = basis.bspline_ders(0, knots[0]);
        // d[2][j] = B_j''(k0), j = 0..3; B_3''(k0) = 0.
        basis.left = [-d[2][1] / d[2][0], -d[2][2] / d[2][0]];
        let e = basis.bspline_ders(k - 2, knots[k - 1]);
        // e[2][j] = B_{K-2+j}''(k_{K-1}); index 3 is B_{K+1}.
        basis.right = [-e[2][1] / e[2][3], -e[2][2] / e[2][3]];
        basis.curvature_rows = (0..k)
            .map(|i| basis.rows_at(i.min(k - 2), knots[i])[2])
            .collect();
        basis
    }

    /// Interval index s with knots[s] <= t < knots[s+1], clamped to [0, K-2].
    pub fn interval(&self, t: f64) -> usize {
        let k = self.knots.len();
        let idx = self.knots.partition_point(|&x| x <= t);
        idx.saturating_sub(1).min(k - 2)
    }

    /// Values and first two derivatives of the four cubic B-splines
    /// B_s..B_{s+3} that are nonzero on interval `s` (NURBS book A2.3).
    fn bspline_ders(&self, s: usize, t: f64) -> [[f64; 4]; 3] {
        const P: usize = 3;
        const NDER: usize = 2;
        let span = s + 3;
        let u = &self.ext;
        let mut ndu = [[0.0f64; 4]; 4];
        let mut left = [0.0f64; 4];
        let mut right = [0.0f64; 4];
        ndu[0][0] = 1.0;
        for j in 1..=P {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = [[0.0f64; 4]; 3];
        for j in 0..=P {
            ders[0][j] = ndu[j][P];
        }
        let mut a = [[0.0f64; 4]; 2];
        for r in 0..=P {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=NDER {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = P - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1: usize = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2: usize = if (r as isize - 1) <= pk as isize { k - 1 } else { P - r };
                let mut j = j1;
                while j <= j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                    j += 1;
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = P as f64;
        for (k, row) in ders.iter_mut().enumerate().skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (P - k) as f64;
        }
        ders
    }

    /// Map B-spline weights on B_s..B_{s+3} to natural-basis weights.
    fn to_natural(&self, s: usize, b: &[f64; 4]) -> DesignRow {
        let k = self.knots.len();
        let start = s.saturating_sub(1);
        let mut w = [0.0; 4];
        for (off, &bv) in b.iter().enumerate() {
            let j = s + off;
            if j == 0 {
                w[0] += self.left[0] * bv;
                w[1 - start] += self.left[1] * bv;
            } else if j == k + 1 {
                w[k - 2 - start] += self.right[0] * bv;
                w[k - 1 - start] += self.right[1] * bv;
            } else {
                w[j - 1 - start] += bv;
            }
        }
        DesignRow { start, w }
    }

    /// Rows for value, first and second derivative at `t` inside interval `s`.
    fn rows_at(&self, s: usize, t: f64) -> [DesignRow; 3] {
        let d = self.bspline_ders(s, t);
        [
            self.to_natural(s, &d[0]),
            self.to_natural(s, &d[1]),
            self.to_natural(s, &d[2]),
        ]
    }

    /// Evaluation functional at `t`, linear beyond the outer knots.
    pub fn value_row(&self, t: f64) -> DesignRow {
        let k = self.knots.len();
        let (lo, hi) = (self.knots[0], self.knots[k - 1]);
        if t < lo {
            let [v, d, _] = self.rows_at(0, lo);
            v.axpy(t - lo, &d)
        } else if t > hi {
            let [v, d, _] = self.rows_at(k - 2, hi);
            v.axpy(t - hi, &d)
        } else {
            let s = self.interval(t);
            self.rows_at(s, t)[0]
        }
    }

    #[cfg(test)]
    pub fn second_derivative_row(&self, t: f64) -> DesignRow {
        let s = self.interval(t);
        self.rows_at(s, t)[2]
    }

    pub fn roughness(&self, c: &[f64]) -> f64 {
        let m: Vec<f64> = self.curvature_rows.iter().map(|r| r.dot(c)).collect();
        super::interval_roughness(&self.gaps, &m)
    }

    /// Banded roughness matrix: integral of N_i'' N_j''. Second derivatives are
    /// linear per interval, so two-point Gauss-Legendre is exact.
    pub fn penalty_band(&self) -> BandedSym {
        let k = self.knots.len();
        let mut a = BandedSym::zeros(k, BAND);
        let g = 0.5 / 3f64.sqrt();
        for s in 0..k - 1 {
            let (x0, x1) = (self.knots[s], self.knots[s + 1]);
            let h = x1 - x0;
            for node in [0.5 - g, 0.5 + g] {
                let t = x0 + node * h;
                let row = self.rows_at(s, t)[2];
                row.accumulate_outer(&mut a, 0.5 * h);
            }
        }
        a
    }

    /// Banded L2 Gram matrix. Products of cubics are degree 6, so four-point
    /// Gauss-Legendre per knot gap is exact.
    pub fn gram_band(&self) -> BandedSym {
        const NODES: [f64; 4] = [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ];
        const WEIGHTS: [f64; 4] = [
            0.347_854_845_137_453_9,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_9,
        ];
        let k = self.knots.len();
        let mut a = BandedSym::zeros(k, BAND);
        for s in 0..k - 1 {
            let (x0, x1) = (self.knots[s], self.knots[s + 1]);
            let half = 0.5 * (x1 - x0);
            let mid = 0.5 * (x0 + x1);
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                let row = self.bspline_row_in(s, mid + half * x);
                row.accumulate_outer(&mut a, w * half);
            }
        }
        a
    }

    fn bspline_row_in(&self, s: usize, t: f64) -> DesignRow {
        let d = self.bspline_ders(s, t);
        self.to_natural(s, &d[0])
    }

    /// Collocation rows: natural basis evaluated at each knot.
    pub fn collocation(&self) -> Vec<DesignRow> {
        self.knots.iter().map(|&t| self.value_row(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knots() -> Vec<f64> {
        vec![0.0, 0.13, 0.3, 0.42, 0.6, 0.81, 1.0]
    }

    #[test]
    fn bsplines_partition_unity() {
        let b = NaturalCubicBasis::new(&knots());
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let s = b.interval(t);
            let d = b.bspline_ders(s, t);
            let sum: f64 = d[0].iter().sum();
            assert!((sum - 1.0).abs() < 1e-13, "t={t} sum={sum}");
            let dsum: f64 = d[1].iter().sum();
            assert!(dsum.abs() < 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = NaturalCubicBasis::new(&knots());
        let c: Vec<f64> = (0..7).map(|i| ((i * 7 + 3) % 5) as f64 - 1.7).collect();
        let f = |t: f64| b.value_row(t).dot(&c);
        for &t in &[0.05, 0.2, 0.37, 0.5, 0.7, 0.95] {
            let s = b.interval(t);
            let [_, d1, d2] = b.rows_at(s, t);
            let h = 1e-5;
            let fd1 = (f(t + h) - f(t - h)) / (2.0 * h);
            let fd2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
            assert!((d1.dot(&c) - fd1).abs() < 1e-6);
            assert!((d2.dot(&c) - fd2).abs() < 1e-3);
        }
    }

    #[test]
    fn natural_boundary_conditions_hold() {
        let ks = knots();
        let b = NaturalCubicBasis::new(&ks);
        for j in 0..ks.len() {
            let mut c = vec![0.0; ks.len()];
            c[j] = 1.0;
            let lo = b.second_derivative_row(0.0).dot(&c);
            let hi = b.second_derivative_row(1.0).dot(&c);
            assert!(lo.abs() < 1e-9 && hi.abs() < 1e-9, "basis {j}: {lo} {hi}");
        }
    }

    #[test]
    fn three_knot_basis_is_well_formed() {
        let b = NaturalCubicBasis::new(&[0.0, 0.5, 1.0]);
        // Linear functions are natural splines: reproduce t exactly.
        let colloc = b.collocation();
        let dense = nalgebra::DMatrix::from_fn(3, 3, |i, j| {
            let r = colloc[i];
            if j >= r.start && j < r.start + 4 { r.w[j - r.start] } else { 0.0 }
        });
        let c = dense.lu().solve(&nalgebra::DVector::from_vec(vec![0.0, 0.5, 1.0])).unwrap();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!((b.value_row(t).dot(c.as_slice()) - t).abs() < 1e-12);
        }
    }
}
