//! Least-squares fits by orthogonal decomposition.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_ii| / max |R_jj|` below which a fit is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coeffs: DVector<f64>,
    /// The design was numerically rank deficient and `coeffs` is the minimum-norm solution.
    pub rank_deficient: bool,
}

/// `argmin_b |A b - y|` via Householder QR, falling back to the SVD
/// minimum-norm solution when `A` is (numerically) rank deficient.
pub fn solve(a: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquares {
    let (rows, cols) = a.shape();
    if rows >= cols && cols > 0 {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        let full_rank = diag_max > 0.0 && r.diagonal().iter().all(|d| d.abs() > RANK_TOL * diag_max);
        if full_rank {
            let qty = qr.q().tr_mul(y);
            if let Some(coeffs) = r.solve_upper_triangular(&qty) {
                return LeastSquares {
                    coeffs,
                    rank_deficient: false,
                };
            }
        }
    }
    min_norm(a, y)
}

fn min_norm(a: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquares {
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = RANK_TOL * s_max.max(f64::MIN_POSITIVE);
    let coeffs = svd.solve(y, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    LeastSquares {
        coeffs,
        rank_deficient: true,
    }
}

/// Row-by-row QR of a growing design, updated with Givens rotations.
///
/// After pushing rows `0..p` it holds `R` (upper triangular) and the leading
/// part of `Q^t y`, so the fit on the first `p` rows costs one back
/// substitution.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    n: usize,
    r: Vec<f64>,
    qty: Vec<f64>,
    rows: usize,
}

impl IncrementalQr {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            r: vec![0.0; n * n],
            qty: vec![0.0; n],
            rows: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn push_row(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.n);
        let n = self.n;
        let mut w = x.to_vec();
        let mut t = y;
        for k in 0..n {
            if w[k] == 0.0 {
                continue;
            }
            let rkk = self.r[k * n + k];
            let h = rkk.hypot(w[k]);
            let (c, s) = (rkk / h, w[k] / h);
            for (rj, wj) in self.r[k * n + k..(k + 1) * n].iter_mut().zip(&mut w[k..]) {
                let (a, b) = (*rj, *wj);
                *rj = c * a + s * b;
                *wj = c * b - s * a;
            }
            let a = self.qty[k];
            self.qty[k] = c * a + s * t;
            t = c * t - s * a;
        }
        self.rows += 1;
    }

    /// Solution of the current least-squares problem, or `None` if rank deficient.
    pub fn solve(&self) -> Option<Vec<f64>> {
        let n = self.n;
        let diag_max = (0..n).fold(0.0f64, |acc, k| acc.max(self.r[k * n + k].abs()));
        if self.rows < n || diag_max == 0.0 {
            return None;
        }
        let mut b = vec![0.0; n];
        for k in (0..n).rev() {
            let rkk = self.r[k * n + k];
            if rkk.abs() <= RANK_TOL * diag_max {
                return None;
            }
            let tail: f64 = (k + 1..n).map(|j| self.r[k * n + j] * b[j]).sum();
            b[k] = (self.qty[k] - tail) / rkk;
        }
        Some(b)
    }
}
