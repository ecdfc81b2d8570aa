//! Jacobi-ensemble normalization ratios and negative eigenvalue moments.
//!
//! The ensemble has joint density proportional to
//!
//! ```text
//! prod_{i<j} |x_i - x_j|^(2 gamma) * prod_i x_i^(alpha - 1) (1 - x_i)^(beta - 1)
//! ```
//!
//! on `(0, 1)^n`. For the real case (`gamma = 1/2`) it is the eigenvalue law of
//! `X^t X (X^t X + Y^t Y)^-1` with `X` a `p x n` and `Y` an `(m - p) x n`
//! standard Gaussian matrix, which [`JacobiSampler`] draws directly so that
//! the closed forms have an independent check.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::{chunked_reduce, stream_rng, MomentSum};

/// Exponent parameter of the real ensemble.
pub const REAL_GAMMA: f64 = 0.5;

/// Parameters `(n, alpha, beta, gamma)` of a Jacobi ensemble.
///
/// `beta` may be zero or negative: the negative-moment formulas remain exact
/// there as rational functions (for the matrix model with `m - p < n` the
/// surplus eigenvalues sit at exactly 1). Operations that need an integrable
/// density check `beta > 0` themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiParams {
    n_eigen: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl JacobiParams {
    pub fn new(n_eigen: usize, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if n_eigen == 0 {
            return Err(Error::domain("Jacobi ensemble needs at least one eigenvalue"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        if !beta.is_finite() {
            return Err(Error::domain(format!("beta must be finite, got {beta}")));
        }
        Ok(Self {
            n_eigen,
            alpha,
            beta,
            gamma,
        })
    }

    pub fn n_eigen(&self) -> usize {
        self.n_eigen
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn require_density(&self) -> Result<()> {
        if self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "beta must be positive for an integrable density, got {}",
                self.beta
            )))
        }
    }

    /// `alpha + beta + (n - 1) gamma - 1`, the factor shared by every negative moment.
    fn shared_factor(&self) -> f64 {
        self.alpha + self.beta + (self.n_eigen as f64 - 1.0) * self.gamma - 1.0
    }

    fn real_params(n: u64, p: u64, m: u64) -> Self {
        Self {
            n_eigen: n as usize,
            alpha: 0.5 * (p as f64 - n as f64 + 1.0),
            beta: 0.5 * (m as f64 - p as f64 - n as f64 + 1.0),
            gamma: REAL_GAMMA,
        }
    }
}

/// Ensemble parameters for a training block of `p` out of `m` points in `n`
/// dimensions, restricted to the integrity domain `n + 4 <= p <= m - 1`.
pub fn params_from_split(m: u64, n: u64, p: u64) -> Result<JacobiParams> {
    if n == 0 {
        return Err(Error::domain("feature dimension n must be at least 1"));
    }
    let lo = n + 4;
    let hi = m.saturating_sub(1);
    if p < lo || p > hi {
        return Err(Error::domain(format!(
            "training size p = {p} outside admissible interval [{lo}, {hi}] for m = {m}, n = {n}"
        )));
    }
    Ok(JacobiParams::real_params(n, p, m))
}

/// Ensemble parameters for the matrix model itself: needs `X^t X` invertible
/// (`p >= n + 1`) and `Y^t Y` of full rank (`p <= m - n`).
pub fn matrix_model_params(m: u64, n: u64, p: u64) -> Result<JacobiParams> {
    if n == 0 {
        return Err(Error::domain("feature dimension n must be at least 1"));
    }
    let lo = n + 1;
    let hi = m.saturating_sub(n);
    if p < lo || p > hi {
        return Err(Error::domain(format!(
            "matrix model needs p in [{lo}, {hi}] for m = {m}, n = {n}, got p = {p}"
        )));
    }
    Ok(JacobiParams::real_params(n, p, m))
}

/// `log S_n(alpha, beta, gamma)`, the log of the Selberg integral.
pub fn log_selberg(params: &JacobiParams) -> Result<f64> {
    params.require_density()?;
    let JacobiParams {
        n_eigen,
        alpha,
        beta,
        gamma,
    } = *params;
    let n = n_eigen as f64;
    let lg_one_plus_gamma = ln_gamma(1.0 + gamma);
    let total = (0..n_eigen)
        .map(|i| {
            let i = i as f64;
            ln_gamma(alpha + i * gamma) + ln_gamma(beta + i * gamma) + ln_gamma(1.0 + (i + 1.0) * gamma)
                - ln_gamma(alpha + beta + (n + i - 1.0) * gamma)
                - lg_one_plus_gamma
        })
        .sum();
    Ok(total)
}

/// `<x_1 x_2 ... x_k>`, the expected product of `k` eigenvalues.
///
/// `k = n` is accepted; the product then equals
/// `S_n(alpha + 1, beta, gamma) / S_n(alpha, beta, gamma)`.
pub fn aomoto_product(params: &JacobiParams, k: usize) -> Result<f64> {
    let n = params.n_eigen;
    if k > n {
        return Err(Error::domain(format!(
            "Aomoto product needs 0 <= k <= n = {n}, got k = {k}"
        )));
    }
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    Ok((1..=k)
        .map(|i| {
            let i = i as f64;
            let n = n as f64;
            (a + (n - i) * g) / (a + b + (2.0 * n - i - 1.0) * g)
        })
        .product())
}

fn require_alpha(params: &JacobiParams, moment: &'static str, bound: f64) -> Result<()> {
    if params.alpha > bound {
        Ok(())
    } else {
        Err(Error::DivergentMoment {
            moment,
            alpha: params.alpha,
            bound,
        })
    }
}

/// `<x_1^-1>`.
pub fn inv_moment_1(params: &JacobiParams) -> Result<f64> {
    require_alpha(params, "<x^-1>", 1.0)?;
    Ok(params.shared_factor() / (params.alpha - 1.0))
}

/// `<x_1^-2>`.
pub fn inv_moment_2(params: &JacobiParams) -> Result<f64> {
    require_alpha(params, "<x^-2>", 2.0)?;
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    let n = params.n_eigen as f64;
    let coupling = g * (n - 1.0) * (a + b + n * g - 1.0) / (a + g - 1.0);
    Ok(params.shared_factor() / ((a - 1.0) * (a - 2.0)) * (a + b - 2.0 + coupling))
}

/// `<x_1^-1 x_2^-1>`.
pub fn inv_cross_moment(params: &JacobiParams) -> Result<f64> {
    if params.n_eigen < 2 {
        return Err(Error::domain("cross moment needs at least two eigenvalues"));
    }
    require_alpha(params, "<x_1^-1 x_2^-1>", 1.0)?;
    let (a, b, g) = (params.alpha, params.beta, params.gamma);
    let n = params.n_eigen as f64;
    Ok(params.shared_factor() * (a + b + n * g - 1.0) / ((a - 1.0) * (a + g - 1.0)))
}

/// One draw of the ensemble's eigenvalues, all strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSample {
    pub eigenvalues: Vec<f64>,
}

/// Draws real Jacobi-ensemble samples from the `X^t X (X^t X + Y^t Y)^-1` model.
///
/// Sample `i` uses the random stream `(seed, i)` so any subset of samples can
/// be regenerated independently of the others.
#[derive(Debug, Clone)]
pub struct JacobiSampler {
    m: usize,
    n: usize,
    p: usize,
    seed: u64,
}

const MAX_RESAMPLES: usize = 64;

impl JacobiSampler {
    pub fn new(m: u64, n: u64, p: u64, seed: u64) -> Result<Self> {
        matrix_model_params(m, n, p)?;
        Ok(Self {
            m: m as usize,
            n: n as usize,
            p: p as usize,
            seed,
        })
    }

    pub fn params(&self) -> JacobiParams {
        JacobiParams::real_params(self.n as u64, self.p as u64, self.m as u64)
    }

    pub fn sample(&self, index: u64) -> JacobiSample {
        let mut rng = stream_rng(self.seed, index);
        for attempt in 0..MAX_RESAMPLES {
            if let Some(eigenvalues) = self.try_sample(&mut rng) {
                return JacobiSample { eigenvalues };
            }
            warn!(
                "singular Jacobi draw (m={}, n={}, p={}, sample {index}, attempt {attempt}); resampling",
                self.m, self.n, self.p
            );
        }
        panic!("Jacobi sampler failed {MAX_RESAMPLES} consecutive draws; Gaussian source is broken");
    }

    /// Lazily yields samples `0..count`.
    pub fn iter(&self, count: u64) -> impl Iterator<Item = JacobiSample> + '_ {
        (0..count).map(move |i| self.sample(i))
    }

    fn try_sample(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let n = self.n;
        let x = gaussian_matrix(rng, self.p, n);
        let y = gaussian_matrix(rng, self.m - self.p, n);
        let a = x.tr_mul(&x);
        let total = &a + y.tr_mul(&y);
        // Generalized symmetric-definite problem A v = lambda (A + B) v,
        // reduced with the Cholesky factor of A + B.
        let chol = total.cholesky()?;
        let l = chol.l();
        let left = l.solve_lower_triangular(&a)?;
        let reduced = l.solve_lower_triangular(&left.transpose())?;
        let sym = (&reduced + reduced.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if values.iter().all(|&v| v > 0.0 && v < 1.0) {
            values.sort_by(f64::total_cmp);
            Some(values)
        } else {
            None
        }
    }
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Row-major draw order so the stream layout does not depend on nalgebra's storage.
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            out[(r, c)] = StandardNormal.sample(rng);
        }
    }
    out
}

/// Empirical negative moments from the matrix model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledMoments {
    pub samples: u64,
    /// Mean of `x^-1` over all eigenvalues of all samples.
    pub inv_1: f64,
    /// Mean of `x^-2` over all eigenvalues of all samples.
    pub inv_2: f64,
    /// Mean of `x_i^-1 x_j^-1` over all ordered pairs `i != j`; `None` when `n = 1`.
    pub inv_cross: Option<f64>,
}

#[derive(Default)]
struct MomentAcc {
    inv_1: MomentSum,
    inv_2: MomentSum,
    cross: MomentSum,
}

/// Averages the three negative moments over `count` matrix-model samples.
/// Runs in parallel; the result is identical for any thread count.
pub fn sample_moments(m: u64, n: u64, p: u64, count: u64, seed: u64) -> Result<SampledMoments> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let sampler = JacobiSampler::new(m, n, p, seed)?;
    let nf = n as f64;
    let acc = chunked_reduce(
        count,
        MomentAcc::default,
        |acc, i| {
            let s = sampler.sample(i);
            let inv: Vec<f64> = s.eigenvalues.iter().map(|x| x.recip()).collect();
            let sum: f64 = inv.iter().sum();
            let sum_sq: f64 = inv.iter().map(|v| v * v).sum();
            acc.inv_1.push(sum / nf);
            acc.inv_2.push(sum_sq / nf);
            if n >= 2 {
                acc.cross.push((sum * sum - sum_sq) / (nf * (nf - 1.0)));
            }
        },
        |a, b| {
            a.inv_1.merge(&b.inv_1);
            a.inv_2.merge(&b.inv_2);
            a.cross.merge(&b.cross);
        },
    );
    Ok(SampledMoments {
        samples: count,
        inv_1: acc.inv_1.mean(),
        inv_2: acc.inv_2.mean(),
        inv_cross: (n >= 2).then(|| acc.cross.mean()),
    })
}
