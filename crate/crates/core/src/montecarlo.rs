//! Monte Carlo estimate of the integrity metric over the full regression pipeline.
//!
//! Each trial draws `X` (`m x n`) and `eps` (`m`) standard normal, sets
//! `y = X R b + sigma eps`, and for every training size `p` in `[n+1, m-1]`
//! fits `b` on the first `p` rows and records
//! `((1/(m-p)) |X_test R b_hat - y_test|^2 - sigma^2)^2`. The same draw serves
//! every `p` of a trial.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrity::{integrity_f, optimal_p, SplitProblem};
use crate::jacobi::gaussian_matrix;
use crate::lstsq::IncrementalQr;
use crate::rng::{chunked_reduce, stream_rng, MomentSum, SETUP_STREAM};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub m: u64,
    pub n: u64,
    pub sigma: f64,
    pub trials: u64,
    pub seed: u64,
    /// True coefficients `b`; standard normal if absent.
    pub coeffs: Option<Vec<f64>>,
    /// Row covariance `Sigma`; `G^t G + n I` with `G` standard normal if absent.
    pub covariance: Option<DMatrix<f64>>,
}

impl SimulationConfig {
    pub fn new(m: u64, n: u64, sigma: f64, trials: u64, seed: u64) -> Self {
        Self {
            m,
            n,
            sigma,
            trials,
            seed,
            coeffs: None,
            covariance: None,
        }
    }

    pub fn with_coeffs(mut self, coeffs: Vec<f64>) -> Self {
        self.coeffs = Some(coeffs);
        self
    }

    pub fn with_covariance(mut self, covariance: DMatrix<f64>) -> Self {
        self.covariance = Some(covariance);
        self
    }

    pub fn validate(&self) -> Result<()> {
        SplitProblem::new(self.m, self.n)?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be at least 1"));
        }
        let n = self.n as usize;
        if let Some(b) = &self.coeffs {
            if b.len() != n {
                return Err(Error::domain(format!(
                    "coefficient vector has length {}, expected n = {n}",
                    b.len()
                )));
            }
        }
        if let Some(cov) = &self.covariance {
            if cov.shape() != (n, n) {
                return Err(Error::domain(format!(
                    "covariance is {}x{}, expected {n}x{n}",
                    cov.nrows(),
                    cov.ncols()
                )));
            }
            if (cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
                return Err(Error::domain("covariance must be symmetric"));
            }
            if cov.clone().cholesky().is_none() {
                return Err(Error::domain("covariance must be positive definite"));
            }
        }
        Ok(())
    }

    /// `b` and the Cholesky factor `R` (upper, `Sigma = R^t R`), drawing any
    /// missing piece from the setup stream.
    fn setup(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n as usize;
        let mut rng = stream_rng(self.seed, SETUP_STREAM);
        let b = match &self.coeffs {
            Some(b) => DVector::from_column_slice(b),
            None => DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)),
        };
        let cov = match &self.covariance {
            Some(c) => c.clone(),
            None => {
                let g = gaussian_matrix(&mut rng, n, n);
                g.tr_mul(&g) + DMatrix::identity(n, n) * n as f64
            }
        };
        let l = cov.cholesky().expect("validated positive definite").l();
        (b, l.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerPEstimate {
    pub p: u64,
    pub mean_sq_dev: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    /// One entry per `p` in `[n+1, m-1]`.
    pub per_p: Vec<PerPEstimate>,
    pub empirical_argmin: u64,
    /// Trials that contributed to the estimates.
    pub trials_used: u64,
    /// Trials dropped because a training block was rank deficient.
    pub skipped_trials: u64,
}

struct TrialAcc {
    per_p: Vec<MomentSum>,
    skipped: u64,
}

pub fn run_integrity_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let (m, n) = (config.m as usize, config.n as usize);
    let sigma = config.sigma;
    let sigma2 = sigma * sigma;
    let (b, r) = config.setup();
    let p_lo = n + 1;
    let width = m - 1 - p_lo + 1;

    let acc = chunked_reduce(
        config.trials,
        || TrialAcc {
            per_p: vec![MomentSum::default(); width],
            skipped: 0,
        },
        |acc, trial| {
            let mut rng = stream_rng(config.seed, trial);
            let x = gaussian_matrix(&mut rng, m, n);
            let eps: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z = x * &r;
            let signal = &z * &b;
            let y: Vec<f64> = (0..m).map(|i| signal[i] + sigma * eps[i]).collect();
            let rows: Vec<Vec<f64>> = (0..m).map(|i| z.row(i).iter().copied().collect()).collect();

            let mut qr = IncrementalQr::new(n);
            for i in 0..p_lo {
                qr.push_row(&rows[i], y[i]);
            }
            let mut devs = Vec::with_capacity(width);
            for p in p_lo..m {
                let Some(fit) = qr.solve() else {
                    acc.skipped += 1;
                    return;
                };
                let resid: f64 = (p..m)
                    .map(|i| {
                        let pred: f64 = rows[i].iter().zip(&fit).map(|(a, c)| a * c).sum();
                        (pred - y[i]).powi(2)
                    })
                    .sum();
                let dev = resid / (m - p) as f64 - sigma2;
                devs.push(dev * dev);
                qr.push_row(&rows[p], y[p]);
            }
            for (slot, d) in acc.per_p.iter_mut().zip(devs) {
                slot.push(d);
            }
        },
        |total, part| {
            for (t, p) in total.per_p.iter_mut().zip(&part.per_p) {
                t.merge(p);
            }
            total.skipped += part.skipped;
        },
    );

    if acc.skipped > 0 {
        warn!("skipped {} rank-deficient trials", acc.skipped);
    }
    let trials_used = config.trials - acc.skipped;
    if trials_used == 0 {
        return Err(Error::Numerical(
            "every trial had a rank-deficient training block".into(),
        ));
    }
    let per_p: Vec<PerPEstimate> = acc
        .per_p
        .iter()
        .enumerate()
        .map(|(k, s)| PerPEstimate {
            p: (p_lo + k) as u64,
            mean_sq_dev: s.mean(),
            std_err: s.std_err(),
        })
        .collect();
    let empirical_argmin = per_p
        .iter()
        .fold(None::<&PerPEstimate>, |best, e| match best {
            Some(b) if b.mean_sq_dev <= e.mean_sq_dev => Some(b),
            _ => Some(e),
        })
        .map(|e| e.p)
        .expect("p range is nonempty");
    Ok(SimulationResult {
        per_p,
        empirical_argmin,
        trials_used,
        skipped_trials: acc.skipped,
    })
}

/// One row of the empirical-vs-analytic overlay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlayRow {
    pub p: u64,
    /// `mean_sq_dev / sigma^4`.
    pub normalized: f64,
    pub normalized_std_err: f64,
    /// `f(m, n, p)`; absent below the analytic domain `p >= n + 4`.
    pub analytic_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub empirical_argmin: u64,
    pub optimal_p: u64,
    pub overlay: Vec<OverlayRow>,
}

impl Comparison {
    pub fn argmin_gap(&self) -> u64 {
        self.empirical_argmin.abs_diff(self.optimal_p)
    }

    pub fn row(&self, p: u64) -> Option<&OverlayRow> {
        self.overlay.iter().find(|r| r.p == p)
    }
}

/// Runs the simulation and overlays it on the analytic curve.
pub fn empirical_vs_analytic(config: &SimulationConfig) -> Result<Comparison> {
    let result = run_integrity_simulation(config)?;
    compare(config, &result)
}

/// Overlay for an existing simulation result.
pub fn compare(config: &SimulationConfig, result: &SimulationResult) -> Result<Comparison> {
    let problem = SplitProblem::new(config.m, config.n)?;
    let s4 = config.sigma.powi(4);
    let overlay = result
        .per_p
        .iter()
        .map(|e| {
            let analytic_f = if e.p >= problem.p_min() {
                Some(integrity_f(&problem, e.p)?)
            } else {
                None
            };
            Ok(OverlayRow {
                p: e.p,
                normalized: e.mean_sq_dev / s4,
                normalized_std_err: e.std_err / s4,
                analytic_f,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        empirical_argmin: result.empirical_argmin,
        optimal_p: optimal_p(&problem)?,
        overlay,
    })
}

/// Sampled estimates of three Gaussian quadratic-form expectations against
/// their trace formulas:
///
/// * `E[e^t S e] = tr S`
/// * `E[(e^t S e)^2] = (tr S)^2 + 2 tr(S^2)`
/// * `E[(e^t M f)(f^t M^t e)] = tr(M^t M)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceIdentityReport {
    pub trials: u64,
    pub quadratic: IdentityCheck,
    pub quadratic_squared: IdentityCheck,
    pub bilinear_squared: IdentityCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub sampled: f64,
    pub exact: f64,
    pub rel_err: f64,
}

impl IdentityCheck {
    fn new(sampled: f64, exact: f64) -> Self {
        Self {
            sampled,
            exact,
            rel_err: ((sampled - exact) / exact).abs(),
        }
    }
}

impl TraceIdentityReport {
    pub fn max_rel_err(&self) -> f64 {
        self.quadratic
            .rel_err
            .max(self.quadratic_squared.rel_err)
            .max(self.bilinear_squared.rel_err)
    }
}

/// Draws a random SPD `S` (`a x a`, as `G^t G + a I`) and `M` (`a x b`), then checks the identities.
pub fn check_trace_identities(a: usize, b: usize, trials: u64, seed: u64) -> Result<TraceIdentityReport> {
    if a == 0 || b == 0 {
        return Err(Error::domain("matrix dimensions must be at least 1"));
    }
    let mut rng = stream_rng(seed, SETUP_STREAM);
    let g = gaussian_matrix(&mut rng, a, a);
    let s = g.tr_mul(&g) + DMatrix::identity(a, a) * a as f64;
    let mm = gaussian_matrix(&mut rng, a, b);
    check_trace_identities_for(&s, &mm, trials, seed)
}

/// Same as [`check_trace_identities`] for caller-supplied `S` and `M`.
pub fn check_trace_identities_for(
    s: &DMatrix<f64>,
    mm: &DMatrix<f64>,
    trials: u64,
    seed: u64,
) -> Result<TraceIdentityReport> {
    let a = s.nrows();
    if s.ncols() != a || mm.nrows() != a {
        return Err(Error::domain("S must be a x a and M must be a x b"));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let b = mm.ncols();
    let sums = chunked_reduce(
        trials,
        || [MomentSum::default(); 3],
        |acc, i| {
            let mut rng = stream_rng(seed, i);
            let e = DVector::<f64>::from_fn(a, |_, _| StandardNormal.sample(&mut rng));
            let f = DVector::<f64>::from_fn(b, |_, _| StandardNormal.sample(&mut rng));
            let q = e.dot(&(s * &e));
            let bil = e.dot(&(mm * &f));
            acc[0].push(q);
            acc[1].push(q * q);
            acc[2].push(bil * bil);
        },
        |t, p| {
            for (x, y) in t.iter_mut().zip(&p) {
                x.merge(y);
            }
        },
    );
    let tr = s.trace();
    let tr_sq = (s * s).trace();
    let tr_mtm = mm.tr_mul(mm).trace();
    Ok(TraceIdentityReport {
        trials,
        quadratic: IdentityCheck::new(sums[0].mean(), tr),
        quadratic_squared: IdentityCheck::new(sums[1].mean(), tr * tr + 2.0 * tr_sq),
        bilinear_squared: IdentityCheck::new(sums[2].mean(), tr_mtm),
    })
}
