//! Integrity-optimal train/test split sizing for ordinary least squares.
//!
//! The optimal training size for `m` Gaussian data points in `n` dimensions
//! minimizes the expected squared gap between the test-set loss and the true
//! noise variance. It depends only on `(m, n)` and is found next to the root
//! of a quartic ([`integrity`]). The expectation is built from negative
//! moments of the Jacobi ensemble ([`jacobi`]), checked against a Monte Carlo
//! run of the full regression pipeline ([`montecarlo`]), and the split policy
//! can be benchmarked on real CSV data ([`databench`]).

pub mod databench;
pub mod error;
pub mod integrity;
pub mod jacobi;
pub mod lstsq;
pub mod montecarlo;
mod rng;

pub use error::{Error, Result};
pub use integrity::{
    asymptotic_p, delta_eval, integrity_curve, integrity_f, integrity_f_unsimplified, optimal_p, quartic_coeffs,
    solve_real_root, CurvePoint, IntegrityCurve, QuarticCoeffs, SplitProblem,
};
pub use jacobi::{
    aomoto_product, inv_cross_moment, inv_moment_1, inv_moment_2, log_selberg, params_from_split, sample_moments,
    JacobiParams, JacobiSample, JacobiSampler, SampledMoments,
};
