//! Integrity expectation of a train/test split and its minimizer.
//!
//! For `m` Gaussian points in `n` dimensions with `p` used for training, the
//! expected squared deviation of the per-point test loss from the noise
//! variance, divided by `sigma^4`, is
//!
//! ```text
//! f(m, n, p) = (6 + m n (2 + n) - (8 + n (2 + n) - 2 p) p)
//!              / ((m - p) (p - n - 3) (p - n - 1))
//! ```
//!
//! on `n + 4 <= p <= m - 1`. It is convex there, and the numerator of its
//! derivative is twice the quartic `delta_{m,n}(p)`, so the optimal training
//! size sits next to the unique root of `delta` in `(n + 3, m)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jacobi::{inv_cross_moment, inv_moment_1, inv_moment_2, params_from_split};

/// Dataset size `m` and feature dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SplitProblem {
    m: u64,
    n: u64,
}

impl SplitProblem {
    /// Requires `n >= 1` and `m >= n + 5`, so that `[n + 4, m - 1]` is nonempty.
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("feature dimension n must be at least 1"));
        }
        if m < n + 5 {
            return Err(Error::domain(format!(
                "need m >= n + 5 (m = {m}, n = {n}): admissible training sizes [n+4, m-1] = [{}, {}] are empty",
                n + 4,
                m.saturating_sub(1)
            )));
        }
        // Coefficients are built in i128; keep m^2 n^3 well inside its range.
        if m > 1 << 40 || n > 1 << 12 {
            return Err(Error::domain(format!(
                "problem too large for exact coefficient arithmetic (m = {m}, n = {n})"
            )));
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Smallest admissible training size, `n + 4`.
    pub fn p_min(&self) -> u64 {
        self.n + 4
    }

    /// Largest admissible training size, `m - 1`.
    pub fn p_max(&self) -> u64 {
        self.m - 1
    }

    fn check_p(&self, p: u64) -> Result<()> {
        if p < self.p_min() || p > self.p_max() {
            return Err(Error::domain(format!(
                "training size p = {p} outside admissible interval [{}, {}] for m = {}, n = {}",
                self.p_min(),
                self.p_max(),
                self.m,
                self.n
            )));
        }
        Ok(())
    }
}

/// Integrity expectation `f(m, n, p)` (noise-free units).
pub fn integrity_f(problem: &SplitProblem, p: u64) -> Result<f64> {
    problem.check_p(p)?;
    let (m, n, p) = (problem.m as i128, problem.n as i128, p as i128);
    let num = 6 + m * n * (2 + n) - (8 + n * (2 + n) - 2 * p) * p;
    let den = (m - p) * (p - n - 3) * (p - n - 1);
    Ok(num as f64 / den as f64)
}

/// `f` with a real-valued training size, for derivative checks.
pub fn integrity_f_real(problem: &SplitProblem, p: f64) -> f64 {
    let (m, n) = (problem.m as f64, problem.n as f64);
    let num = 6.0 + m * n * (2.0 + n) - (8.0 + n * (2.0 + n) - 2.0 * p) * p;
    num / ((m - p) * (p - n - 3.0) * (p - n - 1.0))
}

/// `f` assembled term by term from the Jacobi negative moments:
///
/// ```text
/// (3n <x^-2> + n(n-1) <x_1^-1 x_2^-1> - 2n^2 <x^-1> + n^2 - 2n + 2(m-p)) / (m-p)^2
/// ```
///
/// Kept as an independent cross-check of [`integrity_f`].
pub fn integrity_f_unsimplified(problem: &SplitProblem, p: u64) -> Result<f64> {
    problem.check_p(p)?;
    let params = params_from_split(problem.m, problem.n, p)?;
    let n = problem.n as f64;
    let test = (problem.m - p) as f64;
    let m2 = inv_moment_2(&params)?;
    let m1 = inv_moment_1(&params)?;
    let cross = if problem.n >= 2 {
        inv_cross_moment(&params)?
    } else {
        0.0
    };
    let total = 3.0 * n * m2 + n * (n - 1.0) * cross - 2.0 * n * n * m1 + n * n - 2.0 * n + 2.0 * test;
    Ok(total / (test * test))
}

/// Coefficients of `delta_{m,n}(p)` in ascending powers of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

fn exact_coeffs(problem: &SplitProblem) -> [i128; 5] {
    let (m, n) = (problem.m as i128, problem.n as i128);
    [
        9 + n * (m * m * (2 + n) * (2 + n) + 3 * (4 + n) - 2 * m * (5 + 2 * n)),
        -24 - n * (12 + m * m * (2 + n) + 2 * m * n * (3 + n)),
        22 + n * (8 + 2 * m * (1 + n) + n * (3 + n)),
        -(8 + n * (2 + n)),
        1,
    ]
}

impl QuarticCoeffs {
    pub fn as_array(&self) -> [f64; 5] {
        [self.c0, self.c1, self.c2, self.c3, self.c4]
    }

    /// Horner evaluation.
    pub fn eval(&self, p: f64) -> f64 {
        (((self.c4 * p + self.c3) * p + self.c2) * p + self.c1) * p + self.c0
    }
}

pub fn quartic_coeffs(problem: &SplitProblem) -> QuarticCoeffs {
    let [c0, c1, c2, c3, c4] = exact_coeffs(problem).map(|c| c as f64);
    QuarticCoeffs { c0, c1, c2, c3, c4 }
}

pub fn delta_eval(problem: &SplitProblem, p: f64) -> f64 {
    quartic_coeffs(problem).eval(p)
}

/// `delta` in the rescaled variable `q = p / m^(2/3)`, divided by `m^(8/3)`.
/// Keeps every term O(1)-ish near the root even for very large `m`.
struct ScaledQuartic {
    d: [f64; 5],
    scale: f64,
}

impl ScaledQuartic {
    fn new(problem: &SplitProblem) -> Self {
        let scale = (problem.m as f64).powf(2.0 / 3.0);
        let exact = exact_coeffs(problem);
        let mut d = [0.0; 5];
        for (k, c) in exact.iter().enumerate() {
            d[k] = *c as f64 * scale.powi(k as i32 - 4);
        }
        Self { d, scale }
    }

    /// Value, derivative and magnitude `sum |d_k q^k|` at `q`.
    fn eval(&self, q: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for &c in self.d.iter().rev() {
            dv = dv * q + v;
            v = v * q + c;
        }
        let mag = self
            .d
            .iter()
            .enumerate()
            .map(|(k, c)| (c * q.powi(k as i32)).abs())
            .sum();
        (v, dv, mag)
    }
}

const ROOT_REL_TOL: f64 = 1e-12;

/// The unique real root of `delta_{m,n}` in `(n + 3, m)`.
///
/// Bisection on the bracket, with Newton steps taken whenever they land
/// inside it and shrink the residual.
pub fn solve_real_root(problem: &SplitProblem) -> Result<f64> {
    let quartic = ScaledQuartic::new(problem);
    let s = quartic.scale;
    let (lo_p, hi_p) = ((problem.n + 3) as f64, problem.m as f64);
    let (mut lo, mut hi) = (lo_p / s, hi_p / s);
    let (f_lo, _, _) = quartic.eval(lo);
    let (f_hi, _, _) = quartic.eval(hi);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoAdmissibleRoot { lo: lo_p, hi: hi_p });
    }

    let mut q = 0.5 * (lo + hi);
    for _ in 0..500 {
        let (v, dv, mag) = quartic.eval(q);
        if v.abs() <= ROOT_REL_TOL * mag {
            return Ok(q * s);
        }
        if v < 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi) * s);
        }
        let newton = q - v / dv;
        q = if dv != 0.0 && newton > lo && newton < hi && quartic.eval(newton).0.abs() < 0.5 * v.abs() {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numerical(format!(
        "quartic root did not converge for m = {}, n = {}",
        problem.m, problem.n
    )))
}

/// Integer training size with minimal integrity expectation. Ties go to the smaller `p`.
pub fn optimal_p(problem: &SplitProblem) -> Result<u64> {
    if problem.p_min() == problem.p_max() {
        return Ok(problem.p_min());
    }
    let root = solve_real_root(problem)?;
    let clamp = |x: f64| (x as u64).clamp(problem.p_min(), problem.p_max());
    let below = clamp(root.floor());
    let above = clamp(root.ceil());
    if below == above {
        return Ok(below);
    }
    let f_below = integrity_f(problem, below)?;
    let f_above = integrity_f(problem, above)?;
    Ok(if f_above < f_below { above } else { below })
}

/// Large-`m` expansion of the optimal training size, truncated to `order` terms (1 to 4):
///
/// ```text
/// m^(2/3) c - m^(1/3) 2n(1+n) / (3c) + (6 + n + n^2) / 3
///   - m^(-1/3) 2n^2 (216 + 230n + 87n^2 + 24n^3 + 5n^4) / (81 c^5),   c = (n(2+n))^(1/3)
/// ```
pub fn asymptotic_p(problem: &SplitProblem, order: u32) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(Error::domain(format!("expansion order must be in [1, 4], got {order}")));
    }
    let (m, n) = (problem.m as f64, problem.n as f64);
    let c = (n * (2.0 + n)).cbrt();
    let m13 = m.cbrt();
    let terms = [
        m13 * m13 * c,
        -m13 * 2.0 * n * (1.0 + n) / (3.0 * c),
        (6.0 + n + n * n) / 3.0,
        -2.0 * n * n * (216.0 + n * (230.0 + n * (87.0 + n * (24.0 + 5.0 * n)))) / (81.0 * c.powi(5) * m13),
    ];
    Ok(terms[..order as usize].iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub p: u64,
    pub f: f64,
}

/// `f` over every admissible training size, with its minimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrityCurve {
    pub problem: SplitProblem,
    pub entries: Vec<CurvePoint>,
    pub argmin_p: u64,
}

pub fn integrity_curve(problem: &SplitProblem) -> Result<IntegrityCurve> {
    let entries = (problem.p_min()..=problem.p_max())
        .map(|p| integrity_f(problem, p).map(|f| CurvePoint { p, f }))
        .collect::<Result<Vec<_>>>()?;
    let argmin_p = argmin_first(&entries).expect("admissible range is nonempty");
    Ok(IntegrityCurve {
        problem: *problem,
        entries,
        argmin_p,
    })
}

fn argmin_first(entries: &[CurvePoint]) -> Option<u64> {
    entries
        .iter()
        .fold(None::<&CurvePoint>, |best, e| match best {
            Some(b) if b.f <= e.f => Some(b),
            _ => Some(e),
        })
        .map(|e| e.p)
}
