#![allow(dead_code)]

/// Tanh-sinh quadrature of `f(x, 1 - x)` over `(0, 1)`.
///
/// The complement is passed separately so integrands with `(1 - x)^(b - 1)`
/// singularities keep full precision near 1.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
    let h = 1.0 / 128.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    let kmax = (6.5 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let x = 1.0 / (1.0 + (-2.0 * u).exp());
        let xc = 1.0 / (1.0 + (2.0 * u).exp());
        if x <= 0.0 || xc <= 0.0 {
            continue;
        }
        let w = half_pi * t.cosh() / (u.cosh() * u.cosh()) * 0.5;
        if w == 0.0 {
            continue;
        }
        // Nodes this close to an endpoint carry negligible weight; skip 0 * inf.
        let v = f(x, xc);
        if v.is_finite() {
            total += w * v;
        }
    }
    total * h
}

/// Tanh-sinh over `(lo, hi)`.
pub fn tanh_sinh_on<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let width = hi - lo;
    width * tanh_sinh(|x, xc| f(if x < 0.5 { lo + width * x } else { hi - width * xc }))
}

/// `E[x^-k]` under the Beta(a, b) law, normalization included, by quadrature.
pub fn beta_inverse_moment(a: f64, b: f64, k: i32) -> f64 {
    let norm = tanh_sinh(|x, xc| x.powf(a - 1.0) * xc.powf(b - 1.0));
    let num = tanh_sinh(|x, xc| x.powf(a - 1.0 - k as f64) * xc.powf(b - 1.0));
    num / norm
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
