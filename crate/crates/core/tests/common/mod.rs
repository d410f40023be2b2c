#![allow(dead_code)]

use statrs::function::erf::erfc;

pub fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn log_normal_pdf(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - x * x / (2.0 * var)
}

/// Median of the posterior `P0 delta_0 + (1 - P0) N(m, s^2)`, with the mixture
/// weight taken from the marginal densities and the median found by bisection
/// on the posterior CDF.
pub fn oracle_median(b: f64, gamma_sq: f64, tau_sq: f64, pi: f64) -> f64 {
    if pi == 0.0 {
        return 0.0;
    }
    let slab = pi.ln() + log_normal_pdf(b, tau_sq + gamma_sq);
    let spike = (1.0 - pi).ln() + log_normal_pdf(b, gamma_sq);
    let p0 = 1.0 / (1.0 + (slab - spike).exp());
    let m = tau_sq * b / (tau_sq + gamma_sq);
    let s = (tau_sq * gamma_sq / (tau_sq + gamma_sq)).sqrt();
    let cont = |t: f64| (1.0 - p0) * phi((t - m) / s);
    let below_zero = cont(0.0);
    if below_zero < 0.5 && below_zero + p0 >= 0.5 {
        return 0.0;
    }
    let (offset, target) = if below_zero >= 0.5 {
        (0.0, 0.5)
    } else {
        (p0, 0.5)
    };
    let (mut lo, mut hi) = if below_zero >= 0.5 {
        (m - 60.0 * s, 0.0)
    } else {
        (0.0, m + 60.0 * s)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cont(mid) + offset < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard Donoho-Johnstone HeaviSine before rescaling.
pub fn heavisine_raw(x: f64) -> f64 {
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    4.0 * (4.0 * std::f64::consts::PI * x).sin() - sgn(x - 0.3) - sgn(0.72 - x)
}
