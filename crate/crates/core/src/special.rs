//! Gamma-function helpers and the lower incomplete gamma function.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Lower incomplete gamma function `∫₀ˣ t^(a-1) e^(-t) dt`.
///
/// `x = +inf` is accepted and yields `Γ(a)`.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(gamma(a) * regularized_lower_gamma(a, x)?)
}

/// Regularized lower incomplete gamma `P(a, x)`, the CDF of a unit-rate
/// gamma(a) variable at `x`.
///
/// Power series for `x < a + 1`, Lentz continued fraction for the
/// complement otherwise.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!(
            "incomplete gamma requires a > 0, got {a}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!(
            "incomplete gamma requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        Ok((series(a, x) + log_prefactor).exp().min(1.0))
    } else {
        let q = (continued_fraction(a, x) + log_prefactor).exp();
        Ok((1.0 - q).clamp(0.0, 1.0))
    }
}

/// Log of `Σ x^n / (a (a+1) ... (a+n))`.
fn series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum.ln()
}

/// Log of the continued fraction for `Γ(a, x) e^x x^-a`.
fn continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h.ln()
}
