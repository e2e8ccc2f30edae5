//! Slow, literal evaluations used to cross-check the fast code paths.
//!
//! Nothing here calls into the closed-form CRPS or the sorted-sum Gini
//! computation.

use crate::gev::CensoredGevParams;
use crate::synth::quadrature::integrate;

const PANEL_TOL: f64 = 1e-11;
const TAIL_EXCEEDANCE: f64 = 1e-12;

/// Numerically integrates `∫ (F(t) - 1{t >= y})² dt` for the censored GEV.
///
/// The censored CDF vanishes below zero, so the integral runs over
/// `[0, y]` for `F²` and over `[y, T]` for `(1 - F)²`, where `T` is the
/// upper support bound or the point with `1 - G(T) = 1e-12`.
pub fn crps_quadrature_oracle(p: &CensoredGevParams, y: f64) -> f64 {
    let mu = p.location();
    let sigma = p.sigma();
    let xi = p.xi();

    // -ln G(t), written out independently of the gev module.
    let tau = move |t: f64| -> f64 {
        let z = (t - mu) / sigma;
        if xi == 0.0 {
            (-z).exp()
        } else {
            let base = 1.0 + xi * z;
            if base <= 0.0 {
                if xi < 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                base.powf(-1.0 / xi)
            }
        }
    };
    let below = |t: f64| {
        let g = (-tau(t)).exp();
        g * g
    };
    let above = |t: f64| {
        let survival = -(-tau(t)).exp_m1();
        survival * survival
    };

    // support bound μ - σ/ξ: lower for ξ > 0, upper for ξ < 0
    let bound = if xi != 0.0 { Some(mu - sigma / xi) } else { None };

    let mut lower_breaks = vec![0.0];
    if let Some(b) = bound {
        if b > 0.0 && b < y {
            lower_breaks.push(b);
        }
    }
    lower_breaks.push(y);
    lower_breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for w in lower_breaks.windows(2) {
        total += panelled(&below, w[0], w[1], sigma);
    }

    let end = match bound {
        Some(b) if xi < 0.0 => b,
        _ => {
            let z = if xi == 0.0 {
                -TAIL_EXCEEDANCE.ln()
            } else {
                (TAIL_EXCEEDANCE.powf(-xi) - 1.0) / xi
            };
            mu + sigma * z
        }
    };
    if end > y {
        let mut start = y;
        if let Some(b) = bound {
            if xi > 0.0 && b > y {
                // F = 0 on [y, b]: integrand is exactly 1 there.
                total += b - y;
                start = b;
            }
        }
        // geometrically widening panels keep the heavy tail cheap
        let mut width = sigma;
        let mut a = start;
        while a < end {
            let b = (a + width).min(end);
            total += integrate(&above, a, b, PANEL_TOL);
            a = b;
            width *= 2.0;
        }
    }
    total
}

/// Splits `[a, b]` into pieces no wider than `scale` (at most 256 pieces).
fn panelled<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, scale: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let pieces = ((b - a) / scale).ceil().clamp(1.0, 256.0) as usize;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == pieces { b } else { lo + h };
            integrate(f, lo, hi, PANEL_TOL)
        })
        .sum()
}

/// Weighted mean difference by the literal double sum
/// `Σ_i Σ_j w_i w_j |v_i - v_j|`. Equal weights `1/n` when `weights` is
/// `None`.
pub fn bruteforce_md(values: &[f64], weights: Option<&[f64]>) -> f64 {
    let n = values.len();
    let uniform = vec![1.0 / n as f64; n];
    let w = weights.unwrap_or(&uniform);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += w[i] * w[j] * (values[i] - values[j]).abs();
        }
    }
    total
}

/// Neighborhood statistics evaluated as nested sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceStats {
    pub mean: f64,
    pub zero_frac: f64,
    pub md: f64,
    pub nbr_md: f64,
}

/// `fields[x][k]` is member `k` at neighborhood point `x`; `weights[x]` the
/// normalized weight of that point.
pub fn bruteforce_stats_oracle(
    fields: &[Vec<f64>],
    weights: &[f64],
    trace_threshold: f64,
) -> BruteForceStats {
    let n = fields.len();
    let k_count = fields[0].len();
    let kf = k_count as f64;

    let smoothed: Vec<f64> = (0..k_count)
        .map(|k| (0..n).map(|x| weights[x] * fields[x][k]).sum())
        .collect();
    let mean = smoothed.iter().sum::<f64>() / kf;

    let mut zero_frac = 0.0;
    for k in 0..k_count {
        for x in 0..n {
            if fields[x][k] <= trace_threshold {
                zero_frac += weights[x];
            }
        }
    }
    zero_frac /= kf;

    let mut md = 0.0;
    for a in &smoothed {
        for b in &smoothed {
            md += (a - b).abs();
        }
    }
    md /= kf * kf;

    let mut nbr_md = 0.0;
    for k in 0..k_count {
        for x in 0..n {
            for x2 in 0..n {
                nbr_md += weights[x] * weights[x2] * (fields[x][k] - fields[x2][k]).abs();
            }
        }
    }
    nbr_md /= kf;

    BruteForceStats {
        mean,
        zero_frac,
        md,
        nbr_md,
    }
}
