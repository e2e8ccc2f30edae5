//! Generalized extreme value distribution, its left-censored variant, and
//! the closed-form CRPS of the censored distribution.
//!
//! The censored distribution is parameterized by `(m, sigma, xi)` where `m`
//! is the mean of the uncensored GEV. The classical location `mu` is derived
//! on demand through [`mu_from_m`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma, regularized_lower_gamma, EULER_GAMMA};

/// Lower bound (exclusive) of the admissible shape range.
pub const XI_MIN: f64 = -0.278;
/// Upper bound (exclusive) of the admissible shape range.
pub const XI_MAX: f64 = 1.0;
/// Half-width of the shape band around zero where the CRPS is obtained by
/// linear interpolation between the closed forms at `-EPS` and `+EPS`.
pub const XI_INTERPOLATION_EPS: f64 = 0.002;

pub fn xi_admissible(xi: f64) -> bool {
    xi > XI_MIN && xi < XI_MAX
}

fn validate(sigma: f64, xi: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("GEV scale must be > 0, got {sigma}")));
    }
    if !xi_admissible(xi) {
        return Err(Error::domain(format!(
            "GEV shape must lie in ({XI_MIN}, {XI_MAX}), got {xi}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    mu: f64,
    sigma: f64,
    xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("GEV location must be finite, got {mu}")));
        }
        validate(sigma, xi)?;
        Ok(Self { mu, sigma, xi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `-ln G(y)`; `+inf` below the lower support bound, `0` above the upper.
    fn neg_log_cdf(&self, y: f64) -> f64 {
        reduced_variate(self.mu, self.sigma, self.xi, y)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        (-self.neg_log_cdf(y)).exp()
    }

    pub fn mean(&self) -> Result<f64> {
        gev_mean(self.mu, self.sigma, self.xi)
    }
}

/// `-ln G(y)` for a GEV with the given parameters.
fn reduced_variate(mu: f64, sigma: f64, xi: f64, y: f64) -> f64 {
    let z = (y - mu) / sigma;
    if xi == 0.0 {
        return (-z).exp();
    }
    let s = xi * z;
    if s <= -1.0 {
        return if xi < 0.0 { 0.0 } else { f64::INFINITY };
    }
    (-s.ln_1p() / xi).exp()
}

/// GEV cumulative distribution function `G(y)`.
pub fn gev_cdf(p: &GevParams, y: f64) -> f64 {
    p.cdf(y)
}

/// `(Γ(1-xi) - 1) / xi`, continuous through `xi = 0` where it equals the
/// Euler–Mascheroni constant.
fn mean_shift(xi: f64) -> f64 {
    if xi == 0.0 {
        return EULER_GAMMA;
    }
    if xi.abs() < 0.05 {
        // ln Γ(1-x) = γx + Σ_{k≥2} ζ(k) x^k / k
        const ZETA: [f64; 13] = [
            1.644_934_066_848_226_4,
            1.202_056_903_159_594_3,
            1.082_323_233_711_138_2,
            1.036_927_755_143_37,
            1.017_343_061_984_449_1,
            1.008_349_277_381_922_8,
            1.004_077_356_197_944_3,
            1.002_008_392_826_082_2,
            1.000_994_575_127_818_1,
            1.000_494_188_604_119_5,
            1.000_246_086_553_308,
            1.000_122_713_347_578_5,
            1.000_061_248_135_058_7,
        ];
        let mut log_gamma = EULER_GAMMA * xi;
        let mut power = xi;
        for (i, zeta) in ZETA.iter().enumerate() {
            power *= xi;
            log_gamma += zeta * power / (i + 2) as f64;
        }
        return log_gamma.exp_m1() / xi;
    }
    (gamma(1.0 - xi) - 1.0) / xi
}

/// Mean of the GEV, `mu + sigma (Γ(1-xi) - 1) / xi` (`mu + sigma γ` at
/// `xi = 0`). A zero scale is accepted as the degenerate limit.
pub fn gev_mean(mu: f64, sigma: f64, xi: f64) -> Result<f64> {
    if xi >= 1.0 || xi.is_nan() {
        return Err(Error::MeanUndefined(xi));
    }
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::domain(format!("GEV scale must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(mu);
    }
    Ok(mu + sigma * mean_shift(xi))
}

/// Inverse of [`gev_mean`] in the location parameter.
pub fn mu_from_m(m: f64, sigma: f64, xi: f64) -> Result<f64> {
    if xi >= 1.0 || xi.is_nan() {
        return Err(Error::domain(format!("mean-location requires xi < 1, got {xi}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("GEV scale must be > 0, got {sigma}")));
    }
    Ok(m - sigma * mean_shift(xi))
}

/// GEV left-censored at zero, parameterized by the uncensored mean `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredGevParams {
    m: f64,
    sigma: f64,
    xi: f64,
}

impl CensoredGevParams {
    pub fn new(m: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::domain(format!("mean-location must be finite, got {m}")));
        }
        validate(sigma, xi)?;
        Ok(Self { m, sigma, xi })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Classical GEV location `mu`.
    pub fn location(&self) -> f64 {
        self.m - self.sigma * mean_shift(self.xi)
    }

    /// The underlying uncensored GEV.
    pub fn uncensored(&self) -> GevParams {
        GevParams {
            mu: self.location(),
            sigma: self.sigma,
            xi: self.xi,
        }
    }

    /// Probability of exactly zero, `G(0)`.
    pub fn prob_zero(&self) -> f64 {
        self.uncensored().cdf(0.0)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        censored_cdf(self, y)
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        censored_quantile(self, q)
    }

    pub fn crps(&self, y: f64) -> Result<f64> {
        crps_censored_gev(self, y)
    }
}

pub fn censored_cdf(p: &CensoredGevParams, y: f64) -> f64 {
    if y < 0.0 {
        0.0
    } else {
        p.uncensored().cdf(y)
    }
}

/// Generalized inverse of [`censored_cdf`]: zero on the atom, otherwise the
/// GEV quantile.
pub fn censored_quantile(p: &CensoredGevParams, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let gev = p.uncensored();
    if q <= gev.cdf(0.0) {
        return Ok(0.0);
    }
    let w = -(-q.ln()).ln();
    let standardized = if p.xi == 0.0 {
        w
    } else {
        (p.xi * w).exp_m1() / p.xi
    };
    Ok((gev.mu + gev.sigma * standardized).max(0.0))
}

/// Continuous ranked probability score of the censored GEV at `y >= 0`.
///
/// Closed form for `|xi| >= XI_INTERPOLATION_EPS`; inside the band the
/// score is linearly interpolated in `xi` between the closed forms at the
/// band edges, holding `m` and `sigma` fixed.
pub fn crps_censored_gev(p: &CensoredGevParams, y: f64) -> Result<f64> {
    if p.xi.abs() < XI_INTERPOLATION_EPS {
        crps_band_interpolation(p, y)
    } else {
        crps_direct(p, y)
    }
}

fn check_observation(y: f64) -> Result<()> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(format!(
            "CRPS observation must be a finite value >= 0, got {y}"
        )));
    }
    Ok(())
}

/// The closed form evaluated at the given shape, with no interpolation.
/// Undefined at `xi = 0`.
pub fn crps_direct(p: &CensoredGevParams, y: f64) -> Result<f64> {
    check_observation(y)?;
    if p.xi == 0.0 {
        return Err(Error::domain("closed-form CRPS is undefined at xi = 0"));
    }
    Ok(crps_closed_form(p.m, p.sigma, p.xi, y)?.max(0.0))
}

/// Linear interpolation in `xi` between the closed forms at `-eps` and
/// `+eps`, evaluated at `p.xi` (meaningful for `|xi| <= eps`).
pub fn crps_band_interpolation(p: &CensoredGevParams, y: f64) -> Result<f64> {
    check_observation(y)?;
    let eps = XI_INTERPOLATION_EPS;
    let lower = crps_closed_form(p.m, p.sigma, -eps, y)?;
    let upper = crps_closed_form(p.m, p.sigma, eps, y)?;
    let value = (eps - p.xi) / (2.0 * eps) * lower + (eps + p.xi) / (2.0 * eps) * upper;
    Ok(value.max(0.0))
}

/// Closed-form CRPS for `xi != 0`, before clamping round-off below zero.
pub(crate) fn crps_closed_form(m: f64, sigma: f64, xi: f64, y: f64) -> Result<f64> {
    debug_assert!(xi != 0.0);
    let mu = m - sigma * mean_shift(xi);
    let shape = 1.0 - xi;
    let complete = gamma(shape);

    // -ln p_y and -ln p_0; infinite when the point is below the lower bound.
    let t_y = reduced_variate(mu, sigma, xi, y);
    let t_0 = reduced_variate(mu, sigma, xi, 0.0);
    let p_y = (-t_y).exp();
    let p_0 = (-t_0).exp();

    let lower_y = if t_y.is_infinite() {
        complete
    } else {
        complete * regularized_lower_gamma(shape, t_y)?
    };
    let lower_0 = if t_0.is_infinite() {
        complete
    } else {
        complete * regularized_lower_gamma(shape, 2.0 * t_0)?
    };

    let ratio = sigma / xi;
    Ok((mu - y) * (1.0 - 2.0 * p_y) + mu * p_0 * p_0
        - 2.0 * ratio * (1.0 - p_y - lower_y)
        + ratio * (1.0 - p_0 * p_0 - 2f64.powf(xi) * lower_0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn censored(m: f64, sigma: f64, xi: f64) -> CensoredGevParams {
        CensoredGevParams::new(m, sigma, xi).unwrap()
    }

    #[test]
    fn gumbel_cdf_at_location() {
        let p = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert!((gev_cdf(&p, 0.0) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn cdf_support_truncation() {
        let p = GevParams::new(0.0, 1.0, 0.5).unwrap();
        assert_eq!(gev_cdf(&p, -2.0), 0.0);
        assert_eq!(gev_cdf(&p, -3.0), 0.0);
        let q = GevParams::new(0.0, 1.0, -0.2).unwrap();
        assert_eq!(gev_cdf(&q, 5.0), 1.0);
        assert_eq!(gev_cdf(&q, 7.0), 1.0);
    }

    #[test]
    fn cdf_matches_extended_precision_evaluation() {
        // (μ=1, σ=2, ξ=0.2), y=3: G = exp(-(1.2)^(-5)), evaluated with mpmath
        // at 30 digits.
        let p = GevParams::new(1.0, 2.0, 0.2).unwrap();
        let expected = 0.669_062_652_667_818_8;
        assert!((gev_cdf(&p, 3.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(GevParams::new(0.0, 0.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(GevParams::new(0.0, -1.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(GevParams::new(0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(GevParams::new(0.0, 1.0, -0.278), Err(Error::Domain(_))));
        assert!(matches!(CensoredGevParams::new(0.0, 1.0, -0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn mean_values() {
        assert!((gev_mean(0.0, 1.0, 0.0).unwrap() - 0.577_216).abs() < 1e-6);
        assert_eq!(gev_mean(5.0, 0.0, 0.3).unwrap(), 5.0);
        // 1 + 4(√π - 1), Γ(1/2) = √π; 30-digit value 4.08981540362206410919
        assert!((gev_mean(1.0, 2.0, 0.5).unwrap() - 4.089_815_403_622_064).abs() < 1e-13);
        assert!(matches!(gev_mean(0.0, 1.0, 1.0), Err(Error::MeanUndefined(_))));
        assert!(matches!(gev_mean(0.0, 1.0, 1.5), Err(Error::MeanUndefined(_))));
    }

    #[test]
    fn mean_shift_is_continuous_at_series_switch() {
        for xi in [0.05, -0.05] {
            let below = mean_shift(xi * (1.0 - 1e-12));
            let above = mean_shift(xi * (1.0 + 1e-12));
            assert!((below - above).abs() < 1e-12);
        }
        assert!((mean_shift(1e-9) - EULER_GAMMA).abs() < 1e-8);
        // (Γ(0.999) - 1) / 0.001 at 30 digits
        assert!((mean_shift(1e-3) - 0.578_205_629_358_647_99).abs() < 1e-15);
    }

    #[test]
    fn mu_from_m_examples() {
        assert!(mu_from_m(0.577_216, 1.0, 0.0).unwrap().abs() < 1e-6);
        let m = 4.089_815_403_622_064;
        assert!((mu_from_m(m, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-13);
        assert!(mu_from_m(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn censored_cdf_examples() {
        let p = censored(0.5, 1.0, 0.2);
        assert_eq!(censored_cdf(&p, -1.0), 0.0);
        let gev = GevParams::new(mu_from_m(0.5, 1.0, 0.2).unwrap(), 1.0, 0.2).unwrap();
        assert_eq!(censored_cdf(&p, 0.0), gev_cdf(&gev, 0.0));
        assert_eq!(p.prob_zero(), gev_cdf(&gev, 0.0));

        let wet = censored(50.0, 1.0, 0.0);
        assert!(censored_cdf(&wet, 0.0) < 1e-12);
    }

    #[test]
    fn quantile_examples() {
        let p = censored(0.5, 1.0, 0.2);
        let atom = p.prob_zero();
        assert_eq!(censored_quantile(&p, atom * 0.5).unwrap(), 0.0);
        assert_eq!(censored_quantile(&p, atom).unwrap(), 0.0);

        let gumbel = censored(EULER_GAMMA, 1.0, 0.0);
        let y = censored_quantile(&gumbel, (-1.0f64).exp()).unwrap();
        assert!(y.abs() < 1e-12, "{y}");

        assert!(censored_quantile(&p, 0.0).is_err());
        assert!(censored_quantile(&p, 1.0).is_err());
        assert!(censored_quantile(&p, f64::NAN).is_err());
    }

    #[test]
    fn crps_rejects_negative_observation() {
        let p = censored(1.0, 1.0, 0.2);
        assert!(matches!(crps_censored_gev(&p, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn crps_near_point_mass_is_tiny() {
        let p = censored(2.0, 1e-9, 0.0);
        assert!(crps_censored_gev(&p, 2.0).unwrap() < 1e-6);
    }

    #[test]
    fn interpolation_endpoints_are_exact() {
        for &(m, sigma, y) in &[(1.0, 1.0, 2.0), (0.2, 3.0, 0.0), (5.0, 0.5, 4.0)] {
            for xi in [XI_INTERPOLATION_EPS, -XI_INTERPOLATION_EPS] {
                let p = censored(m, sigma, xi);
                let direct = crps_direct(&p, y).unwrap();
                assert_eq!(crps_band_interpolation(&p, y).unwrap(), direct);
                assert_eq!(crps_censored_gev(&p, y).unwrap(), direct);
            }
        }
    }

    #[test]
    fn crps_is_finite_when_support_excludes_zero_and_observation() {
        // ξ > 0 with a positive lower support bound: p_0 = p_y = 0
        let p = censored(30.0, 1.0, 0.5);
        assert!(p.location() - p.sigma() / p.xi() > 2.0);
        let v = crps_censored_gev(&p, 1.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    proptest! {
        #[test]
        fn mean_and_mu_from_m_are_inverse(
            m in -5.0f64..30.0, sigma in 0.05f64..20.0, xi in -0.277f64..0.99
        ) {
            let mu = mu_from_m(m, sigma, xi).unwrap();
            let back = gev_mean(mu, sigma, xi).unwrap();
            let scale = m.abs().max(sigma * mean_shift(xi).abs()).max(1e-300);
            prop_assert!((back - m).abs() <= 1e-12 * scale);
        }

        #[test]
        fn quantile_inverts_cdf(
            m in -5.0f64..30.0, sigma in 0.05f64..20.0, xi in -0.277f64..0.9, q in 0.001f64..0.999
        ) {
            let p = censored(m, sigma, xi);
            let y = censored_quantile(&p, q).unwrap();
            prop_assert!(y >= 0.0);
            let f = censored_cdf(&p, y);
            if q > p.prob_zero() {
                prop_assert!((f - q).abs() < 1e-10, "F(Q(q))={} q={}", f, q);
            } else {
                prop_assert!(f >= q);
            }
        }

        #[test]
        fn censored_cdf_is_monotone(
            m in -5.0f64..30.0, sigma in 0.05f64..20.0, xi in -0.277f64..0.99,
            a in -10.0f64..100.0, b in -10.0f64..100.0
        ) {
            let p = censored(m, sigma, xi);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(censored_cdf(&p, lo) <= censored_cdf(&p, hi));
        }
    }
}
