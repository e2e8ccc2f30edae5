//! Minimum-CRPS fitting of the link coefficients over rolling training
//! windows, with early stopping of the quasi-Newton optimizer.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{crps_censored_gev, xi_admissible, CensoredGevParams};
use crate::optim::{minimize_from, BfgsConfig, InverseHessian};
use crate::predictors::PredictorSet;

/// Link coefficients for one verification day.
///
/// `m = alpha0 + alpha1 * mean + alpha2 * zero_frac` and
/// `sigma = beta0 + beta1 * md (+ beta2 * nbr_md)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmosCoefficients {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: Option<f64>,
    pub xi: f64,
    pub valid_day: NaiveDate,
}

impl EmosCoefficients {
    /// Starting values for the first fitted day. `beta2` starts at zero,
    /// i.e. from the nested local model.
    pub fn initial(valid_day: NaiveDate, neighborhood: bool) -> Self {
        Self {
            alpha0: 0.0,
            alpha1: 1.0,
            alpha2: -1.0,
            beta0: 0.1,
            beta1: 1.0,
            beta2: neighborhood.then_some(0.0),
            xi: 0.0,
            valid_day,
        }
    }

    pub fn is_admissible(&self) -> bool {
        let finite = self.to_vec().iter().all(|v| v.is_finite());
        finite
            && self.beta0 > 0.0
            && self.beta1 >= 0.0
            && self.beta2.is_none_or(|b| b >= 0.0)
            && xi_admissible(self.xi)
    }

    /// `[alpha0, alpha1, alpha2, beta0, beta1, (beta2,) xi]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.alpha0, self.alpha1, self.alpha2, self.beta0, self.beta1];
        if let Some(b) = self.beta2 {
            v.push(b);
        }
        v.push(self.xi);
        v
    }

    pub fn from_vec(theta: &[f64], valid_day: NaiveDate) -> Result<Self> {
        let (beta2, xi) = match theta.len() {
            6 => (None, theta[5]),
            7 => (Some(theta[5]), theta[6]),
            n => {
                return Err(Error::Config(format!(
                    "coefficient vector has {n} entries, expected 6 or 7"
                )))
            }
        };
        Ok(Self {
            alpha0: theta[0],
            alpha1: theta[1],
            alpha2: theta[2],
            beta0: theta[3],
            beta1: theta[4],
            beta2,
            xi,
            valid_day,
        })
    }

    pub fn with_day(mut self, valid_day: NaiveDate) -> Self {
        self.valid_day = valid_day;
        self
    }
}

fn admissible_vec(theta: &[f64]) -> bool {
    let n = theta.len();
    theta.iter().all(|v| v.is_finite())
        && theta[3] > 0.0
        && theta[4] >= 0.0
        && (n == 6 || theta[5] >= 0.0)
        && xi_admissible(theta[n - 1])
}

/// Censored GEV parameters implied by the coefficients and predictors.
pub fn link_params(c: &EmosCoefficients, p: &PredictorSet) -> Result<CensoredGevParams> {
    let m = c.alpha0 + c.alpha1 * p.mean + c.alpha2 * p.zero_frac;
    let mut sigma = c.beta0 + c.beta1 * p.md;
    if let Some(beta2) = c.beta2 {
        let nbr_md = p.nbr_md.ok_or_else(|| {
            Error::Config("coefficients carry beta2 but predictors have no neighborhood MD".into())
        })?;
        sigma += beta2 * nbr_md;
    }
    CensoredGevParams::new(m, sigma, c.xi)
}

/// Public prediction entry point; rejects inadmissible coefficients.
pub fn predict(c: &EmosCoefficients, p: &PredictorSet) -> Result<CensoredGevParams> {
    if !c.is_admissible() {
        return Err(Error::Config(format!("inadmissible coefficients {c:?}")));
    }
    link_params(c, p)
}

/// One forecast–observation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub day: NaiveDate,
    pub site: Arc<str>,
    pub predictors: PredictorSet,
    pub observation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub verification_day: NaiveDate,
    /// Calendar days covered, oldest first.
    pub days: Vec<NaiveDate>,
    pub pairs: Vec<TrainingPair>,
}

impl TrainingWindow {
    /// Number of days in the window that contribute at least one pair.
    pub fn days_with_data(&self) -> usize {
        let mut days: Vec<NaiveDate> = self.pairs.iter().map(|p| p.day).collect();
        days.sort();
        days.dedup();
        days.len()
    }
}

/// Builds the window of the `window_days` calendar days preceding
/// `verification_day` from pairs grouped by day.
pub fn training_window(
    pairs_by_day: &BTreeMap<NaiveDate, Vec<TrainingPair>>,
    verification_day: NaiveDate,
    window_days: usize,
) -> TrainingWindow {
    let first = verification_day - Duration::days(window_days as i64);
    let days: Vec<NaiveDate> = (0..window_days as i64).map(|i| first + Duration::days(i)).collect();
    let pairs = pairs_by_day
        .range(first..verification_day)
        .flat_map(|(_, v)| v.iter().cloned())
        .collect();
    TrainingWindow {
        verification_day,
        days,
        pairs,
    }
}

/// Empirical mean CRPS over a window, with the penalty rule for
/// inadmissible coefficients.
pub struct EmpiricalScore<'a> {
    window: &'a TrainingWindow,
    last_admissible: Cell<f64>,
    crps_evaluations: Cell<usize>,
}

impl<'a> EmpiricalScore<'a> {
    pub fn new(window: &'a TrainingWindow, last_admissible: f64) -> Result<Self> {
        if window.pairs.is_empty() {
            return Err(Error::Training(format!(
                "empty training window for {}",
                window.verification_day
            )));
        }
        Ok(Self {
            window,
            last_admissible: Cell::new(last_admissible),
            crps_evaluations: Cell::new(0),
        })
    }

    pub fn last_admissible(&self) -> f64 {
        self.last_admissible.get()
    }

    /// Number of per-pair CRPS evaluations performed so far.
    pub fn crps_evaluations(&self) -> usize {
        self.crps_evaluations.get()
    }

    /// Mean CRPS, or twice the last admissible value when `theta` violates
    /// the coefficient constraints.
    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        if !admissible_vec(theta) {
            return 2.0 * self.last_admissible.get();
        }
        let c = match EmosCoefficients::from_vec(theta, self.window.verification_day) {
            Ok(c) => c,
            Err(_) => return 2.0 * self.last_admissible.get(),
        };
        let scores: Vec<f64> = self
            .window
            .pairs
            .par_iter()
            .map(|pair| {
                link_params(&c, &pair.predictors)
                    .and_then(|p| crps_censored_gev(&p, pair.observation))
                    .unwrap_or(f64::NAN)
            })
            .collect();
        self.crps_evaluations
            .set(self.crps_evaluations.get() + scores.len());
        // fixed-order reduction keeps results bit-identical across runs
        let value = scores.iter().sum::<f64>() / scores.len() as f64;
        if value.is_finite() {
            self.last_admissible.set(value);
        }
        value
    }
}

/// Mean CRPS of `c` over the window; `2 * last_admissible` if `c` violates
/// `beta0 > 0`, `beta1 >= 0`, `beta2 >= 0` or the shape range.
pub fn objective(c: &EmosCoefficients, w: &TrainingWindow, last_admissible: f64) -> Result<f64> {
    Ok(EmpiricalScore::new(w, last_admissible)?.evaluate(&c.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub window_days: usize,
    pub first_day_iterations: usize,
    pub daily_iterations: usize,
    pub min_window_days: usize,
    /// Start each day's optimizer from the previous day's inverse-Hessian
    /// approximation instead of the identity.
    pub carry_inverse_hessian: bool,
    #[serde(skip)]
    pub optimizer: BfgsConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            window_days: 30,
            first_day_iterations: 10,
            daily_iterations: 1,
            min_window_days: 10,
            carry_inverse_hessian: true,
            optimizer: BfgsConfig::default(),
        }
    }
}

/// Result of fitting one verification day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayFit {
    pub coefficients: EmosCoefficients,
    /// Objective at the returned coefficients.
    pub objective_value: f64,
    pub start_value: f64,
    pub iterations: usize,
}

/// Runs the early-stopped optimizer from `prev` on one window: the
/// configured first-day iteration count when `is_first_day`, the daily
/// count otherwise.
pub fn fit_day(prev: &EmosCoefficients, w: &TrainingWindow, is_first_day: bool, config: &FitConfig) -> Result<DayFit> {
    fit_day_from(prev, w, is_first_day, config, None).map(|(fit, _)| fit)
}

/// [`fit_day`] with an optional inverse-Hessian approximation to start
/// from; returns the updated approximation.
pub fn fit_day_from(
    prev: &EmosCoefficients,
    w: &TrainingWindow,
    is_first_day: bool,
    config: &FitConfig,
    state: Option<&InverseHessian>,
) -> Result<(DayFit, InverseHessian)> {
    if !prev.is_admissible() {
        return Err(Error::Config(format!("starting coefficients are inadmissible: {prev:?}")));
    }
    let iterations = if is_first_day {
        config.first_day_iterations
    } else {
        config.daily_iterations
    };
    let start = prev.to_vec();
    // last admissible value starts at the objective of the (admissible) start
    let score = EmpiricalScore::new(w, f64::NAN)?;
    let start_value = score.evaluate(&start);
    if !start_value.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let (result, h) = minimize_from(|theta| score.evaluate(theta), admissible_vec, &start, iterations, &config.optimizer, state)?;
    let fit = DayFit {
        coefficients: EmosCoefficients::from_vec(&result.x, w.verification_day)?,
        objective_value: result.value,
        start_value,
        iterations: result.iterations,
    };
    Ok((fit, h))
}

/// One row of the coefficient time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientRecord {
    pub coefficients: EmosCoefficients,
    /// `None` when the window was too short and the previous coefficients
    /// were carried forward.
    pub objective_value: Option<f64>,
    pub n_pairs: usize,
}

/// Chains [`fit_day`] over chronologically ordered windows.
///
/// Windows with fewer than `min_window_days` days of data carry the
/// previous coefficients forward. The first window that is fitted uses the
/// first-day iteration count. With `carry_inverse_hessian`, the
/// optimizer's curvature estimate is handed from one fitted day to the
/// next.
pub fn rolling_fit<I>(windows: I, start: EmosCoefficients, config: &FitConfig) -> Result<Vec<CoefficientRecord>>
where
    I: IntoIterator<Item = TrainingWindow>,
{
    let mut prev = start;
    let mut state: Option<InverseHessian> = None;
    let mut fitted_any = false;
    let mut last_day: Option<NaiveDate> = None;
    let mut records = Vec::new();
    for window in windows {
        let day = window.verification_day;
        if let Some(last) = last_day {
            if day <= last {
                return Err(Error::Training(format!(
                    "windows out of order: {day} follows {last}"
                )));
            }
            if day - last > Duration::days(1) {
                log::warn!("gap in verification days between {last} and {day}; fitting continues");
            }
        }
        last_day = Some(day);

        if window.pairs.is_empty() || window.days_with_data() < config.min_window_days {
            prev = prev.with_day(day);
            records.push(CoefficientRecord {
                coefficients: prev,
                objective_value: None,
                n_pairs: window.pairs.len(),
            });
            continue;
        }
        let carried = if config.carry_inverse_hessian { state.as_ref() } else { None };
        let (fit, h) = fit_day_from(&prev, &window, !fitted_any, config, carried)?;
        state = Some(h);
        fitted_any = true;
        prev = fit.coefficients;
        records.push(CoefficientRecord {
            coefficients: fit.coefficients,
            objective_value: Some(fit.objective_value),
            n_pairs: window.pairs.len(),
        });
    }
    Ok(records)
}
