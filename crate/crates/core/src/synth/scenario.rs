//! Synthetic forecast–observation scenarios with known coefficients.
//!
//! Each day draws a spatially correlated log-normal intensity field from
//! random Fourier features. Each member multiplies it by its own smooth
//! log-normal perturbation field, subtracts a dry offset and truncates at
//! zero. Observations are sampled from the censored GEV that the true
//! coefficients assign to the local predictors of these members. With a
//! displacement, the forecast members handed out are read at a location
//! shifted by a random daily offset.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, DayField, ForecastTable, ObservationTable, Station};
use crate::error::{Error, Result};
use crate::fit::{link_params, CoefficientRecord, EmosCoefficients};
use crate::predictors::{local_predictors, Coords, CoordSystem, Grid, GridPoint, PredictorSet};

/// Coefficients used for the recovery scenario.
pub fn default_truth(day: NaiveDate) -> EmosCoefficients {
    EmosCoefficients {
        alpha0: 0.1,
        alpha1: 0.9,
        alpha2: -0.5,
        beta0: 0.2,
        beta1: 0.8,
        beta2: None,
        xi: 0.2,
        valid_day: day,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_days: usize,
    pub n_sites: usize,
    pub n_members: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub truth: EmosCoefficients,
    /// Spacing of the square site lattice.
    pub spacing_km: f64,
    /// Correlation length of the latent field.
    pub correlation_km: f64,
    /// Day-to-day spread of the log-intensity level.
    pub level_sd: f64,
    pub level_mean: f64,
    /// Spatial standard deviation of the log-intensity.
    pub field_sd: f64,
    /// Log-scale standard deviation of the member perturbations.
    pub member_noise_sd: f64,
    /// Correlation length of the member perturbations.
    pub member_correlation_km: f64,
    /// Subtracted from every member before truncation at zero.
    pub dry_offset: f64,
    /// RMS length of the daily forecast displacement; 0 leaves forecasts
    /// in place.
    pub displacement_km: f64,
    /// Multiplies the true scale coefficients.
    pub noise_scale: f64,
}

impl ScenarioSpec {
    pub fn new(n_days: usize, n_sites: usize, n_members: usize, seed: u64) -> Self {
        let start_date = NaiveDate::from_ymd_opt(2011, 5, 1).expect("valid date");
        Self {
            n_days,
            n_sites,
            n_members,
            seed,
            start_date,
            truth: default_truth(start_date),
            spacing_km: 5.0,
            correlation_km: 25.0,
            level_sd: 0.5,
            level_mean: 0.5,
            field_sd: 0.9,
            member_noise_sd: 0.5,
            member_correlation_km: 15.0,
            dry_offset: 0.5,
            displacement_km: 0.0,
            noise_scale: 1.0,
        }
    }

    /// Truth after applying `noise_scale`.
    pub fn effective_truth(&self) -> EmosCoefficients {
        EmosCoefficients {
            beta0: self.truth.beta0 * self.noise_scale,
            beta1: self.truth.beta1 * self.noise_scale,
            beta2: self.truth.beta2.map(|b| b * self.noise_scale),
            ..self.truth
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_days == 0 || self.n_sites == 0 || self.n_members == 0 {
            return Err(Error::Config("scenario needs at least one day, site and member".into()));
        }
        if !self.truth.is_admissible() {
            return Err(Error::Config(format!("inadmissible true coefficients {:?}", self.truth)));
        }
        if self.truth.beta2.is_some() {
            return Err(Error::Config("true coefficients must come from the local model (no beta2)".into()));
        }
        if !(self.noise_scale > 0.0) {
            return Err(Error::Config(format!("noise_scale must be > 0, got {}", self.noise_scale)));
        }
        let lengths = [self.spacing_km, self.correlation_km, self.member_correlation_km];
        if lengths.iter().any(|l| !(*l > 0.0)) || !(self.displacement_km >= 0.0) {
            return Err(Error::Config("scenario lengths must be positive".into()));
        }
        Ok(())
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.n_days as i64).map(|i| self.start_date + Duration::days(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub truth: EmosCoefficients,
    pub grid: Grid,
    pub stations: Vec<Station>,
    pub forecasts: ForecastTable,
    pub observations: ObservationTable,
    /// Local predictors of the undisplaced members, keyed by day and
    /// station.
    pub true_predictors: BTreeMap<(NaiveDate, String), PredictorSet>,
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Field = 1,
    Members = 2,
    Observation = 3,
}

/// Independent generator for one (purpose, day, index) cell; the index is
/// a site or a member.
fn substream(seed: u64, purpose: Purpose, day: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((day as u64) << 32) | index as u64);
    rng
}

const N_FEATURES: usize = 64;

/// Zero-mean, unit-variance Gaussian field with Gaussian covariance of
/// length `ell`.
struct FourierField {
    freq: Vec<(f64, f64)>,
    phase: Vec<f64>,
}

impl FourierField {
    fn draw(rng: &mut ChaCha8Rng, ell: f64) -> Self {
        let mut freq = Vec::with_capacity(N_FEATURES);
        let mut phase = Vec::with_capacity(N_FEATURES);
        for _ in 0..N_FEATURES {
            let wx: f64 = StandardNormal.sample(rng);
            let wy: f64 = StandardNormal.sample(rng);
            freq.push((wx / ell, wy / ell));
            phase.push(rng.random_range(0.0..2.0 * PI));
        }
        Self { freq, phase }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self
            .freq
            .iter()
            .zip(&self.phase)
            .map(|((wx, wy), p)| (wx * x + wy * y + p).cos())
            .sum();
        s * (2.0 / N_FEATURES as f64).sqrt()
    }
}

pub fn point_id(i: usize) -> String {
    format!("g{i:04}")
}

pub fn station_id(i: usize) -> String {
    format!("s{i:04}")
}

fn lattice(spec: &ScenarioSpec) -> Vec<Coords> {
    let side = (spec.n_sites as f64).sqrt().ceil() as usize;
    (0..spec.n_sites)
        .map(|i| Coords::new((i % side) as f64 * spec.spacing_km, (i / side) as f64 * spec.spacing_km))
        .collect()
}

struct DayDraw {
    forecasts: DayField,
    observations: Vec<(String, f64)>,
    predictors: Vec<(String, PredictorSet)>,
}

fn draw_day(spec: &ScenarioSpec, truth: &EmosCoefficients, sites: &[Coords], d: usize) -> Result<DayDraw> {
    let mut field_rng = substream(spec.seed, Purpose::Field, d, 0);
    let z: f64 = StandardNormal.sample(&mut field_rng);
    let level = spec.level_mean + spec.level_sd * z;
    let field = FourierField::draw(&mut field_rng, spec.correlation_km);
    let shift_sd = spec.displacement_km / 2f64.sqrt();
    let dx: f64 = StandardNormal.sample(&mut field_rng);
    let dy: f64 = StandardNormal.sample(&mut field_rng);
    let shift = (shift_sd * dx, shift_sd * dy);

    let perturbations: Vec<FourierField> = (0..spec.n_members)
        .map(|k| FourierField::draw(&mut substream(spec.seed, Purpose::Members, d, k), spec.member_correlation_km))
        .collect();
    let s = spec.member_noise_sd;
    let members_at = |c: Coords| -> Vec<f64> {
        let base = level + spec.field_sd * field.at(c.a, c.b) - 0.5 * s * s;
        perturbations
            .iter()
            .map(|p| ((base + s * p.at(c.a, c.b)).exp() - spec.dry_offset).max(0.0))
            .collect()
    };

    let mut out = DayDraw {
        forecasts: DayField::new(),
        observations: Vec::with_capacity(sites.len()),
        predictors: Vec::with_capacity(sites.len()),
    };
    for (i, &c) in sites.iter().enumerate() {
        let undisplaced = members_at(c);
        let forecast = if spec.displacement_km > 0.0 {
            members_at(Coords::new(c.a + shift.0, c.b + shift.1))
        } else {
            undisplaced.clone()
        };
        let predictors = local_predictors(&undisplaced, 0.0)?;
        let params = link_params(truth, &predictors)?;
        let u: f64 = substream(spec.seed, Purpose::Observation, d, i).random();
        out.forecasts.insert(point_id(i), forecast);
        out.observations.push((station_id(i), params.quantile(u)?));
        out.predictors.push((station_id(i), predictors));
    }
    Ok(out)
}

/// Generates the scenario. Days are drawn in parallel and every random
/// quantity comes from its own (purpose, day, index) stream, so the
/// result does not depend on thread count.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let truth = spec.effective_truth();
    let sites = lattice(spec);
    let days: Vec<NaiveDate> = spec.days().collect();
    let draws: Vec<DayDraw> = (0..days.len())
        .into_par_iter()
        .map(|d| draw_day(spec, &truth, &sites, d))
        .collect::<Result<_>>()?;

    let grid = Grid::new(
        CoordSystem::XyKm,
        sites
            .iter()
            .enumerate()
            .map(|(i, c)| GridPoint::new(point_id(i), *c, 1.0))
            .collect::<Result<_>>()?,
    );
    let stations = sites
        .iter()
        .enumerate()
        .map(|(i, c)| Station {
            station_id: station_id(i),
            coords: *c,
        })
        .collect();
    let mut forecasts = ForecastTable {
        n_members: spec.n_members,
        days: BTreeMap::new(),
    };
    let mut observations = ObservationTable::default();
    let mut true_predictors = BTreeMap::new();
    for (day, draw) in days.into_iter().zip(draws) {
        forecasts.days.insert(day, draw.forecasts);
        for (s, y) in draw.observations {
            observations.values.insert((day, s), y);
        }
        for (s, p) in draw.predictors {
            true_predictors.insert((day, s), p);
        }
    }
    Ok(Scenario {
        spec: spec.clone(),
        truth: truth.with_day(spec.start_date),
        grid,
        stations,
        forecasts,
        observations,
        true_predictors,
    })
}

/// Writes `forecasts.csv`, `observations.csv`, `stations.csv`, `grid.csv`
/// and `truth.csv`.
pub fn write_scenario(s: &Scenario, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    data::write_forecasts(&dir.join("forecasts.csv"), &s.forecasts)?;
    data::write_observations(&dir.join("observations.csv"), &s.observations)?;
    data::write_stations(&dir.join("stations.csv"), &s.stations)?;
    data::write_grid(&dir.join("grid.csv"), &s.grid)?;
    data::write_coefficients(
        &dir.join("truth.csv"),
        &[CoefficientRecord {
            coefficients: s.truth,
            objective_value: None,
            n_pairs: 0,
        }],
    )
}
