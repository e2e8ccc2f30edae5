//! Fit, predict and verify over loaded tables, plus the file-level
//! commands behind the CLI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::{self, Association, ForecastTable, ObservationTable, Prediction};
use crate::error::{Error, Result};
use crate::fit::{predict as predict_params, rolling_fit, training_window, CoefficientRecord, EmosCoefficients, TrainingPair};
use crate::predictors::{local_predictors, neighborhood_predictors, neighborhood_weights, Grid, NeighborhoodWeights, PredictorSet};
use crate::verify::{score_pair, verify, Reference, ReliabilityDiagram, Verification};

/// Predictors for every associated station on every forecast day.
pub type StationPredictors = BTreeMap<NaiveDate, Vec<(Arc<str>, PredictorSet)>>;

pub fn station_predictors(
    forecasts: &ForecastTable,
    grid: &Grid,
    associations: &[Association],
    config: &RunConfig,
) -> Result<StationPredictors> {
    let mut points: Vec<&str> = associations.iter().map(|a| a.point_id.as_str()).collect();
    points.sort();
    points.dedup();
    let weights: BTreeMap<&str, Option<NeighborhoodWeights>> = points
        .iter()
        .map(|&id| {
            let center = grid
                .get(id)
                .ok_or_else(|| Error::data(format!("gridpoint {id} is not in the grid")))?;
            let w = if config.uses_neighborhood() {
                Some(neighborhood_weights(grid, center, config.neighborhood_radius_km)?)
            } else {
                None
            };
            Ok((id, w))
        })
        .collect::<Result<_>>()?;

    forecasts
        .days
        .par_iter()
        .map(|(day, field)| {
            let per_point: BTreeMap<&str, PredictorSet> = weights
                .iter()
                .map(|(&id, w)| {
                    let p = match w {
                        Some(w) => neighborhood_predictors(field, w, config.use_climo, config.trace_threshold),
                        None => {
                            let members = field
                                .get(id)
                                .ok_or_else(|| Error::data(format!("no forecast for gridpoint {id} on {day}")))?;
                            local_predictors(members, config.trace_threshold)
                        }
                    };
                    p.map(|p| (id, p)).map_err(|e| Error::data(format!("{day}, gridpoint {id}: {e}")))
                })
                .collect::<Result<_>>()?;
            let rows = associations
                .iter()
                .map(|a| (Arc::from(a.station_id.as_str()), per_point[a.point_id.as_str()]))
                .collect();
            Ok((*day, rows))
        })
        .collect()
}

/// Training pairs grouped by day; stations without an observation on a
/// day contribute nothing for that day.
pub fn training_pairs(predictors: &StationPredictors, observations: &ObservationTable) -> BTreeMap<NaiveDate, Vec<TrainingPair>> {
    predictors
        .iter()
        .map(|(day, rows)| {
            let pairs = rows
                .iter()
                .filter_map(|(site, p)| {
                    observations.get(*day, site).map(|y| TrainingPair {
                        day: *day,
                        site: site.clone(),
                        predictors: *p,
                        observation: y,
                    })
                })
                .collect();
            (*day, pairs)
        })
        .collect()
}

/// One coefficient record for every forecast day, fitted on the preceding
/// `window_days` calendar days.
pub fn fit_series(predictors: &StationPredictors, observations: &ObservationTable, config: &RunConfig) -> Result<Vec<CoefficientRecord>> {
    let Some(first) = predictors.keys().next() else {
        return Ok(Vec::new());
    };
    let by_day = training_pairs(predictors, observations);
    let windows = predictors
        .keys()
        .map(|&d| training_window(&by_day, d, config.window_days));
    rolling_fit(windows, EmosCoefficients::initial(*first, config.uses_neighborhood()), &config.fit_config())
}

/// Predictive distributions for every (day, station) with coefficients
/// for that day.
pub fn predict_series(predictors: &StationPredictors, coefficients: &[CoefficientRecord], config: &RunConfig) -> Result<Vec<Prediction>> {
    let by_day: BTreeMap<NaiveDate, &EmosCoefficients> =
        coefficients.iter().map(|r| (r.coefficients.valid_day, &r.coefficients)).collect();
    let mut out = Vec::new();
    for (day, rows) in predictors {
        let Some(c) = by_day.get(day) else {
            log::warn!("no coefficients for {day}; skipping its predictions");
            continue;
        };
        if c.beta2.is_none() && config.uses_neighborhood() {
            return Err(Error::Config(format!(
                "coefficients for {day} come from the local model but neighborhood_radius_km = {}",
                config.neighborhood_radius_km
            )));
        }
        let mut day_rows: Vec<Prediction> = rows
            .iter()
            .map(|(site, p)| {
                Ok(Prediction {
                    valid_time: *day,
                    station_id: site.to_string(),
                    params: predict_params(c, p)?,
                })
            })
            .collect::<Result<_>>()?;
        day_rows.sort_by(|a, b| a.station_id.cmp(&b.station_id));
        out.extend(day_rows);
    }
    Ok(out)
}

/// Scores `predictions` against `observations`. The reference is the raw
/// ensemble at each station's gridpoint unless parametric reference
/// predictions are given.
pub fn verify_series(
    predictions: &[Prediction],
    observations: &ObservationTable,
    forecasts: &ForecastTable,
    associations: &[Association],
    reference: Option<&[Prediction]>,
    config: &RunConfig,
) -> Result<Verification> {
    let point_of: BTreeMap<&str, &str> = associations
        .iter()
        .map(|a| (a.station_id.as_str(), a.point_id.as_str()))
        .collect();
    let reference_of: Option<BTreeMap<(NaiveDate, &str), &Prediction>> =
        reference.map(|r| r.iter().map(|p| ((p.valid_time, p.station_id.as_str()), p)).collect());

    let scored = predictions
        .par_iter()
        .filter_map(|pred| {
            let y = observations.get(pred.valid_time, &pred.station_id)?;
            let site: Arc<str> = Arc::from(pred.station_id.as_str());
            let result = match &reference_of {
                Some(map) => map
                    .get(&(pred.valid_time, pred.station_id.as_str()))
                    .ok_or_else(|| Error::data(format!("no reference prediction for ({}, {})", pred.valid_time, pred.station_id)))
                    .and_then(|r| score_pair(pred.valid_time, site, &pred.params, Reference::Parametric(&r.params), y, &config.thresholds)),
                None => point_of
                    .get(pred.station_id.as_str())
                    .and_then(|point| forecasts.members(pred.valid_time, point))
                    .ok_or_else(|| Error::data(format!("no raw ensemble for ({}, {})", pred.valid_time, pred.station_id)))
                    .and_then(|m| score_pair(pred.valid_time, site, &pred.params, Reference::Ensemble(m), y, &config.thresholds)),
            };
            Some(result)
        })
        .collect::<Result<Vec<_>>>()?;
    let label = if reference.is_some() { "predictions" } else { "raw ensemble" };
    verify(&scored, &config.thresholds, label, &config.bootstrap_config())
}

/// Input files shared by the subcommands.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub forecasts: PathBuf,
    pub stations: PathBuf,
    pub grid: PathBuf,
}

impl Inputs {
    /// `forecasts.csv`, `stations.csv` and `grid.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            forecasts: dir.join("forecasts.csv"),
            stations: dir.join("stations.csv"),
            grid: dir.join("grid.csv"),
        }
    }
}

struct Loaded {
    forecasts: ForecastTable,
    grid: Grid,
    associations: Vec<Association>,
}

fn load_common(inputs: &Inputs, config: &RunConfig) -> Result<Loaded> {
    let forecasts = data::load_forecasts(&inputs.forecasts)?;
    let grid = data::load_grid(&inputs.grid)?;
    let stations = data::load_stations(&inputs.stations)?;
    let associations = data::associate_stations(&stations, &grid, config.station_cutoff_km)?;
    log::info!(
        "{} forecast days, {} members, {} of {} stations associated",
        forecasts.days.len(),
        forecasts.n_members,
        associations.len(),
        stations.len()
    );
    Ok(Loaded {
        forecasts,
        grid,
        associations,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `coefficients.csv` into `out_dir`.
pub fn run_fit(inputs: &Inputs, observations: &Path, config: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let loaded = load_common(inputs, config)?;
    let observations = data::load_observations(observations)?;
    let predictors = station_predictors(&loaded.forecasts, &loaded.grid, &loaded.associations, config)?;
    let records = fit_series(&predictors, &observations, config)?;
    create_dir(out_dir)?;
    let path = out_dir.join("coefficients.csv");
    data::write_coefficients(&path, &records)?;
    Ok(path)
}

/// Writes `predictions.csv` into `out_dir`.
pub fn run_predict(inputs: &Inputs, coefficients: &Path, config: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let loaded = load_common(inputs, config)?;
    let records = data::load_coefficients(coefficients)?;
    let predictors = station_predictors(&loaded.forecasts, &loaded.grid, &loaded.associations, config)?;
    let predictions = predict_series(&predictors, &records, config)?;
    create_dir(out_dir)?;
    let path = out_dir.join("predictions.csv");
    data::write_predictions(&path, &predictions, &config.thresholds)?;
    Ok(path)
}

/// Writes `report.json` and the reliability tables into `out_dir`.
pub fn run_verify(
    inputs: &Inputs,
    observations: &Path,
    predictions: &Path,
    reference: Option<&Path>,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let loaded = load_common(inputs, config)?;
    let observations = data::load_observations(observations)?;
    let model = data::load_predictions(predictions)?;
    let reference = reference.map(data::load_predictions).transpose()?;
    let v = verify_series(&model, &observations, &loaded.forecasts, &loaded.associations, reference.as_deref(), config)?;

    create_dir(out_dir)?;
    let mut written = Vec::new();
    let report = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&v.report)?;
    json.push('\n');
    std::fs::write(&report, json).map_err(|e| Error::io(&report, e))?;
    written.push(report);
    for (i, t) in config.thresholds.iter().enumerate() {
        for (prefix, diagram) in [("reliability", &v.model_diagrams[i]), ("reliability_reference", &v.reference_diagrams[i])] {
            let path = out_dir.join(format!("{prefix}_{t}.csv"));
            write_reliability(&path, diagram)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `bin_index,lower,upper,count,mean_prob,obs_freq,ci_low,ci_high`;
/// empty bins leave the last four columns blank.
pub fn write_reliability(path: &Path, d: &ReliabilityDiagram) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    })?;
    w.write_record(["bin_index", "lower", "upper", "count", "mean_prob", "obs_freq", "ci_low", "ci_high"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for b in &d.bins {
        w.write_record([
            (b.index + 1).to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.count.to_string(),
            opt(b.mean_prob),
            opt(b.obs_freq),
            opt(b.ci.map(|c| c.low)),
            opt(b.ci.map(|c| c.high)),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
