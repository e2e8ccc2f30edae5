//! Ensemble summary statistics used as predictors for the censored GEV
//! parameters, computed either at a single gridpoint or over a
//! distance-weighted neighborhood.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean earth radius (km) for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleForecast {
    pub site_id: String,
    pub valid_time: NaiveDate,
    members: Vec<f64>,
}

impl EnsembleForecast {
    pub fn new(site_id: impl Into<String>, valid_time: NaiveDate, members: Vec<f64>) -> Result<Self> {
        validate_members(&members)?;
        Ok(Self {
            site_id: site_id.into(),
            valid_time,
            members,
        })
    }

    pub fn members(&self) -> &[f64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn validate_members(members: &[f64]) -> Result<()> {
    if members.is_empty() {
        return Err(Error::domain("ensemble has no members"));
    }
    if let Some(bad) = members.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!(
            "ensemble member values must be finite and >= 0, got {bad}"
        )));
    }
    Ok(())
}

/// Condensed ensemble statistics for one (site, day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorSet {
    /// Ensemble mean (or mean of the weighted neighborhood averages).
    pub mean: f64,
    /// Fraction of (weighted) members at or below the trace threshold.
    pub zero_frac: f64,
    /// Gini mean difference of the (smoothed) members.
    pub md: f64,
    /// Member-averaged weighted spatial mean difference; neighborhood only.
    pub nbr_md: Option<f64>,
}

pub fn ensemble_mean(members: &[f64]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::domain("ensemble has no members"));
    }
    Ok(members.iter().sum::<f64>() / members.len() as f64)
}

/// Fraction of members with value `<= trace_threshold`.
pub fn zero_fraction(members: &[f64], trace_threshold: f64) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::domain("ensemble has no members"));
    }
    let dry = members.iter().filter(|v| **v <= trace_threshold).count();
    Ok(dry as f64 / members.len() as f64)
}

/// Weighted Gini mean difference `Σ_i Σ_j w_i w_j |v_i - v_j|`.
///
/// Evaluated as the single sorted sum `2 Σ W_i (1 - W_i) (v_(i+1) - v_(i))`
/// with `W_i` the cumulative weight of the `i` smallest values. Equal
/// weights `1/n` when `weights` is `None`.
pub fn gini_md(values: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::domain("mean difference of an empty sample"));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::domain(format!(
                "{} weights for {} values",
                w.len(),
                n
            )));
        }
        if let Some(bad) = w.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::domain(format!("negative weight {bad}")));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let uniform = 1.0 / n as f64;
    let mut cumulative = 0.0;
    let mut total = 0.0;
    for pair in order.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        cumulative += weights.map_or(uniform, |w| w[lo]);
        total += cumulative * (1.0 - cumulative) * (values[hi] - values[lo]);
    }
    Ok(2.0 * total)
}

/// Local predictors from the members at a single gridpoint.
pub fn local_predictors(members: &[f64], trace_threshold: f64) -> Result<PredictorSet> {
    validate_members(members)?;
    Ok(PredictorSet {
        mean: ensemble_mean(members)?,
        zero_frac: zero_fraction(members, trace_threshold)?,
        md: gini_md(members, None)?,
        nbr_md: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordSystem {
    /// Degrees longitude (`a`) and latitude (`b`); great-circle distances.
    LonLat,
    /// Projected kilometres; Euclidean distances.
    XyKm,
}

impl CoordSystem {
    pub fn tag(self) -> &'static str {
        match self {
            CoordSystem::LonLat => "lonlat",
            CoordSystem::XyKm => "xy_km",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.trim() {
            "lonlat" => Some(CoordSystem::LonLat),
            "xy_km" => Some(CoordSystem::XyKm),
            _ => None,
        }
    }

    /// Distance in km between two coordinate pairs.
    pub fn distance_km(self, p: Coords, q: Coords) -> f64 {
        match self {
            CoordSystem::XyKm => (p.a - q.a).hypot(p.b - q.b),
            CoordSystem::LonLat => {
                let (lon1, lat1) = (p.a.to_radians(), p.b.to_radians());
                let (lon2, lat2) = (q.a.to_radians(), q.b.to_radians());
                let h = ((lat2 - lat1) / 2.0).sin().powi(2)
                    + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
                2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
            }
        }
    }
}

impl fmt::Display for CoordSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coords {
    pub a: f64,
    pub b: f64,
}

impl Coords {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub point_id: String,
    pub coords: Coords,
    /// Climatological standardization factor `c`.
    pub climo_factor: f64,
}

impl GridPoint {
    pub fn new(point_id: impl Into<String>, coords: Coords, climo_factor: f64) -> Result<Self> {
        if !(climo_factor > 0.0) || !climo_factor.is_finite() {
            return Err(Error::domain(format!(
                "climatology factor must be > 0, got {climo_factor}"
            )));
        }
        Ok(Self {
            point_id: point_id.into(),
            coords,
            climo_factor,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub system: CoordSystem,
    pub points: Vec<GridPoint>,
}

impl Grid {
    pub fn new(system: CoordSystem, points: Vec<GridPoint>) -> Self {
        Self { system, points }
    }

    pub fn get(&self, point_id: &str) -> Option<&GridPoint> {
        self.points.iter().find(|p| p.point_id == point_id)
    }
}

/// Normalized taper weights of the gridpoints inside a radius.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodWeights {
    pub center: GridPoint,
    pub entries: Vec<(GridPoint, f64)>,
    pub radius_km: f64,
}

impl NeighborhoodWeights {
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, w)| *w)
    }
}

/// Weights `∝ max(1 - (d/r)², 0)` over the gridpoints strictly inside
/// `radius_km` of `center`, normalized to sum to one.
pub fn neighborhood_weights(grid: &Grid, center: &GridPoint, radius_km: f64) -> Result<NeighborhoodWeights> {
    if !(radius_km > 0.0) || !radius_km.is_finite() {
        return Err(Error::domain(format!("neighborhood radius must be > 0, got {radius_km}")));
    }
    let mut entries: Vec<(GridPoint, f64)> = grid
        .points
        .iter()
        .filter_map(|p| {
            let d = grid.system.distance_km(center.coords, p.coords);
            (d < radius_km).then(|| {
                let ratio = d / radius_km;
                (p.clone(), 1.0 - ratio * ratio)
            })
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = entries.iter().map(|(_, w)| *w).sum();
    if entries.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyNeighborhood {
            center: center.point_id.clone(),
            radius_km,
        });
    }
    for (_, w) in &mut entries {
        *w /= total;
    }
    Ok(NeighborhoodWeights {
        center: center.clone(),
        entries,
        radius_km,
    })
}

fn member_values<'a>(forecasts: &'a BTreeMap<String, Vec<f64>>, point_id: &str) -> Result<&'a [f64]> {
    forecasts
        .get(point_id)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::data(format!("no forecast for gridpoint {point_id}")))
}

/// Weighted average of member `k` over the neighborhood.
pub fn weighted_member_average(
    forecasts: &BTreeMap<String, Vec<f64>>,
    w: &NeighborhoodWeights,
    k: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (point, weight) in &w.entries {
        let members = member_values(forecasts, &point.point_id)?;
        let value = members.get(k).ok_or_else(|| {
            Error::data(format!("gridpoint {} has no member {}", point.point_id, k + 1))
        })?;
        total += weight * value;
    }
    Ok(total)
}

/// The four neighborhood predictors.
///
/// With `use_climo`, member values are divided by their gridpoint's
/// climatology factor before averaging, and the mean, mean difference and
/// neighborhood mean difference are multiplied back by the center's factor.
/// The zero fraction is unaffected.
pub fn neighborhood_predictors(
    forecasts: &BTreeMap<String, Vec<f64>>,
    w: &NeighborhoodWeights,
    use_climo: bool,
    trace_threshold: f64,
) -> Result<PredictorSet> {
    let fields: Vec<&[f64]> = w
        .entries
        .iter()
        .map(|(p, _)| member_values(forecasts, &p.point_id))
        .collect::<Result<_>>()?;
    let k_count = fields[0].len();
    for ((point, _), members) in w.entries.iter().zip(&fields) {
        if members.len() != k_count {
            return Err(Error::data(format!(
                "gridpoint {} has {} members, expected {}",
                point.point_id,
                members.len(),
                k_count
            )));
        }
        validate_members(members)?;
    }
    let weights: Vec<f64> = w.weights().collect();
    let scales: Vec<f64> = w
        .entries
        .iter()
        .map(|(p, _)| if use_climo { p.climo_factor } else { 1.0 })
        .collect();
    let center_scale = if use_climo { w.center.climo_factor } else { 1.0 };
    let standardized = |x: usize, k: usize| {
        if use_climo {
            fields[x][k] / scales[x]
        } else {
            fields[x][k]
        }
    };

    let mut smoothed = Vec::with_capacity(k_count);
    let mut dry_weight = 0.0;
    let mut spatial_md = 0.0;
    let mut column = vec![0.0; fields.len()];
    for k in 0..k_count {
        let mut avg = 0.0;
        for (x, weight) in weights.iter().enumerate() {
            let v = standardized(x, k);
            column[x] = v;
            avg += weight * v;
            if fields[x][k] <= trace_threshold {
                dry_weight += weight;
            }
        }
        smoothed.push(avg);
        spatial_md += gini_md(&column, Some(&weights))?;
    }
    let kf = k_count as f64;
    let mean = smoothed.iter().sum::<f64>() / kf;
    let md = gini_md(&smoothed, None)?;
    let nbr_md = spatial_md / kf;

    Ok(if use_climo {
        PredictorSet {
            mean: center_scale * mean,
            zero_frac: dry_weight / kf,
            md: center_scale * md,
            nbr_md: Some(center_scale * nbr_md),
        }
    } else {
        PredictorSet {
            mean,
            zero_frac: dry_weight / kf,
            md,
            nbr_md: Some(nbr_md),
        }
    })
}
