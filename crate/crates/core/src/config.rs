//! Run configuration: defaults, flat `key = value` files, and overrides.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::verify::BootstrapConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub window_days: usize,
    pub first_day_iterations: usize,
    pub daily_iterations: usize,
    pub min_window_days: usize,
    /// 0 selects the local model.
    pub neighborhood_radius_km: f64,
    pub use_climo: bool,
    /// Members at or below this amount count as dry.
    pub trace_threshold: f64,
    /// Exceedance thresholds in mm, ascending.
    pub thresholds: Vec<f64>,
    pub bootstrap_replicates: usize,
    pub bootstrap_level: f64,
    pub seed: u64,
    pub station_cutoff_km: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        let boot = BootstrapConfig::default();
        Self {
            window_days: fit.window_days,
            first_day_iterations: fit.first_day_iterations,
            daily_iterations: fit.daily_iterations,
            min_window_days: fit.min_window_days,
            neighborhood_radius_km: 0.0,
            use_climo: false,
            trace_threshold: 0.0,
            thresholds: vec![0.0, 5.0, 10.0, 15.0],
            bootstrap_replicates: boot.replicates,
            bootstrap_level: boot.level,
            seed: boot.seed,
            station_cutoff_km: 10.0,
        }
    }
}

pub const KEYS: [&str; 12] = [
    "window_days",
    "first_day_iterations",
    "daily_iterations",
    "min_window_days",
    "neighborhood_radius_km",
    "use_climo",
    "trace_threshold",
    "thresholds",
    "bootstrap_replicates",
    "bootstrap_level",
    "seed",
    "station_cutoff_km",
];

fn parse<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| Error::Config(format!("invalid value '{raw}' for {key}: {e}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{raw}' for {key}: expected true or false"))),
    }
}

/// Comma-separated list of thresholds.
pub fn parse_thresholds(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse::<f64>("thresholds", s))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "window_days" => self.window_days = parse(key, v)?,
            "first_day_iterations" => self.first_day_iterations = parse(key, v)?,
            "daily_iterations" => self.daily_iterations = parse(key, v)?,
            "min_window_days" => self.min_window_days = parse(key, v)?,
            "neighborhood_radius_km" => self.neighborhood_radius_km = parse(key, v)?,
            "use_climo" => self.use_climo = parse_bool(key, v)?,
            "trace_threshold" => self.trace_threshold = parse(key, v)?,
            "thresholds" => self.thresholds = parse_thresholds(v)?,
            "bootstrap_replicates" => self.bootstrap_replicates = parse(key, v)?,
            "bootstrap_level" => self.bootstrap_level = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "station_cutoff_km" => self.station_cutoff_km = parse(key, v)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are
    /// skipped.
    pub fn apply_str(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected key = value, got '{line}'", i + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.neighborhood_radius_km >= 0.0) || !self.neighborhood_radius_km.is_finite() {
            return fail(format!("neighborhood_radius_km must be >= 0, got {}", self.neighborhood_radius_km));
        }
        if self.window_days == 0 {
            return fail("window_days must be at least 1".into());
        }
        if self.min_window_days > self.window_days {
            return fail(format!(
                "min_window_days ({}) exceeds window_days ({})",
                self.min_window_days, self.window_days
            ));
        }
        if self.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return fail(format!("thresholds must be strictly ascending, got {:?}", self.thresholds));
        }
        if self.thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return fail(format!("thresholds must be finite and >= 0, got {:?}", self.thresholds));
        }
        if !(self.trace_threshold >= 0.0) {
            return fail(format!("trace_threshold must be >= 0, got {}", self.trace_threshold));
        }
        if self.bootstrap_replicates == 0 {
            return fail("bootstrap_replicates must be at least 1".into());
        }
        if !(self.bootstrap_level > 0.0 && self.bootstrap_level <= 100.0) {
            return fail(format!("bootstrap_level must be in (0, 100], got {}", self.bootstrap_level));
        }
        if !(self.station_cutoff_km >= 0.0) {
            return fail(format!("station_cutoff_km must be >= 0, got {}", self.station_cutoff_km));
        }
        Ok(())
    }

    pub fn uses_neighborhood(&self) -> bool {
        self.neighborhood_radius_km > 0.0
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            window_days: self.window_days,
            first_day_iterations: self.first_day_iterations,
            daily_iterations: self.daily_iterations,
            min_window_days: self.min_window_days,
            ..FitConfig::default()
        }
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.bootstrap_replicates,
            level: self.bootstrap_level,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.window_days, c.first_day_iterations, c.daily_iterations, c.min_window_days), (30, 10, 1, 10));
        assert_eq!(c.thresholds, vec![0.0, 5.0, 10.0, 15.0]);
        assert_eq!((c.bootstrap_replicates, c.bootstrap_level), (1000, 90.0));
        assert_eq!(c.station_cutoff_km, 10.0);
        c.validate().unwrap();
    }

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_str("# comment\nwindow_days = 20\n\nthresholds=0, 2.5 ,7\nuse_climo = yes\n", "cfg").unwrap();
        assert_eq!(c.window_days, 20);
        assert_eq!(c.thresholds, vec![0.0, 2.5, 7.0]);
        assert!(c.use_climo);
        c.set("window_days", "25").unwrap();
        assert_eq!(c.window_days, 25);
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = RunConfig::default();
        let e = c.apply_str("seed = 3\nradius = 4\n", "run.cfg").unwrap_err().to_string();
        assert!(e.contains("run.cfg:2") && e.contains("unknown key 'radius'"), "{e}");
        assert!(c.apply_str("window_days 3", "x").is_err());
        assert!(c.set("use_climo", "maybe").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.thresholds = vec![5.0, 0.0];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.neighborhood_radius_km = -1.0;
        assert!(c.validate().is_err());
    }
}
