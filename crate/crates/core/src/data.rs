//! CSV tables for forecasts, observations, stations, grids, coefficient
//! series and predictions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::fit::{CoefficientRecord, EmosCoefficients};
use crate::gev::CensoredGevParams;
use crate::predictors::{Coords, CoordSystem, Grid, GridPoint};

/// Members per gridpoint for one day, keyed by point id.
pub type DayField = BTreeMap<String, Vec<f64>>;

/// Ensemble forecasts keyed by valid day and gridpoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastTable {
    pub n_members: usize,
    pub days: BTreeMap<NaiveDate, DayField>,
}

impl ForecastTable {
    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn members(&self, day: NaiveDate, point_id: &str) -> Option<&[f64]> {
        self.days.get(&day)?.get(point_id).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationTable {
    pub values: BTreeMap<(NaiveDate, String), f64>,
}

impl ObservationTable {
    pub fn get(&self, day: NaiveDate, station_id: &str) -> Option<f64> {
        self.values.get(&(day, station_id.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub station_id: String,
    pub coords: Coords,
}

/// A station's nearest gridpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub station_id: String,
    pub point_id: String,
    pub distance_km: f64,
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub valid_time: NaiveDate,
    pub station_id: String,
    pub params: CensoredGevParams,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Header-checked CSV reader that reports 1-based file line numbers.
struct Table {
    path: PathBuf,
    line_offset: u64,
    columns: Vec<usize>,
    reader: csv::Reader<Box<dyn Read>>,
}

impl Table {
    fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let file = open(path)?;
        Self::from_reader(path, Box::new(file), 0, required)
    }

    fn from_reader(path: &Path, source: Box<dyn Read>, line_offset: u64, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = reader
            .headers()
            .map_err(|e| parse_error(path, line_offset + 1, e.to_string()))?
            .clone();
        let columns = required
            .iter()
            .map(|name| {
                headers.iter().position(|h| h == *name).ok_or_else(|| {
                    parse_error(
                        path,
                        line_offset + 1,
                        format!("missing required column '{name}' (header is '{}')", headers.iter().collect::<Vec<_>>().join(",")),
                    )
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            path: path.to_path_buf(),
            line_offset,
            columns,
            reader,
        })
    }

    fn headers(&mut self) -> Vec<String> {
        self.reader
            .headers()
            .map(|h| h.iter().map(str::to_string).collect())
            .unwrap_or_default()
    }

    /// Calls `f(line, fields)` for every record, with fields in the order of
    /// the required columns.
    fn for_each(mut self, mut f: impl FnMut(&Path, u64, &[&str], &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| {
                    let line = e.position().map_or(0, |p| p.line()) + self.line_offset;
                    parse_error(&self.path, line, e.to_string())
                })?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line()) + self.line_offset;
            let fields: Vec<&str> = self.columns.iter().map(|&i| record.get(i).unwrap_or("")).collect();
            f(&self.path, line, &fields, &record)?;
        }
    }
}

fn parse_field<T: FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| parse_error(path, line, format!("invalid {name} '{raw}': {e}")))
}

fn parse_date(path: &Path, line: u64, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|e| parse_error(path, line, format!("invalid date '{raw}' (expected YYYY-MM-DD): {e}")))
}

fn parse_precip(path: &Path, line: u64, raw: &str) -> Result<f64> {
    let v: f64 = parse_field(path, line, "value", raw)?;
    if !v.is_finite() || v < 0.0 {
        return Err(parse_error(path, line, format!("precipitation must be finite and >= 0, got {raw}")));
    }
    Ok(v)
}

/// `valid_time,point_id,member,value` with members numbered `1..=K`.
pub fn load_forecasts(path: &Path) -> Result<ForecastTable> {
    let mut slots: BTreeMap<NaiveDate, BTreeMap<String, Vec<Option<(f64, u64)>>>> = BTreeMap::new();
    Table::open(path, &["valid_time", "point_id", "member", "value"])?.for_each(|path, line, f, _| {
        let day = parse_date(path, line, f[0])?;
        let member: usize = parse_field(path, line, "member", f[2])?;
        if member == 0 {
            return Err(parse_error(path, line, "member indices start at 1"));
        }
        let value = parse_precip(path, line, f[3])?;
        let members = slots.entry(day).or_default().entry(f[1].to_string()).or_default();
        if members.len() < member {
            members.resize(member, None);
        }
        if let Some((_, first)) = members[member - 1] {
            return Err(parse_error(
                path,
                line,
                format!("duplicate forecast for ({day}, {}, member {member}); first given on line {first}", f[1]),
            ));
        }
        members[member - 1] = Some((value, line));
        Ok(())
    })?;

    let k = slots
        .values()
        .flat_map(|d| d.values())
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let mut table = ForecastTable {
        n_members: k,
        days: BTreeMap::new(),
    };
    for (day, points) in slots {
        let mut field = DayField::new();
        for (point, members) in points {
            let values: Option<Vec<f64>> = members.iter().map(|m| m.map(|(v, _)| v)).collect();
            match values {
                Some(v) if v.len() == k => {
                    field.insert(point, v);
                }
                _ => {
                    let present = members.iter().filter(|m| m.is_some()).count();
                    return Err(Error::data(format!(
                        "{}: ({day}, {point}) has {present} of {k} members; every gridpoint needs members 1..={k}",
                        path.display()
                    )));
                }
            }
        }
        table.days.insert(day, field);
    }
    Ok(table)
}

/// `valid_time,station_id,value`.
pub fn load_observations(path: &Path) -> Result<ObservationTable> {
    let mut lines: BTreeMap<(NaiveDate, String), (f64, u64)> = BTreeMap::new();
    Table::open(path, &["valid_time", "station_id", "value"])?.for_each(|path, line, f, _| {
        let day = parse_date(path, line, f[0])?;
        let value = parse_precip(path, line, f[2])?;
        if let Some((_, first)) = lines.insert((day, f[1].to_string()), (value, line)) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate observation for ({day}, {}); first given on line {first}", f[1]),
            ));
        }
        Ok(())
    })?;
    Ok(ObservationTable {
        values: lines.into_iter().map(|(k, (v, _))| (k, v)).collect(),
    })
}

/// `station_id,coord_a,coord_b`.
pub fn load_stations(path: &Path) -> Result<Vec<Station>> {
    let mut stations: Vec<Station> = Vec::new();
    let mut seen = BTreeMap::new();
    Table::open(path, &["station_id", "coord_a", "coord_b"])?.for_each(|path, line, f, _| {
        if let Some(first) = seen.insert(f[0].to_string(), line) {
            return Err(parse_error(path, line, format!("duplicate station '{}'; first given on line {first}", f[0])));
        }
        stations.push(Station {
            station_id: f[0].to_string(),
            coords: Coords::new(parse_field(path, line, "coord_a", f[1])?, parse_field(path, line, "coord_b", f[2])?),
        });
        Ok(())
    })?;
    Ok(stations)
}

/// First line `coords=lonlat` or `coords=xy_km`, then
/// `point_id,coord_a,coord_b[,climo_factor]`. A missing climatology
/// factor defaults to 1.
pub fn load_grid(path: &Path) -> Result<Grid> {
    let mut reader = BufReader::new(open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let tag = first
        .trim()
        .strip_prefix("coords=")
        .ok_or_else(|| parse_error(path, 1, format!("expected 'coords=lonlat' or 'coords=xy_km', got '{}'", first.trim())))?;
    let system = CoordSystem::from_tag(tag)
        .ok_or_else(|| parse_error(path, 1, format!("unknown coordinate system '{tag}' (expected lonlat or xy_km)")))?;

    let mut table = Table::from_reader(path, Box::new(reader), 1, &["point_id", "coord_a", "coord_b"])?;
    let climo_col = table.headers().iter().position(|h| h == "climo_factor");
    let mut points = Vec::new();
    let mut seen = BTreeMap::new();
    table.for_each(|path, line, f, record| {
        if let Some(first) = seen.insert(f[0].to_string(), line) {
            return Err(parse_error(path, line, format!("duplicate gridpoint '{}'; first given on line {first}", f[0])));
        }
        let climo = match climo_col.and_then(|i| record.get(i)) {
            Some(raw) if !raw.is_empty() => parse_field(path, line, "climo_factor", raw)?,
            _ => 1.0,
        };
        let coords = Coords::new(parse_field(path, line, "coord_a", f[1])?, parse_field(path, line, "coord_b", f[2])?);
        points.push(GridPoint::new(f[0], coords, climo).map_err(|e| parse_error(path, line, e.to_string()))?);
        Ok(())
    })?;
    Ok(Grid::new(system, points))
}

/// Nearest gridpoint for every station within `cutoff_km`. Ties go to
/// the lowest point id. Stations beyond the cutoff are excluded and
/// logged.
pub fn associate_stations(stations: &[Station], grid: &Grid, cutoff_km: f64) -> Result<Vec<Association>> {
    if grid.points.is_empty() {
        return Err(Error::data("cannot associate stations with an empty grid"));
    }
    let mut out = Vec::with_capacity(stations.len());
    for s in stations {
        let mut best: Option<(f64, &GridPoint)> = None;
        for p in &grid.points {
            let d = grid.system.distance_km(s.coords, p.coords);
            best = match best {
                Some((bd, bp)) if bd < d || (bd == d && bp.point_id <= p.point_id) => Some((bd, bp)),
                _ => Some((d, p)),
            };
        }
        let (distance_km, point) = best.expect("grid is nonempty");
        if distance_km > cutoff_km {
            log::warn!(
                "station {} excluded: nearest gridpoint {} is {distance_km:.3} km away (cutoff {cutoff_km} km)",
                s.station_id,
                point.point_id
            );
            continue;
        }
        out.push(Association {
            station_id: s.station_id.clone(),
            point_id: point.point_id.clone(),
            distance_km,
        });
    }
    Ok(out)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn write_forecasts(path: &Path, table: &ForecastTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["valid_time", "point_id", "member", "value"])?;
    for (day, field) in &table.days {
        let day = day.to_string();
        for (point, members) in field {
            for (k, v) in members.iter().enumerate() {
                w.write_record([day.as_str(), point, &(k + 1).to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_observations(path: &Path, table: &ObservationTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["valid_time", "station_id", "value"])?;
    for ((day, station), v) in &table.values {
        w.write_record([day.to_string().as_str(), station, &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_stations(path: &Path, stations: &[Station]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["station_id", "coord_a", "coord_b"])?;
    for s in stations {
        w.write_record([s.station_id.as_str(), &s.coords.a.to_string(), &s.coords.b.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_grid(path: &Path, grid: &Grid) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "coords={}", grid.system).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["point_id", "coord_a", "coord_b", "climo_factor"])?;
    for p in &grid.points {
        w.write_record([
            p.point_id.as_str(),
            &p.coords.a.to_string(),
            &p.coords.b.to_string(),
            &p.climo_factor.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const COEFFICIENT_HEADER: [&str; 10] = [
    "valid_day",
    "alpha0",
    "alpha1",
    "alpha2",
    "beta0",
    "beta1",
    "beta2",
    "xi",
    "objective_value",
    "n_pairs",
];

pub fn write_coefficients(path: &Path, records: &[CoefficientRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(COEFFICIENT_HEADER)?;
    for r in records {
        let c = &r.coefficients;
        w.write_record([
            c.valid_day.to_string(),
            c.alpha0.to_string(),
            c.alpha1.to_string(),
            c.alpha2.to_string(),
            c.beta0.to_string(),
            c.beta1.to_string(),
            c.beta2.map(|b| b.to_string()).unwrap_or_default(),
            c.xi.to_string(),
            r.objective_value.map(|v| v.to_string()).unwrap_or_default(),
            r.n_pairs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a coefficient series. `objective_value` and `n_pairs` are
/// optional columns so hand-written truth files need only the
/// coefficients.
pub fn load_coefficients(path: &Path) -> Result<Vec<CoefficientRecord>> {
    let mut table = Table::open(path, &COEFFICIENT_HEADER[..8])?;
    let headers = table.headers();
    let objective_col = headers.iter().position(|h| h == "objective_value");
    let pairs_col = headers.iter().position(|h| h == "n_pairs");
    let mut out: Vec<CoefficientRecord> = Vec::new();
    table.for_each(|path, line, f, record| {
        let num = |i: usize| parse_field::<f64>(path, line, COEFFICIENT_HEADER[i], f[i]);
        let beta2 = if f[6].is_empty() { None } else { Some(num(6)?) };
        let coefficients = EmosCoefficients {
            valid_day: parse_date(path, line, f[0])?,
            alpha0: num(1)?,
            alpha1: num(2)?,
            alpha2: num(3)?,
            beta0: num(4)?,
            beta1: num(5)?,
            beta2,
            xi: num(7)?,
        };
        if !coefficients.is_admissible() {
            return Err(parse_error(path, line, "inadmissible coefficients (need beta0 > 0, beta1, beta2 >= 0, -0.278 < xi < 1)"));
        }
        if let Some(prev) = out.last() {
            if prev.coefficients.valid_day >= coefficients.valid_day {
                return Err(parse_error(path, line, "valid_day must be strictly increasing"));
            }
        }
        let objective_value = match objective_col.and_then(|i| record.get(i)) {
            Some(raw) if !raw.is_empty() => Some(parse_field(path, line, "objective_value", raw)?),
            _ => None,
        };
        let n_pairs = match pairs_col.and_then(|i| record.get(i)) {
            Some(raw) if !raw.is_empty() => parse_field(path, line, "n_pairs", raw)?,
            _ => 0,
        };
        out.push(CoefficientRecord {
            coefficients,
            objective_value,
            n_pairs,
        });
        Ok(())
    })?;
    Ok(out)
}

/// Column name for the exceedance probability of threshold `t`.
pub fn exceedance_column(t: f64) -> String {
    format!("p_gt_{t}")
}

pub fn write_predictions(path: &Path, rows: &[Prediction], thresholds: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["valid_time", "station_id", "m", "sigma", "xi", "p_zero", "q10", "q50", "q90"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(thresholds.iter().map(|t| exceedance_column(*t)));
    w.write_record(&header)?;
    for r in rows {
        let p = &r.params;
        let mut rec = vec![
            r.valid_time.to_string(),
            r.station_id.clone(),
            p.m().to_string(),
            p.sigma().to_string(),
            p.xi().to_string(),
            p.prob_zero().to_string(),
        ];
        for q in [0.1, 0.5, 0.9] {
            rec.push(p.quantile(q)?.to_string());
        }
        rec.extend(thresholds.iter().map(|t| (1.0 - p.cdf(*t)).to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `valid_time,station_id,m,sigma,xi`; other columns are ignored
/// and the distribution is rebuilt from the parameters.
pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    Table::open(path, &["valid_time", "station_id", "m", "sigma", "xi"])?.for_each(|path, line, f, _| {
        let valid_time = parse_date(path, line, f[0])?;
        if let Some(first) = seen.insert((valid_time, f[1].to_string()), line) {
            return Err(parse_error(path, line, format!("duplicate prediction for ({valid_time}, {}); first given on line {first}", f[1])));
        }
        let params = CensoredGevParams::new(
            parse_field(path, line, "m", f[2])?,
            parse_field(path, line, "sigma", f[3])?,
            parse_field(path, line, "xi", f[4])?,
        )
        .map_err(|e| parse_error(path, line, e.to_string()))?;
        out.push(Prediction {
            valid_time,
            station_id: f[1].to_string(),
            params,
        });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn empty_tables_are_not_errors() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "valid_time,point_id,member,value\n");
        assert!(load_forecasts(&f).unwrap().is_empty());
        let o = write(&dir, "o.csv", "valid_time,station_id,value\n");
        assert!(load_observations(&o).unwrap().is_empty());
    }

    #[test]
    fn duplicate_forecast_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(
            &dir,
            "f.csv",
            "valid_time,point_id,member,value\n2011-05-01,p1,1,0.5\n2011-05-01,p1,2,0.0\n2011-05-01,p1,1,0.7\n",
        );
        match load_forecasts(&f) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_negative_and_inconsistent_members() {
        let dir = tempfile::tempdir().unwrap();
        let neg = write(&dir, "n.csv", "valid_time,station_id,value\n2011-05-01,s,-0.1\n");
        assert!(matches!(load_observations(&neg), Err(Error::Parse { line: 2, .. })));
        let f = write(
            &dir,
            "f.csv",
            "valid_time,point_id,member,value\n2011-05-01,p1,1,0.5\n2011-05-01,p1,2,0.0\n2011-05-01,p2,1,0.0\n",
        );
        assert!(matches!(load_forecasts(&f), Err(Error::Data(_))));
        let dup = write(&dir, "d.csv", "valid_time,station_id,value\n2011-05-01,s,1\n2011-05-01,s,2\n");
        assert!(matches!(load_observations(&dup), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "f.csv", "valid_time,point,member,value\n");
        let err = load_forecasts(&f).unwrap_err().to_string();
        assert!(err.contains("point_id"), "{err}");
    }

    #[test]
    fn grid_tags() {
        let dir = tempfile::tempdir().unwrap();
        let g = write(&dir, "g.csv", "coords=xy_km\npoint_id,coord_a,coord_b\na,0,0\nb,3,4\n");
        let grid = load_grid(&g).unwrap();
        assert_eq!(grid.system, CoordSystem::XyKm);
        assert_eq!(grid.points[1].climo_factor, 1.0);
        let bad = write(&dir, "b.csv", "coords=utm\npoint_id,coord_a,coord_b\n");
        assert!(matches!(load_grid(&bad), Err(Error::Parse { line: 1, .. })));
        let bad_row = write(&dir, "r.csv", "coords=lonlat\npoint_id,coord_a,coord_b,climo_factor\na,7,50,x\n");
        assert!(matches!(load_grid(&bad_row), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = ForecastTable {
            n_members: 3,
            days: BTreeMap::new(),
        };
        for (i, day) in ["2011-05-01", "2011-05-02"].iter().enumerate() {
            let mut field = DayField::new();
            field.insert("p1".into(), vec![0.0, 0.1 * i as f64, 1.0 / 3.0]);
            field.insert("p2".into(), vec![2.5e-7, 12.75, 0.0]);
            table.days.insert(d(day), field);
        }
        let f = dir.path().join("f.csv");
        write_forecasts(&f, &table).unwrap();
        assert_eq!(load_forecasts(&f).unwrap(), table);

        let mut obs = ObservationTable::default();
        obs.values.insert((d("2011-05-01"), "s1".into()), 0.1 + 0.2);
        obs.values.insert((d("2011-05-02"), "s1".into()), 0.0);
        let o = dir.path().join("o.csv");
        write_observations(&o, &obs).unwrap();
        assert_eq!(load_observations(&o).unwrap(), obs);

        let grid = Grid::new(
            CoordSystem::LonLat,
            vec![GridPoint::new("a", Coords::new(7.1, 50.7), 1.3).unwrap()],
        );
        let g = dir.path().join("g.csv");
        write_grid(&g, &grid).unwrap();
        assert_eq!(load_grid(&g).unwrap(), grid);

        let record = CoefficientRecord {
            coefficients: EmosCoefficients {
                beta2: Some(0.125),
                ..EmosCoefficients::initial(d("2011-05-02"), true)
            },
            objective_value: Some(0.7312),
            n_pairs: 42,
        };
        let carried = CoefficientRecord {
            coefficients: EmosCoefficients::initial(d("2011-05-01"), false),
            objective_value: None,
            n_pairs: 0,
        };
        let c = dir.path().join("c.csv");
        write_coefficients(&c, &[carried, record]).unwrap();
        assert_eq!(load_coefficients(&c).unwrap(), vec![carried, record]);
    }

    #[test]
    fn association_rules() {
        let grid = Grid::new(
            CoordSystem::XyKm,
            vec![
                GridPoint::new("b", Coords::new(2.0, 0.0), 1.0).unwrap(),
                GridPoint::new("a", Coords::new(0.0, 0.0), 1.0).unwrap(),
                GridPoint::new("c", Coords::new(50.0, 0.0), 1.0).unwrap(),
            ],
        );
        let st = |id: &str, a: f64| Station {
            station_id: id.into(),
            coords: Coords::new(a, 0.0),
        };
        let out = associate_stations(&[st("on", 2.0), st("tie", 1.0), st("far", 30.0)], &grid, 10.0).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].point_id.as_str(), out[0].distance_km), ("b", 0.0));
        assert_eq!(out[1].point_id, "a");
        assert!(associate_stations(&[st("x", 0.0)], &Grid::new(CoordSystem::XyKm, vec![]), 10.0).is_err());
    }

    #[test]
    fn association_matches_exhaustive_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let points: Vec<GridPoint> = (0..60)
            .map(|i| GridPoint::new(format!("p{i:02}"), Coords::new(rng.random_range(0.0..5.0), rng.random_range(47.0..52.0)), 1.0).unwrap())
            .collect();
        let grid = Grid::new(CoordSystem::LonLat, points);
        let stations: Vec<Station> = (0..200)
            .map(|i| Station {
                station_id: format!("s{i}"),
                coords: Coords::new(rng.random_range(0.0..5.0), rng.random_range(47.0..52.0)),
            })
            .collect();
        let out = associate_stations(&stations, &grid, f64::INFINITY).unwrap();
        for (s, a) in stations.iter().zip(&out) {
            let mut all: Vec<(f64, &str)> = grid
                .points
                .iter()
                .map(|p| (grid.system.distance_km(s.coords, p.coords), p.point_id.as_str()))
                .collect();
            all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(y.1)));
            assert_eq!(a.point_id, all[0].1);
        }
    }
}
