//! Weather-station CSV ingestion, cleaning, windowing and design-matrix
//! construction.
//!
//! Rows with partially missing fields are kept at ingest; incomplete rows are
//! only dropped when a design matrix is built for a particular feature set.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats;

pub const TIMESTAMP_COLUMN: &str = "timestamp";
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";
/// Grid spacing of the station data, in minutes.
pub const STEP_MINUTES: i64 = 15;
pub const MAX_IRRADIANCE: f64 = 1500.0;
pub const INTERCEPT_NAME: &str = "intercept";

/// Measured quantities carried by an [`Observation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    #[serde(rename = "temp_2cm")]
    Temp2cm,
    #[serde(rename = "temp_10cm")]
    Temp10cm,
    #[serde(rename = "temp_60cm")]
    Temp60cm,
    RelHumidity,
    Rainfall,
    WindSpeed,
    WindDirection,
    SolarIrradiance,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::Temp2cm,
        Field::Temp10cm,
        Field::Temp60cm,
        Field::RelHumidity,
        Field::Rainfall,
        Field::WindSpeed,
        Field::WindDirection,
        Field::SolarIrradiance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Temp2cm => "temp_2cm",
            Field::Temp10cm => "temp_10cm",
            Field::Temp60cm => "temp_60cm",
            Field::RelHumidity => "rel_humidity",
            Field::Rainfall => "rainfall",
            Field::WindSpeed => "wind_speed",
            Field::WindDirection => "wind_direction",
            Field::SolarIrradiance => "solar_irradiance",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown field name `{s}`")))
    }
}

/// One timestamped weather record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation {
    pub timestamp: NaiveDateTime,
    pub temp_2cm: Option<f64>,
    pub temp_10cm: Option<f64>,
    pub temp_60cm: Option<f64>,
    pub rel_humidity: Option<f64>,
    pub rainfall: Option<f64>,
    pub wind_speed: Option<f64>,
    pub wind_direction: Option<f64>,
    pub solar_irradiance: Option<f64>,
}

impl Observation {
    pub fn new(timestamp: NaiveDateTime) -> Self {
        Self {
            timestamp,
            ..Default::default()
        }
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::Temp2cm => self.temp_2cm,
            Field::Temp10cm => self.temp_10cm,
            Field::Temp60cm => self.temp_60cm,
            Field::RelHumidity => self.rel_humidity,
            Field::Rainfall => self.rainfall,
            Field::WindSpeed => self.wind_speed,
            Field::WindDirection => self.wind_direction,
            Field::SolarIrradiance => self.solar_irradiance,
        }
    }

    pub fn set(&mut self, field: Field, value: Option<f64>) {
        let slot = match field {
            Field::Temp2cm => &mut self.temp_2cm,
            Field::Temp10cm => &mut self.temp_10cm,
            Field::Temp60cm => &mut self.temp_60cm,
            Field::RelHumidity => &mut self.rel_humidity,
            Field::Rainfall => &mut self.rainfall,
            Field::WindSpeed => &mut self.wind_speed,
            Field::WindDirection => &mut self.wind_direction,
            Field::SolarIrradiance => &mut self.solar_irradiance,
        };
        *slot = value;
    }

    /// Raw feature values in the given order, or `None` if any is missing.
    pub fn features(&self, fields: &[Field]) -> Option<Vec<f64>> {
        fields.iter().map(|&f| self.get(f)).collect()
    }
}

/// Time-ordered records from one station. Timestamps are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    station_id: String,
    records: Vec<Observation>,
}

impl Dataset {
    pub fn new(station_id: impl Into<String>, records: Vec<Observation>) -> Result<Self> {
        if let Some(i) = records
            .windows(2)
            .position(|w| w[0].timestamp >= w[1].timestamp)
        {
            return Err(Error::Format(format!(
                "records not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            station_id: station_id.into(),
            records,
        })
    }

    pub fn empty(station_id: impl Into<String>) -> Self {
        Self {
            station_id: station_id.into(),
            records: Vec::new(),
        }
    }

    pub fn with_station_id(mut self, station_id: impl Into<String>) -> Self {
        self.station_id = station_id.into();
        self
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn span(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        Some((self.records.first()?.timestamp, self.records.last()?.timestamp))
    }

    pub fn get(&self, t: NaiveDateTime) -> Option<&Observation> {
        self.records
            .binary_search_by(|o| o.timestamp.cmp(&t))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Keeps the records matching `keep`; order is preserved.
    pub fn filter(&self, mut keep: impl FnMut(&Observation) -> bool) -> Dataset {
        Dataset {
            station_id: self.station_id.clone(),
            records: self.records.iter().filter(|o| keep(o)).cloned().collect(),
        }
    }

    /// Records with `start ≤ t ≤ end`.
    pub fn select_window(&self, start: NaiveDateTime, end: NaiveDateTime) -> Dataset {
        self.filter(|o| o.timestamp >= start && o.timestamp <= end)
    }

    /// Splits into `(t ≤ cutoff, t > cutoff)`.
    pub fn split_at(&self, cutoff: NaiveDateTime) -> (Dataset, Dataset) {
        let k = self.records.partition_point(|o| o.timestamp <= cutoff);
        (
            Dataset {
                station_id: self.station_id.clone(),
                records: self.records[..k].to_vec(),
            },
            Dataset {
                station_id: self.station_id.clone(),
                records: self.records[k..].to_vec(),
            },
        )
    }

    pub fn values(&self, field: Field) -> Vec<Option<f64>> {
        self.records.iter().map(|o| o.get(field)).collect()
    }
}

pub fn select_window(d: &Dataset, start: NaiveDateTime, end: NaiveDateTime) -> Dataset {
    d.select_window(start, end)
}

pub fn train_test_split_by_date(d: &Dataset, cutoff: NaiveDateTime) -> (Dataset, Dataset) {
    d.split_at(cutoff)
}

/// Maps source CSV column names onto canonical fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    columns: BTreeMap<String, Field>,
}

impl Default for Schema {
    /// Canonical column names map to themselves.
    fn default() -> Self {
        Self {
            columns: Field::ALL
                .into_iter()
                .map(|f| (f.name().to_string(), f))
                .collect(),
        }
    }
}

impl Schema {
    pub fn empty() -> Self {
        Self {
            columns: BTreeMap::new(),
        }
    }

    pub fn with(mut self, column: impl Into<String>, field: Field) -> Self {
        self.columns.insert(column.into(), field);
        self
    }

    /// Default canonical mapping plus the given extra aliases.
    pub fn with_aliases(aliases: &BTreeMap<String, Field>) -> Self {
        let mut s = Self::default();
        for (k, v) in aliases {
            s.columns.insert(k.clone(), *v);
        }
        s
    }

    pub fn lookup(&self, column: &str) -> Option<Field> {
        self.columns.get(column).copied()
    }
}

/// Counters describing what happened during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub bad_timestamps: usize,
    pub duplicates: usize,
    pub bad_cells: usize,
    pub irradiance_rejected: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub report: IngestReport,
}

fn is_missing_marker(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("null")
}

/// Parses a station timestamp and snaps it to the nearest 15-minute boundary.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        TIMESTAMP_FORMAT,
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%dT%H:%M:%S",
    ];
    let s = s.trim();
    let t = FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())?;
    Some(snap_to_grid(t))
}

/// Rounds to the nearest grid boundary; exact half-steps round up.
pub fn snap_to_grid(t: NaiveDateTime) -> NaiveDateTime {
    let secs = i64::from(t.minute()) * 60 + i64::from(t.second());
    let step = STEP_MINUTES * 60;
    let base = t
        .with_second(0)
        .and_then(|x| x.with_nanosecond(0))
        .expect("valid time")
        - Duration::minutes(i64::from(t.minute()));
    let rem = secs % step;
    let floor = secs - rem;
    let snapped = if 2 * rem >= step { floor + step } else { floor };
    base + Duration::seconds(snapped)
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Reads a station CSV. Unparseable cells become missing values, rows with
/// unparseable timestamps are dropped, and repeated timestamps keep the last
/// row seen.
pub fn parse_csv<R: Read>(source: R, schema: &Schema) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::EmptyData("input has no header row".into()));
    }
    let ts_col = headers
        .iter()
        .position(|h| h == TIMESTAMP_COLUMN)
        .ok_or_else(|| {
            Error::Format(format!(
                "header row lacks a `{TIMESTAMP_COLUMN}` column"
            ))
        })?;
    let mapped: Vec<(usize, Field)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| schema.lookup(h).map(|f| (i, f)))
        .collect();

    let mut report = IngestReport::default();
    let mut by_time: BTreeMap<NaiveDateTime, Observation> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        report.rows_read += 1;
        let Some(ts) = row.get(ts_col).and_then(parse_timestamp) else {
            report.bad_timestamps += 1;
            continue;
        };
        let mut obs = Observation::new(ts);
        for &(col, field) in &mapped {
            let cell = row.get(col).unwrap_or("");
            if is_missing_marker(cell) {
                continue;
            }
            let value = match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    report.bad_cells += 1;
                    continue;
                }
            };
            let value = match field {
                Field::SolarIrradiance if !(0.0..=MAX_IRRADIANCE).contains(&value) => {
                    report.irradiance_rejected += 1;
                    continue;
                }
                Field::WindDirection => value.rem_euclid(360.0),
                _ => value,
            };
            obs.set(field, Some(value));
        }
        if by_time.insert(ts, obs).is_some() {
            report.duplicates += 1;
        }
    }
    if by_time.is_empty() {
        return Err(Error::EmptyData(format!(
            "no parseable rows ({} read, {} bad timestamps)",
            report.rows_read, report.bad_timestamps
        )));
    }
    report.rows_kept = by_time.len();
    Ok(Ingested {
        dataset: Dataset {
            station_id: "unknown".into(),
            records: by_time.into_values().collect(),
        },
        report,
    })
}

/// Writes the dataset with canonical column names. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(d: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![TIMESTAMP_COLUMN];
    header.extend(Field::ALL.iter().map(|f| f.name()));
    w.write_record(&header)?;
    for o in &d.records {
        let mut row = vec![format_timestamp(o.timestamp)];
        row.extend(
            Field::ALL
                .iter()
                .map(|&f| o.get(f).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub feature: Field,
    /// `None` when the feature (or the target over the paired rows) is constant
    /// or fewer than two paired rows exist.
    pub r: Option<f64>,
    pub n: usize,
}

/// Pearson correlation of every other field against `target`, sorted by |r|
/// descending with undefined entries last.
pub fn correlation_report(d: &Dataset, target: Field) -> Result<Vec<Correlation>> {
    let present = d.records.iter().filter(|o| o.get(target).is_some()).count();
    if present < 2 {
        return Err(Error::InsufficientData {
            rows: present,
            cols: 2,
        });
    }
    let mut out = Vec::new();
    for feature in Field::ALL.into_iter().filter(|&f| f != target) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = d
            .records
            .iter()
            .filter_map(|o| Some((o.get(feature)?, o.get(target)?)))
            .unzip();
        let r = if xs.len() < 2 {
            None
        } else {
            stats::pearson(&xs, &ys)?
        };
        out.push(Correlation {
            feature,
            r,
            n: xs.len(),
        });
    }
    out.sort_by(|a, b| match (a.r, b.r) {
        (Some(x), Some(y)) => y.abs().total_cmp(&x.abs()),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(out)
}

/// Feature matrix Φ and target vector for a fitting problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    features: Matrix,
    targets: Vec<f64>,
    feature_names: Vec<String>,
    intercept: bool,
    timestamps: Vec<NaiveDateTime>,
    dropped: usize,
}

impl DesignMatrix {
    /// Builds from raw rows (without the intercept column); a leading column
    /// of ones is added when `intercept` is set.
    pub fn from_raw(
        raw_rows: &[Vec<f64>],
        targets: Vec<f64>,
        raw_names: &[String],
        intercept: bool,
    ) -> Result<Self> {
        if raw_rows.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: raw_rows.len(),
                right: targets.len(),
            });
        }
        let rows: Vec<Vec<f64>> = raw_rows
            .iter()
            .map(|r| with_intercept(r, intercept))
            .collect();
        let mut names = Vec::with_capacity(raw_names.len() + 1);
        if intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        names.extend(raw_names.iter().cloned());
        let features = if rows.is_empty() {
            Matrix::zeros(0, names.len())
        } else {
            Matrix::from_rows(&rows)?
        };
        if features.cols() != names.len() {
            return Err(Error::DimensionMismatch {
                row: 0,
                expected: names.len(),
                got: features.cols(),
            });
        }
        Ok(Self {
            features,
            targets,
            feature_names: names,
            intercept,
            timestamps: Vec::new(),
            dropped: 0,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Column names, `"intercept"` first when enabled.
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Names of the raw (non-intercept) columns.
    pub fn raw_feature_names(&self) -> &[String] {
        let skip = usize::from(self.intercept);
        &self.feature_names[skip..]
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    /// Number of rows dropped for missing values during construction.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn m(&self) -> usize {
        self.features.cols()
    }

    pub fn require_overdetermined(&self) -> Result<()> {
        if self.n() < self.m() {
            return Err(Error::InsufficientData {
                rows: self.n(),
                cols: self.m(),
            });
        }
        Ok(())
    }

    /// Row subset, keeping names and flags.
    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.features.row(i).to_vec()).collect();
        let features = if rows.is_empty() {
            Matrix::zeros(0, self.m())
        } else {
            Matrix::from_rows(&rows).expect("rows share a width")
        };
        DesignMatrix {
            features,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            intercept: self.intercept,
            timestamps: if self.timestamps.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.timestamps[i]).collect()
            },
            dropped: 0,
        }
    }
}

pub(crate) fn with_intercept(raw: &[f64], intercept: bool) -> Vec<f64> {
    let mut row = Vec::with_capacity(raw.len() + 1);
    if intercept {
        row.push(1.0);
    }
    row.extend_from_slice(raw);
    row
}

/// Builds Φ and y from the dataset, dropping rows with any missing selected
/// feature or missing target.
pub fn build_design(
    d: &Dataset,
    features: &[Field],
    target: Field,
    intercept: bool,
) -> Result<DesignMatrix> {
    if features.is_empty() {
        return Err(Error::InvalidParameter("feature list is empty".into()));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut timestamps = Vec::new();
    let mut dropped = 0;
    for o in &d.records {
        match (o.features(features), o.get(target)) {
            (Some(x), Some(y)) => {
                rows.push(x);
                targets.push(y);
                timestamps.push(o.timestamp);
            }
            _ => dropped += 1,
        }
    }
    let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    let mut dm = DesignMatrix::from_raw(&rows, targets, &names, intercept)?;
    dm.timestamps = timestamps;
    dm.dropped = dropped;
    dm.require_overdetermined()?;
    Ok(dm)
}
