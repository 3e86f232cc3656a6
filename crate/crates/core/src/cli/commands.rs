//! Command implementations. Each writes its artifacts under the configured
//! output directory and returns the paths it wrote.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use super::config::RunConfig;
use crate::bayes::{error_bars, fit_bayes, BayesModel};
use crate::clearsky::{clear_sky_series, solar_position, write_clear_sky_csv};
use crate::data::{
    build_design, correlation_report, format_timestamp, parse_csv, parse_timestamp, snap_to_grid,
    write_csv, Dataset, Field, Ingested, Observation, STEP_MINUTES,
};
use crate::error::{Error, Result};
use crate::metrics::{score_probabilistic, write_score_table, Forecasts, ScoreReport};
use crate::numfmt::{g17, to_json_string};
use crate::point::{fit_ols, LinearModel};
use crate::quantile::{fit_quantile_set, QuantileModel, QuantileSet, SolverOptions};
use crate::stats::Gaussian1D;

/// Quantile columns always present in a forecast table.
pub const FORECAST_LEVELS: [f64; 5] = [0.025, 0.15, 0.5, 0.85, 0.975];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Point,
    Quantile,
    Bayes,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Point => "point",
            ModelKind::Quantile => "quantile",
            ModelKind::Bayes => "bayes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Point(LinearModel),
    Quantile(QuantileModel),
    Bayes(BayesModel),
}

impl AnyModel {
    /// Reads a model file, telling the kind apart by its JSON keys.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text)?;
        let has = |k: &str| value.get(k).is_some();
        Ok(if has("posterior") {
            AnyModel::Bayes(serde_json::from_value(value)?)
        } else if has("quantiles") {
            AnyModel::Quantile(serde_json::from_value(value)?)
        } else if has("weights") {
            AnyModel::Point(serde_json::from_value(value)?)
        } else {
            return Err(Error::Format(format!("{}: not a model file", path.display())));
        })
    }

    fn feature_names(&self) -> &[String] {
        match self {
            AnyModel::Point(m) => &m.feature_names,
            AnyModel::Quantile(m) => m.feature_names(),
            AnyModel::Bayes(m) => &m.feature_names,
        }
    }

    fn intercept(&self) -> bool {
        match self {
            AnyModel::Point(m) => m.intercept,
            AnyModel::Quantile(m) => m.intercept(),
            AnyModel::Bayes(m) => m.intercept(),
        }
    }

    fn raw_features(&self) -> Result<Vec<Field>> {
        let skip = usize::from(self.intercept());
        self.feature_names()[skip..].iter().map(|n| n.parse()).collect()
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn ingest_file(cfg: &RunConfig, path: &Path) -> Result<Ingested> {
    let file = File::open(path)
        .map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(BufReader::new(file), &cfg.schema())
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    Ok(ingest_file(cfg, &cfg.data_path)?.dataset)
}

fn is_daylight(cfg: &RunConfig, t: NaiveDateTime) -> bool {
    solar_position(&cfg.site, t).zenith < 90.0
}

/// Grid points from `start` to `end` inclusive.
pub fn forecast_grid(start: NaiveDateTime, end: NaiveDateTime) -> Vec<NaiveDateTime> {
    let mut out = Vec::new();
    let mut t = start;
    while t <= end {
        out.push(t);
        t += Duration::minutes(STEP_MINUTES);
    }
    out
}

pub fn ingest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ing = ingest_file(cfg, &cfg.data_path)?;
    let cleaned = cfg.output_dir.join("cleaned.csv");
    let mut w = create(&cleaned)?;
    write_csv(&ing.dataset, &mut w)?;
    w.flush()?;
    let report = cfg.output_dir.join("ingest_report.json");
    write_text(&report, &to_json_string(&ing.report)?)?;
    let mut written = vec![cleaned, report];

    if let Ok(corr) = correlation_report(&ing.dataset, cfg.target) {
        let path = cfg.output_dir.join("correlations.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["feature", "r", "n"])?;
        for c in corr {
            w.write_record([
                c.feature.name().to_string(),
                c.r.map(g17).unwrap_or_default(),
                c.n.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }
    let r = &ing.report;
    println!(
        "rows read {}, kept {}, bad timestamps {}, duplicates {}, bad cells {}, irradiance rejected {}",
        r.rows_read, r.rows_kept, r.bad_timestamps, r.duplicates, r.bad_cells, r.irradiance_rejected
    );
    Ok(written)
}

pub fn train(cfg: &RunConfig, kind: ModelKind, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut data = load_dataset(cfg)?;
    if let Some(w) = &cfg.train_window {
        let (s, e) = w.bounds()?;
        data = data.select_window(s, e);
    }
    if cfg.daylight_filter {
        data = data.filter(|o| is_daylight(cfg, o.timestamp));
    }
    let features = cfg.features_for(kind.name());
    if features.contains(&cfg.target) {
        return Err(Error::Config(format!(
            "target {} is also listed as a feature",
            cfg.target
        )));
    }
    let dm = build_design(&data, features, cfg.target, cfg.intercept)?;
    let json = match kind {
        ModelKind::Point => to_json_string(&fit_ols(&dm)?)?,
        ModelKind::Quantile => {
            to_json_string(&fit_quantile_set(&dm, &cfg.quantiles, &SolverOptions::default())?)?
        }
        ModelKind::Bayes => to_json_string(&fit_bayes(&dm, cfg.prior_std, cfg.noise_std)?)?,
    };
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(format!("model_{}.json", kind.name())));
    write_text(&path, &json)?;
    println!("trained {} model on {} rows ({} dropped)", kind.name(), dm.n(), dm.dropped());
    Ok(vec![path])
}

fn level_column(q: f64) -> String {
    format!("q_{q}")
}

pub fn forecast(cfg: &RunConfig, model_path: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let model = AnyModel::load(model_path)?;
    let window = cfg
        .forecast_window
        .as_ref()
        .ok_or_else(|| Error::Config("forecast_window is required".into()))?;
    let (start, end) = window.bounds()?;
    let data = load_dataset(cfg)?;
    let fields = model.raw_features()?;

    let extra_source: Vec<f64> = match &model {
        AnyModel::Quantile(m) => m.quantiles().to_vec(),
        _ => cfg.quantiles.clone(),
    };
    let mut levels: Vec<f64> = FORECAST_LEVELS.to_vec();
    let mut extra: Vec<f64> = extra_source
        .into_iter()
        .filter(|q| !FORECAST_LEVELS.contains(q))
        .collect();
    extra.sort_by(f64::total_cmp);
    levels.extend(extra);

    let kind = match &model {
        AnyModel::Point(_) => "point",
        AnyModel::Quantile(_) => "quantile",
        AnyModel::Bayes(_) => "bayes",
    };
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(format!("forecast_{kind}.csv")));
    let mut w = csv::Writer::from_writer(create(&path)?);
    let mut header = vec!["timestamp".to_string(), "mean".into(), "std".into()];
    header.extend(levels.iter().map(|&q| level_column(q)));
    w.write_record(&header)?;

    let clamp = |v: f64| if cfg.clamp_nonnegative { v.max(0.0) } else { v };
    let mut bars: Vec<(NaiveDateTime, Gaussian1D)> = Vec::new();
    for t in forecast_grid(start, end) {
        let mut row = vec![String::new(); header.len()];
        row[0] = format_timestamp(t);
        if let Some(x) = data.get(t).and_then(|o| o.features(&fields)) {
            match &model {
                AnyModel::Point(m) => row[1] = g17(clamp(m.predict(&x)?)),
                AnyModel::Bayes(m) => {
                    let g = m.predictive(&x)?;
                    row[1] = g17(clamp(g.mean()));
                    row[2] = g17(g.std());
                    for (i, &q) in levels.iter().enumerate() {
                        row[3 + i] = g17(clamp(g.quantile(q)?));
                    }
                    bars.push((t, g));
                }
                AnyModel::Quantile(m) => {
                    let set = m.predict(&x)?;
                    for (i, &q) in levels.iter().enumerate() {
                        if let Some(v) = set.get(q) {
                            row[3 + i] = g17(clamp(v));
                        }
                    }
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut written = vec![path];

    if let AnyModel::Bayes(_) = model {
        let path = cfg.output_dir.join("error_bars.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["timestamp", "mean", "lower", "upper"])?;
        let gs: Vec<Gaussian1D> = bars.iter().map(|(_, g)| *g).collect();
        for ((t, g), (lo, hi)) in bars.iter().zip(error_bars(&gs, cfg.error_bar_k)) {
            w.write_record([format_timestamp(*t), g17(clamp(g.mean())), g17(clamp(lo)), g17(clamp(hi))])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// One parsed forecast table row; `None` marks an empty cell.
struct ForecastRow {
    timestamp: NaiveDateTime,
    mean: Option<f64>,
    std: Option<f64>,
    quantiles: Vec<Option<f64>>,
}

struct ForecastTable {
    levels: Vec<f64>,
    rows: Vec<ForecastRow>,
}

fn read_forecast_table(path: &Path) -> Result<ForecastTable> {
    let file = File::open(path)
        .map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(ts), Some(mean), Some(std)) = (col("timestamp"), col("mean"), col("std")) else {
        return Err(Error::Format(format!(
            "{}: forecast table needs timestamp, mean and std columns",
            path.display()
        )));
    };
    let mut levels = Vec::new();
    let mut level_cols = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(q) = h.strip_prefix("q_") {
            let q: f64 = q
                .parse()
                .map_err(|_| Error::Format(format!("bad quantile column {h:?}")))?;
            levels.push(q);
            level_cols.push(i);
        }
    }
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let levels: Vec<f64> = order.iter().map(|&i| levels[i]).collect();
    let level_cols: Vec<usize> = order.iter().map(|&i| level_cols[i]).collect();

    let cell = |rec: &csv::StringRecord, i: usize| -> Result<Option<f64>> {
        match rec.get(i).map(str::trim) {
            None | Some("") => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("bad number {s:?} in forecast table"))),
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let raw = rec.get(ts).unwrap_or("");
        let timestamp = parse_timestamp(raw)
            .map(snap_to_grid)
            .ok_or_else(|| Error::Format(format!("bad timestamp {raw:?} in forecast table")))?;
        rows.push(ForecastRow {
            timestamp,
            mean: cell(&rec, mean)?,
            std: cell(&rec, std)?,
            quantiles: level_cols.iter().map(|&i| cell(&rec, i)).collect::<Result<_>>()?,
        });
    }
    Ok(ForecastTable { levels, rows })
}

/// Scores one forecast table against the target column of `actuals`.
fn score_table(cfg: &RunConfig, method: &str, table: &ForecastTable, actuals: &Dataset) -> Result<ScoreReport> {
    let rows: Vec<&ForecastRow> = table
        .rows
        .iter()
        .filter(|r| !cfg.daylight_filter || is_daylight(cfg, r.timestamp))
        .collect();
    let gaussian = rows.iter().any(|r| r.std.is_some());
    let quantile = !gaussian && rows.iter().any(|r| r.quantiles.iter().any(Option::is_some));

    let mut targets = Vec::new();
    let mut gs = Vec::new();
    let mut sets = Vec::new();
    let mut points = Vec::new();
    for r in rows {
        let usable = if gaussian {
            r.mean.is_some() && r.std.is_some()
        } else if quantile {
            r.quantiles.iter().all(Option::is_some)
        } else {
            r.mean.is_some()
        };
        if !usable {
            continue;
        }
        let actual = actuals
            .get(r.timestamp)
            .and_then(|o| o.get(cfg.target))
            .ok_or_else(|| {
                Error::Alignment(format!(
                    "no {} observation at forecast timestamp {}",
                    cfg.target,
                    format_timestamp(r.timestamp)
                ))
            })?;
        targets.push(actual);
        if gaussian {
            gs.push(Gaussian1D::new(r.mean.unwrap_or(0.0), r.std.unwrap_or(0.0))?);
        } else if quantile {
            let mut values: Vec<f64> = r.quantiles.iter().map(|v| v.unwrap_or(0.0)).collect();
            values.sort_by(f64::total_cmp);
            sets.push(QuantileSet {
                levels: table.levels.clone(),
                values,
            });
        } else {
            points.push(r.mean.unwrap_or(0.0));
        }
    }
    if targets.is_empty() {
        return Err(Error::EmptyData(format!("{method}: no scorable forecast rows")));
    }
    let forecasts = if gaussian {
        Forecasts::Gaussian(gs)
    } else if quantile {
        Forecasts::Quantiles(sets)
    } else {
        Forecasts::Point(points)
    };
    score_probabilistic(method, &forecasts, &targets, &cfg.quantiles)
}

pub fn evaluate(cfg: &RunConfig, forecasts: &[PathBuf], actuals: Option<&Path>) -> Result<Vec<PathBuf>> {
    let actuals = ingest_file(cfg, actuals.unwrap_or(&cfg.data_path))?.dataset;
    let mut reports = Vec::new();
    for path in forecasts {
        let method = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "forecast".into());
        let table = read_forecast_table(path)?;
        reports.push(score_table(cfg, &method, &table, &actuals)?);
    }
    let json = cfg.output_dir.join("scores.json");
    write_text(&json, &to_json_string(&reports)?)?;
    let table = cfg.output_dir.join("scores.csv");
    let mut w = create(&table)?;
    write_score_table(&reports, &cfg.quantiles, &mut w)?;
    w.flush()?;
    for r in &reports {
        println!(
            "{}: n {}, rmse {}, crps {}",
            r.method_name,
            r.n,
            r.rmse.map(g17).unwrap_or_else(|| "-".into()),
            r.mean_crps.map(g17).unwrap_or_else(|| "-".into())
        );
    }
    Ok(vec![json, table])
}

/// Seeded linear-Gaussian dataset on the 15-minute grid. The target is
/// `intercept + slope·driver + noise`; every other column is independent.
pub fn synthesize(cfg: &RunConfig) -> Result<Dataset> {
    let s = &cfg.synth;
    if s.driver == cfg.target {
        return Err(Error::Config("synth.driver must differ from the target".into()));
    }
    if !(s.noise_std >= 0.0) || !s.noise_std.is_finite() {
        return Err(Error::Config(format!("synth.noise_std must be >= 0, got {}", s.noise_std)));
    }
    let start = parse_timestamp(&s.start)
        .map(snap_to_grid)
        .ok_or_else(|| Error::Config(format!("bad synth.start {:?}", s.start)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let normal = |rng: &mut ChaCha8Rng, mean: f64, sd: f64| {
        let z: f64 = StandardNormal.sample(rng);
        mean + sd * z
    };
    let mut records = Vec::with_capacity(s.n);
    for i in 0..s.n {
        let mut o = Observation::new(start + Duration::minutes(STEP_MINUTES * i as i64));
        o.temp_2cm = Some(normal(&mut rng, 25.0, 5.0));
        o.temp_10cm = Some(normal(&mut rng, 25.0, 5.0));
        o.temp_60cm = Some(normal(&mut rng, 25.0, 5.0));
        o.rel_humidity = Some(rng.random_range(30.0..100.0));
        o.rainfall = Some(normal(&mut rng, 0.0, 1.0).max(0.0));
        o.wind_speed = Some(normal(&mut rng, 3.0, 2.0).abs());
        o.wind_direction = Some(rng.random_range(0.0..360.0));
        let driver = o.get(s.driver).expect("all columns filled");
        let noise = s.noise_std * normal(&mut rng, 0.0, 1.0);
        o.set(cfg.target, Some(s.intercept + s.slope * driver + noise));
        records.push(o);
    }
    Dataset::new("synthetic", records)
}

pub fn synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let d = synthesize(cfg)?;
    let path = cfg.synth.path.clone();
    let mut w = create(&path)?;
    write_csv(&d, &mut w)?;
    w.flush()?;
    println!("wrote {} synthetic rows", d.len());
    Ok(vec![path])
}

pub fn clearsky(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let window = cfg
        .forecast_window
        .as_ref()
        .ok_or_else(|| Error::Config("forecast_window is required".into()))?;
    let (start, end) = window.bounds()?;
    let points = clear_sky_series(&cfg.site, start, end, cfg.turbidity)?;
    let path = cfg.output_dir.join("clearsky.csv");
    let mut w = create(&path)?;
    write_clear_sky_csv(&points, &mut w)?;
    w.flush()?;
    Ok(vec![path])
}
