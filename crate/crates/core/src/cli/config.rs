//! Run configuration: one JSON file plus dotted-name overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clearsky::{SiteLocation, DEFAULT_TURBIDITY};
use crate::data::{parse_timestamp, snap_to_grid, Field, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: String,
    pub end: String,
}

impl Window {
    /// Parsed and snapped endpoints; `start ≤ end` is not required.
    pub fn bounds(&self) -> Result<(NaiveDateTime, NaiveDateTime)> {
        let parse = |s: &str| {
            parse_timestamp(s)
                .map(snap_to_grid)
                .ok_or_else(|| Error::Config(format!("bad window timestamp {s:?}")))
        };
        Ok((parse(&self.start)?, parse(&self.end)?))
    }
}

fn all_predictors() -> Vec<Field> {
    Field::ALL
        .into_iter()
        .filter(|f| *f != Field::SolarIrradiance)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureLists {
    pub point: Vec<Field>,
    pub quantile: Vec<Field>,
    pub bayes: Vec<Field>,
}

impl Default for FeatureLists {
    fn default() -> Self {
        Self {
            point: all_predictors(),
            quantile: all_predictors(),
            bayes: all_predictors(),
        }
    }
}

/// Parameters of the seeded linear-Gaussian generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub slope: f64,
    pub intercept: f64,
    pub noise_std: f64,
    pub n: usize,
    pub seed: u64,
    pub start: String,
    /// Feature the target depends on; the others are independent noise.
    pub driver: Field,
    pub path: PathBuf,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            slope: 2.0,
            intercept: 100.0,
            noise_std: 10.0,
            n: 1000,
            seed: 0,
            start: "2022-01-01 00:00".into(),
            driver: Field::Temp60cm,
            path: PathBuf::from("synthetic.csv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_path: PathBuf,
    /// Extra source-column aliases on top of the canonical names.
    pub schema: BTreeMap<String, Field>,
    pub features: FeatureLists,
    pub target: Field,
    pub intercept: bool,
    pub train_window: Option<Window>,
    pub forecast_window: Option<Window>,
    pub quantiles: Vec<f64>,
    pub prior_std: f64,
    /// `None` uses the sample std of the OLS residuals.
    pub noise_std: Option<f64>,
    /// Half-width multiplier of the error-bar table, in predictive stds.
    pub error_bar_k: f64,
    pub daylight_filter: bool,
    pub clamp_nonnegative: bool,
    pub site: SiteLocation,
    pub turbidity: f64,
    pub output_dir: PathBuf,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::from("data.csv"),
            schema: BTreeMap::new(),
            features: FeatureLists::default(),
            target: Field::SolarIrradiance,
            intercept: true,
            train_window: None,
            forecast_window: None,
            quantiles: vec![0.025, 0.15, 0.5, 0.85, 0.975],
            prior_std: 1.0,
            noise_std: None,
            error_bar_k: 1.0,
            daylight_filter: false,
            clamp_nonnegative: false,
            site: SiteLocation::orlando(),
            turbidity: DEFAULT_TURBIDITY,
            output_dir: PathBuf::from("out"),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (if given), applies overrides in order and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            let file: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            merge(&mut value, file);
        }
        for (key, raw) in parse_overrides(overrides)? {
            set_dotted(&mut value, &key, parse_value(&raw))?;
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        let train = self.train_window.as_ref().map(Window::bounds).transpose()?;
        let forecast = self.forecast_window.as_ref().map(Window::bounds).transpose()?;
        if let Some((s, e)) = train {
            if s > e {
                return Err(Error::Config("train_window starts after it ends".into()));
            }
        }
        // a forecast window with start after end is empty, not an error
        if let (Some((_, train_end)), Some((forecast_start, forecast_end))) = (train, forecast) {
            if forecast_start <= forecast_end && forecast_start <= train_end {
                return Err(Error::Config(
                    "forecast window must start after the train window ends".into(),
                ));
            }
        }
        if !(self.prior_std > 0.0) {
            return Err(Error::Config(format!("prior_std must be > 0, got {}", self.prior_std)));
        }
        if let Some(s) = self.noise_std {
            if !(s > 0.0) {
                return Err(Error::Config(format!("noise_std must be > 0, got {s}")));
            }
        }
        if !(self.error_bar_k >= 0.0) {
            return Err(Error::Config("error_bar_k must be nonnegative".into()));
        }
        if !(1.0..=10.0).contains(&self.turbidity) {
            return Err(Error::Config(format!("turbidity {} outside [1, 10]", self.turbidity)));
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0))
            || self.quantiles.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(format!(
                "quantiles must be strictly increasing inside (0, 1): {:?}",
                self.quantiles
            )));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema::with_aliases(&self.schema)
    }

    pub fn features_for(&self, kind: &str) -> &[Field] {
        match kind {
            "point" => &self.features.point,
            "quantile" => &self.features.quantile,
            _ => &self.features.bayes,
        }
    }
}

/// `--a.b value` and `--a.b=value` pairs, in order.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(Error::Config(format!("expected --<name> override, got {arg:?}")));
        };
        if let Some((k, v)) = flag.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Error::Config(format!("override --{flag} has no value")))?;
            out.push((flag.to_string(), v.clone()));
        }
    }
    Ok(out)
}

/// Recursively overlays `top` onto `base`; non-object values replace.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// JSON literal when the text parses as one, otherwise a string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override name {key:?}")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(Error::Config(format!("override {key:?} descends into a non-object")));
        }
        node = node
            .as_object_mut()
            .expect("checked object")
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override {key:?} descends into a non-object")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
