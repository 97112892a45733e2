//! Run configuration: a versioned TOML document.

use std::path::{Path, PathBuf};

use lsmnet_core::instruments::{every, OptionType, RegressionSet};
use lsmnet_core::nn::{Activation, TrainConfig};
use lsmnet_core::{Instrument, LsmConfig, ModelParams, Portfolio, TimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// A value given once for all assets or per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAsset {
    All(f64),
    Each(Vec<f64>),
}

impl PerAsset {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerAsset::All(x) => Ok(vec![*x; n]),
            PerAsset::Each(v) if v.len() == n => Ok(v.clone()),
            PerAsset::Each(v) => Err(invalid(
                path,
                format!("expected {n} values (one per spot), got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub rate: f64,
    #[serde(default = "zero_per_asset")]
    pub dividends: PerAsset,
    pub vols: PerAsset,
    pub spots: Vec<f64>,
}

fn zero_per_asset() -> PerAsset {
    PerAsset::All(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Years.
    pub maturity: f64,
    /// Number of equal steps between 0 and maturity.
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    AmericanPut,
    CallOnMin,
    CallOnMax,
    EuropeanCall,
    EuropeanPut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionSpec {
    #[default]
    All,
    InTheMoney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub label: String,
    pub kind: KindSpec,
    pub strike: f64,
    pub underlyings: Vec<usize>,
    /// Grid steps between exercise dates; ignored for European kinds.
    #[serde(default = "one")]
    pub exercise_every: usize,
    #[serde(default)]
    pub regression: RegressionSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationSpec {
    #[default]
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub activation: ActivationSpec,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub tolerance: f64,
    pub patience: usize,
    pub init_scale: f64,
    pub normalize_inputs: bool,
    pub normalize_targets: bool,
    pub refit_output: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            hidden: d.hidden,
            activation: ActivationSpec::Sigmoid,
            learning_rate: d.learning_rate,
            lr_decay: d.lr_decay,
            max_epochs: d.max_epochs,
            batch_size: d.batch_size,
            tolerance: d.tolerance,
            patience: d.patience,
            init_scale: d.init_scale,
            normalize_inputs: d.normalize_inputs,
            normalize_targets: d.normalize_targets,
            refit_output: d.refit_output,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            activation: match self.activation {
                ActivationSpec::Sigmoid => Activation::Sigmoid,
                ActivationSpec::Tanh => Activation::Tanh,
            },
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            tolerance: self.tolerance,
            patience: self.patience,
            init_scale: self.init_scale,
            normalize_inputs: self.normalize_inputs,
            normalize_targets: self.normalize_targets,
            refit_output: self.refit_output,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsmSection {
    pub outer_paths: usize,
    pub inner_paths: usize,
    pub fresh_paths_per_date: bool,
    pub warm_start: bool,
    pub seed: u64,
    pub train: TrainSection,
}

impl Default for LsmSection {
    fn default() -> Self {
        let d = LsmConfig::default();
        LsmSection {
            outer_paths: d.outer_paths,
            inner_paths: d.inner_paths,
            fresh_paths_per_date: d.fresh_paths_per_date,
            warm_start: d.warm_start,
            seed: 1,
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PricingSection {
    pub paths: usize,
    pub seed: u64,
}

impl Default for PricingSection {
    fn default() -> Self {
        PricingSection {
            paths: 1_000_000,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PnlSection {
    /// Horizons in years; each must be a grid date.
    pub horizons: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub quantiles: Vec<f64>,
    /// Rows per CDF table; 0 writes every sample.
    pub cdf_points: usize,
    pub write_samples: bool,
}

impl Default for PnlSection {
    fn default() -> Self {
        PnlSection {
            horizons: Vec::new(),
            paths: 1_000_000,
            seed: 3,
            quantiles: vec![0.01, 0.10, 0.50, 0.90, 0.99],
            cdf_points: 1000,
            write_samples: false,
        }
    }
}

/// Sizes for the published-benchmark runs; the cases themselves are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    pub outer_paths: usize,
    pub inner_paths: usize,
    pub pricing_paths: usize,
    pub tree_steps: usize,
    pub seed: u64,
    /// Spots of the dividend-free put series to run (published: 90, 100, 110).
    pub put_spots: Vec<f64>,
    pub dividend_put: bool,
    /// (assets, spot) rows of the Bermudan max-call table to run.
    pub max_call_assets: Vec<usize>,
    pub max_call_spots: Vec<f64>,
    pub train: TrainSection,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            outer_paths: 20_000,
            inner_paths: 16,
            pricing_paths: 1_000_000,
            tree_steps: 20_000,
            seed: 11,
            put_spots: vec![100.0],
            dividend_put: true,
            max_call_assets: vec![2, 3],
            max_call_spots: vec![100.0],
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Multiplier applied to reported prices and P&L (e.g. 100 for a
    /// notional of 100 on unit spots).
    pub scale: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelSection,
    pub grid: GridSection,
    pub instruments: Vec<InstrumentSpec>,
    #[serde(default)]
    pub lsm: LsmSection,
    #[serde(default)]
    pub pricing: PricingSection,
    #[serde(default)]
    pub pnl: PnlSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSection>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_paths(path: &str, n: usize) -> Result<(), ConfigError> {
    if n == 0 {
        return Err(invalid(path, "must be >= 1"));
    }
    Ok(())
}

fn check_train(path: &str, t: &TrainSection) -> Result<(), ConfigError> {
    t.to_train_config(0)
        .validate()
        .map_err(|e| invalid(path, e.to_string()))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid(
                "version",
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    self.version
                ),
            ));
        }
        self.model_params()?;
        let grid = self.time_grid()?;
        if self.instruments.is_empty() {
            return Err(invalid(
                "instruments",
                "at least one instrument is required",
            ));
        }
        let d = self.model.spots.len();
        for (idx, inst) in self.instruments.iter().enumerate() {
            let at = |field: &str| format!("instruments[{idx}].{field}");
            if let Some(&bad) = inst.underlyings.iter().find(|&&u| u >= d) {
                return Err(invalid(
                    at("underlyings"),
                    format!("asset {bad} does not exist ({d} spots given)"),
                ));
            }
            if inst.exercise_every == 0 || inst.exercise_every > self.grid.steps {
                return Err(invalid(
                    at("exercise_every"),
                    format!("must be in 1..={}", self.grid.steps),
                ));
            }
            if self.instruments[..idx]
                .iter()
                .any(|o| o.label == inst.label)
            {
                return Err(invalid(
                    at("label"),
                    format!("duplicate label {:?}", inst.label),
                ));
            }
            if inst.label.is_empty() || inst.label.contains([',', '\n', '"']) {
                return Err(invalid(
                    at("label"),
                    "must be non-empty without commas, quotes or newlines",
                ));
            }
            self.instrument(idx).map_err(|e| match e {
                ConfigError::Invalid { message, .. } => invalid(at("kind"), message),
                other => other,
            })?;
        }
        check_paths("lsm.outer_paths", self.lsm.outer_paths)?;
        check_paths("lsm.inner_paths", self.lsm.inner_paths)?;
        check_train("lsm.train", &self.lsm.train)?;
        check_paths("pricing.paths", self.pricing.paths)?;
        check_paths("pnl.paths", self.pnl.paths)?;
        for (i, &h) in self.pnl.horizons.iter().enumerate() {
            if Self::horizon_index(&grid, h).is_none() {
                return Err(invalid(
                    format!("pnl.horizons[{i}]"),
                    format!(
                        "{h} is not a grid date (dates are multiples of {})",
                        self.grid.maturity / self.grid.steps as f64
                    ),
                ));
            }
        }
        for (i, &p) in self.pnl.quantiles.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid(
                    format!("pnl.quantiles[{i}]"),
                    format!("{p} is outside (0, 1)"),
                ));
            }
        }
        if !(self.output.scale.is_finite() && self.output.scale > 0.0) {
            return Err(invalid("output.scale", "must be finite and > 0"));
        }
        if let Some(b) = &self.benchmark {
            check_paths("benchmark.outer_paths", b.outer_paths)?;
            check_paths("benchmark.inner_paths", b.inner_paths)?;
            check_paths("benchmark.pricing_paths", b.pricing_paths)?;
            check_paths("benchmark.tree_steps", b.tree_steps)?;
            check_train("benchmark.train", &b.train)?;
            for (i, s) in b.put_spots.iter().enumerate() {
                if !crate::benchmark::PUT_SERIES
                    .iter()
                    .any(|c| c.spot == *s && c.dividend == 0.0)
                {
                    return Err(invalid(
                        format!("benchmark.put_spots[{i}]"),
                        format!("no published series for spot {s}"),
                    ));
                }
            }
            for (i, a) in b.max_call_assets.iter().enumerate() {
                if !crate::benchmark::MAX_CALL_ROWS
                    .iter()
                    .any(|r| r.assets == *a)
                {
                    return Err(invalid(
                        format!("benchmark.max_call_assets[{i}]"),
                        format!("no published rows for {a} assets"),
                    ));
                }
            }
            for (i, s) in b.max_call_spots.iter().enumerate() {
                if !crate::benchmark::MAX_CALL_ROWS.iter().any(|r| r.spot == *s) {
                    return Err(invalid(
                        format!("benchmark.max_call_spots[{i}]"),
                        format!("no published rows for spot {s}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let d = self.model.spots.len();
        let dividends = self.model.dividends.expand(d, "model.dividends")?;
        let vols = self.model.vols.expand(d, "model.vols")?;
        ModelParams::new(self.model.rate, dividends, vols, self.model.spots.clone())
            .map_err(|e| invalid("model", e.to_string()))
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::uniform(self.grid.maturity, self.grid.steps)
            .map_err(|e| invalid("grid", e.to_string()))
    }

    fn instrument(&self, idx: usize) -> Result<Instrument, ConfigError> {
        let spec = &self.instruments[idx];
        let last = self.grid.steps;
        let label = spec.label.clone();
        let single = || -> Result<usize, ConfigError> {
            match spec.underlyings.as_slice() {
                [u] => Ok(*u),
                _ => Err(invalid("", "needs exactly one underlying")),
            }
        };
        let built = match spec.kind {
            KindSpec::AmericanPut => Instrument::american_put(
                label,
                spec.strike,
                single()?,
                every(spec.exercise_every, last),
            ),
            KindSpec::CallOnMin => {
                Instrument::call_on_min(label, spec.strike, spec.underlyings.clone(), last)
            }
            KindSpec::CallOnMax => Instrument::call_on_max(
                label,
                spec.strike,
                spec.underlyings.clone(),
                every(spec.exercise_every, last),
            ),
            KindSpec::EuropeanCall => {
                Instrument::european(label, OptionType::Call, spec.strike, single()?, last)
            }
            KindSpec::EuropeanPut => {
                Instrument::european(label, OptionType::Put, spec.strike, single()?, last)
            }
        }
        .map_err(|e| invalid("", e.to_string()))?;
        Ok(match spec.regression {
            RegressionSpec::All => built,
            RegressionSpec::InTheMoney => built.with_regression(RegressionSet::InTheMoney),
        })
    }

    pub fn portfolio(&self) -> Result<Portfolio, ConfigError> {
        let instruments = (0..self.instruments.len())
            .map(|i| self.instrument(i))
            .collect::<Result<Vec<_>, _>>()?;
        Portfolio::new(instruments, self.time_grid()?, self.model_params()?)
            .map_err(|e| invalid("instruments", e.to_string()))
    }

    pub fn lsm_config(&self) -> LsmConfig {
        LsmConfig {
            outer_paths: self.lsm.outer_paths,
            inner_paths: self.lsm.inner_paths,
            train: self.lsm.train.to_train_config(self.lsm.seed),
            seed: self.lsm.seed,
            fresh_paths_per_date: self.lsm.fresh_paths_per_date,
            warm_start: self.lsm.warm_start,
        }
    }

    fn horizon_index(grid: &TimeGrid, t: f64) -> Option<usize> {
        grid.find(t, 1e-6 * grid.maturity().max(1.0))
    }

    /// Grid indices of the configured P&L horizons.
    pub fn horizon_indices(&self) -> Result<Vec<usize>, ConfigError> {
        let grid = self.time_grid()?;
        self.pnl
            .horizons
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                Self::horizon_index(&grid, h)
                    .ok_or_else(|| invalid(format!("pnl.horizons[{i}]"), "not a grid date"))
            })
            .collect()
    }

    /// `--seed N` sets the training, pricing and P&L seeds to N, N+1, N+2.
    pub fn override_seed(&mut self, seed: u64) {
        self.lsm.seed = seed;
        self.pricing.seed = seed.wrapping_add(1);
        self.pnl.seed = seed.wrapping_add(2);
        if let Some(b) = &mut self.benchmark {
            b.seed = seed.wrapping_add(3);
        }
    }

    /// `--paths N` sets the pricing and P&L path counts.
    pub fn override_paths(&mut self, paths: usize) {
        self.pricing.paths = paths;
        self.pnl.paths = paths;
        if let Some(b) = &mut self.benchmark {
            b.pricing_paths = paths;
        }
    }

    /// SHA-256 of the canonical (re-serialised) configuration, so overrides
    /// are part of the fingerprint.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("configuration serialises");
        hex(&Sha256::digest(canonical.as_bytes()))
    }

    pub fn seeds_tag(&self) -> String {
        format!(
            "lsm={} pricing={} pnl={}",
            self.lsm.seed, self.pricing.seed, self.pnl.seed
        )
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
