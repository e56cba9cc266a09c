use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stockcaster_core::{
    FitScope, GridSpec, HiddenActivation, MeanWindow, ModelConfig, PipelineConfig, TradeOptions,
};

use crate::CliError;

pub const DEFAULT_ENDPOINT: &str = "https://query1.finance.yahoo.com";
pub const ENV_ENDPOINT: &str = "STOCKCASTER_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub mean_window: MeanWindow,
    #[serde(flatten)]
    pub trade: TradeOptions,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            mean_window: MeanWindow::Test,
            trade: TradeOptions::default(),
        }
    }
}

/// Everything a run needs. Every field has a default, so `{}` is a valid
/// config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tickers: Vec<String>,
    /// Sector name to member tickers.
    pub sectors: BTreeMap<String, Vec<String>>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub endpoint: String,
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub backtest: BacktestConfig,
    pub grid: GridSpec,
    pub outdir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tickers: Vec::new(),
            sectors: BTreeMap::new(),
            start: None,
            end: None,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            backtest: BacktestConfig::default(),
            grid: GridSpec::default(),
            outdir: PathBuf::from("out"),
            seed: 42,
            jobs: 1,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tickers: Vec<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub outdir: Option<PathBuf>,
    pub mean_window: Option<MeanWindow>,
    pub fit_range: Option<FitScope>,
    pub exclude_target_feature: bool,
    pub classic_tanh: bool,
    pub epochs: Option<usize>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.tickers.is_empty() {
            self.tickers = o.tickers.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(d) = &o.outdir {
            self.outdir = d.clone();
        }
        if let Some(w) = o.mean_window {
            self.backtest.mean_window = w;
        }
        if let Some(f) = o.fit_range {
            self.pipeline.fit_range = f;
        }
        if o.exclude_target_feature {
            self.pipeline.exclude_target_feature = true;
        }
        if o.classic_tanh {
            self.model.hidden_activation = HiddenActivation::Tanh;
        }
        if let Some(e) = o.epochs {
            self.model.epochs = e;
        }
        if o.start.is_some() {
            self.start = o.start;
        }
        if o.end.is_some() {
            self.end = o.end;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.model_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be >= 1".into()));
        }
        if let Some((name, _)) = self.sectors.iter().find(|(_, t)| t.is_empty()) {
            return Err(CliError::Config(format!("sector `{name}` lists no tickers")));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s >= e {
                return Err(CliError::Config(format!("start {s} is not before end {e}")));
            }
        }
        if self.tickers.iter().any(|t| t.trim().is_empty()) {
            return Err(CliError::Config("empty ticker".into()));
        }
        Ok(())
    }

    /// Model settings with input shape, output head and seed taken from the
    /// rest of the config.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            ..self.model.aligned_with(&self.pipeline)
        }
    }

    /// Explicit tickers, or every sector member when none are given. Sorted
    /// and deduplicated.
    pub fn resolve_tickers(&self) -> Result<Vec<String>, CliError> {
        let mut out: Vec<String> = if self.tickers.is_empty() {
            self.sectors.values().flatten().cloned().collect()
        } else {
            self.tickers.clone()
        };
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(CliError::Config(
                "no tickers: pass --ticker or list tickers/sectors in the config".into(),
            ));
        }
        Ok(out)
    }

    pub fn date_range(&self) -> Result<(NaiveDate, NaiveDate), CliError> {
        match (self.start, self.end) {
            (Some(s), Some(e)) => Ok((s, e)),
            _ => Err(CliError::Config(
                "fetch needs a date range: set start/end in the config or pass --start/--end".into(),
            )),
        }
    }

    /// `STOCKCASTER_ENDPOINT` if set, else the configured endpoint.
    pub fn effective_endpoint(&self) -> String {
        std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| self.endpoint.clone())
    }
}
