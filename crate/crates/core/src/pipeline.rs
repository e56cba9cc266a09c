//! Turns a price series into supervised samples: min-max scaling, a shifted
//! future target, fixed-length windows and the train/test split.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{OhlcvBar, OhlcvSeries};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("scaler fit range is empty")]
    EmptyFitRange,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("series has {len} rows; at least {min} are needed (no_steps + forward_step)")]
    TooShort { len: usize, min: usize },
    #[error("split leaves an empty partition (train {train}, test {test})")]
    EmptyPartition { train: usize, test: usize },
}

/// A column of an [`OhlcvBar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Open,
    High,
    Low,
    Close,
    AdjClose,
    Volume,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::Open,
        Feature::High,
        Feature::Low,
        Feature::Close,
        Feature::AdjClose,
        Feature::Volume,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Open => "open",
            Feature::High => "high",
            Feature::Low => "low",
            Feature::Close => "close",
            Feature::AdjClose => "adj_close",
            Feature::Volume => "volume",
        }
    }

    pub fn value(self, bar: &OhlcvBar) -> f64 {
        match self {
            Feature::Open => bar.open,
            Feature::High => bar.high,
            Feature::Low => bar.low,
            Feature::Close => bar.close,
            Feature::AdjClose => bar.adj_close,
            Feature::Volume => bar.volume as f64,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "adjclose" && *f == Feature::AdjClose))
            .ok_or_else(|| PipelineError::UnknownFeature(s.to_string()))
    }
}

/// Which rows the scaler is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    /// Whole series, then split. Test-period extremes leak into the scaler.
    #[default]
    All,
    /// Only rows that precede the first test target date.
    Train,
}

impl FromStr for FitScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(FitScope::All),
            "train" => Ok(FitScope::Train),
            other => Err(format!("unknown fit range `{other}` (expected all|train)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub no_steps: usize,
    pub forward_step: usize,
    pub scale: bool,
    pub shuffle: bool,
    pub split_by_date: bool,
    pub test_size: f64,
    pub variables: Vec<Feature>,
    /// Drop adj_close from the model inputs while keeping it as the target.
    pub exclude_target_feature: bool,
    pub fit_range: FitScope,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            no_steps: 50,
            forward_step: 1,
            scale: true,
            shuffle: true,
            split_by_date: true,
            test_size: 0.2,
            variables: vec![
                Feature::Open,
                Feature::High,
                Feature::Low,
                Feature::Volume,
                Feature::AdjClose,
            ],
            exclude_target_feature: false,
            fit_range: FitScope::All,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.no_steps < 1 {
            return bad("no_steps must be >= 1");
        }
        if self.forward_step < 1 {
            return bad("forward_step must be >= 1");
        }
        if !(self.test_size > 0.0 && self.test_size < 1.0) {
            return bad("test_size must lie in (0, 1)");
        }
        if self.variables.is_empty() {
            return bad("variables must not be empty");
        }
        if !self.variables.contains(&Feature::AdjClose) {
            return bad("variables must include adj_close");
        }
        if self.exclude_target_feature && self.variables.len() < 2 {
            return bad("excluding adj_close leaves no input features");
        }
        for (i, f) in self.variables.iter().enumerate() {
            if self.variables[..i].contains(f) {
                return Err(PipelineError::InvalidConfig(format!("feature `{f}` listed twice")));
            }
        }
        if self.fit_range == FitScope::Train && !self.split_by_date {
            return bad("fit_range=train requires split_by_date");
        }
        Ok(())
    }

    /// Features fed to the model, in column order.
    pub fn input_features(&self) -> Vec<Feature> {
        self.variables
            .iter()
            .copied()
            .filter(|f| !(self.exclude_target_feature && *f == Feature::AdjClose))
            .collect()
    }

    /// Minimum series length that yields one sample.
    pub fn min_rows(&self) -> usize {
        self.no_steps + self.forward_step
    }

    /// Number of samples windowing `n_rows` produces.
    pub fn sample_count(&self, n_rows: usize) -> usize {
        (n_rows + 1).saturating_sub(self.min_rows())
    }

    /// Test partition size for `m` samples: ⌈test_size·m⌉.
    pub fn test_count(&self, m: usize) -> usize {
        // Guard against 0.2 * 10 = 2.0000000000000004 rounding up to 3.
        let raw = self.test_size * m as f64;
        let nearest = raw.round();
        if (raw - nearest).abs() < 1e-9 {
            nearest as usize
        } else {
            raw.ceil() as usize
        }
    }
}

/// Affine map of one column onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(Self { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }

    /// Constant columns map to 0. Values outside the fitted range extrapolate.
    pub fn transform(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            y * (self.max - self.min) + self.min
        }
    }
}

/// Per-feature min/max pairs, in fitting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<(Feature, MinMax)>,
}

impl ScalerParams {
    /// Pass-through scaler (min 0, max 1) used when scaling is disabled.
    pub fn identity(features: &[Feature]) -> Self {
        Self {
            columns: features
                .iter()
                .map(|&f| (f, MinMax { min: 0.0, max: 1.0 }))
                .collect(),
        }
    }

    pub fn get(&self, feature: Feature) -> Result<MinMax, PipelineError> {
        self.columns
            .iter()
            .find(|(f, _)| *f == feature)
            .map(|(_, m)| *m)
            .ok_or_else(|| PipelineError::UnknownFeature(feature.name().to_string()))
    }

    pub fn features(&self) -> Vec<Feature> {
        self.columns.iter().map(|(f, _)| *f).collect()
    }

    pub fn target(&self) -> Result<MinMax, PipelineError> {
        self.get(Feature::AdjClose)
    }
}

/// Range of rows used to fit a scaler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitRange {
    All,
    /// Rows dated strictly before the cut.
    TrainOnly(NaiveDate),
}

pub fn fit_scaler(
    series: &OhlcvSeries,
    variables: &[Feature],
    range: FitRange,
) -> Result<ScalerParams, PipelineError> {
    let rows: Vec<&OhlcvBar> = match range {
        FitRange::All => series.bars.iter().collect(),
        FitRange::TrainOnly(cut) => series.bars.iter().filter(|b| b.date < cut).collect(),
    };
    if rows.is_empty() {
        return Err(PipelineError::EmptyFitRange);
    }
    let columns = variables
        .iter()
        .map(|&f| {
            let mm = MinMax::fit(rows.iter().map(|b| f.value(b))).expect("rows non-empty");
            (f, mm)
        })
        .collect();
    Ok(ScalerParams { columns })
}

/// Scales every column of `params` over the whole series; shape (N, F).
pub fn apply_scaler(series: &OhlcvSeries, params: &ScalerParams) -> Array2<f64> {
    scaled_table(series, params, &params.features()).expect("features come from params")
}

fn scaled_table(
    series: &OhlcvSeries,
    params: &ScalerParams,
    features: &[Feature],
) -> Result<Array2<f64>, PipelineError> {
    let maps = features
        .iter()
        .map(|&f| params.get(f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Array2::from_shape_fn((series.len(), features.len()), |(r, c)| {
        maps[c].transform(features[c].value(&series.bars[r]))
    }))
}

/// Maps scaled adj_close values back to prices.
pub fn invert_scaler(values: &[f64], params: &ScalerParams) -> Result<Vec<f64>, PipelineError> {
    let mm = params.target()?;
    Ok(values.iter().map(|&v| mm.inverse(v)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSample {
    /// (no_steps, F) block of scaled inputs, oldest row first.
    pub window: Array2<f64>,
    /// Scaled adj_close `forward_step` rows after the window's last row.
    pub target: f64,
    pub window_end_date: NaiveDate,
    pub target_date: NaiveDate,
    pub current_price: f64,
    pub actual_future_price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub samples: Vec<SupervisedSample>,
    pub scaler: ScalerParams,
    pub config: PipelineConfig,
    /// Trailing window with no known target, for the next-day forecast.
    pub last_window: Array2<f64>,
    pub last_window_end: NaiveDate,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    fn with_samples(&self, samples: Vec<SupervisedSample>) -> Self {
        Self {
            samples,
            scaler: self.scaler.clone(),
            config: self.config.clone(),
            last_window: self.last_window.clone(),
            last_window_end: self.last_window_end,
        }
    }

    /// Debug export, one row per sample.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("window_end_date,target_date,current_price,actual_future_price\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                s.window_end_date, s.target_date, s.current_price, s.actual_future_price
            );
        }
        out
    }
}

/// Windows a series into supervised samples.
///
/// Sample `i` covers rows `i..i + no_steps`; its target is the scaled
/// adj_close of row `i + no_steps - 1 + forward_step`.
pub fn make_supervised(
    series: &OhlcvSeries,
    config: &PipelineConfig,
    scaler: &ScalerParams,
) -> Result<SupervisedDataset, PipelineError> {
    config.validate()?;
    let n = series.len();
    if n < config.min_rows() {
        return Err(PipelineError::TooShort {
            len: n,
            min: config.min_rows(),
        });
    }
    let features = config.input_features();
    let table = scaled_table(series, scaler, &features)?;
    let target_map = scaler.target()?;
    let (l, s) = (config.no_steps, config.forward_step);

    let samples = (0..config.sample_count(n))
        .map(|i| {
            let end = i + l - 1;
            let future = end + s;
            SupervisedSample {
                window: table.slice(ndarray::s![i..i + l, ..]).to_owned(),
                target: target_map.transform(series.bars[future].adj_close),
                window_end_date: series.bars[end].date,
                target_date: series.bars[future].date,
                current_price: series.bars[end].adj_close,
                actual_future_price: series.bars[future].adj_close,
            }
        })
        .collect();

    Ok(SupervisedDataset {
        samples,
        scaler: scaler.clone(),
        config: config.clone(),
        last_window: table.slice(ndarray::s![n - l.., ..]).to_owned(),
        last_window_end: series.bars[n - 1].date,
    })
}

/// Splits samples into (train, test).
///
/// By date the test set is the last ⌈test_size·M⌉ samples; otherwise a
/// seeded uniform partition. `shuffle` permutes only the training samples.
/// The test set always stays in date order.
pub fn split(
    dataset: &SupervisedDataset,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(SupervisedDataset, SupervisedDataset), PipelineError> {
    config.validate()?;
    let m = dataset.len();
    let n_test = config.test_count(m);
    if m == 0 || n_test == 0 || n_test >= m {
        return Err(PipelineError::EmptyPartition {
            train: m.saturating_sub(n_test),
            test: n_test.min(m),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train_idx, test_idx): (Vec<usize>, Vec<usize>) = if config.split_by_date {
        ((0..m - n_test).collect(), (m - n_test..m).collect())
    } else {
        let mut all: Vec<usize> = (0..m).collect();
        all.shuffle(&mut rng);
        let mut test = all[..n_test].to_vec();
        let mut train = all[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        (train, test)
    };
    if config.shuffle {
        train_idx.shuffle(&mut rng);
    }

    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset.samples[i].clone()).collect();
    Ok((
        dataset.with_samples(pick(&train_idx)),
        dataset.with_samples(pick(&test_idx)),
    ))
}

/// Everything a training run needs from one series.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: SupervisedDataset,
    pub train: SupervisedDataset,
    pub test: SupervisedDataset,
    pub scaler: ScalerParams,
}

/// Fits the scaler according to `config`, windows the series and splits it.
pub fn prepare(
    series: &OhlcvSeries,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PreparedData, PipelineError> {
    config.validate()?;
    let scaler = fit_for(series, config)?;
    prepare_with_scaler(series, config, &scaler, seed)
}

/// As [`prepare`], reusing an already fitted scaler (e.g. from a checkpoint).
pub fn prepare_with_scaler(
    series: &OhlcvSeries,
    config: &PipelineConfig,
    scaler: &ScalerParams,
    seed: u64,
) -> Result<PreparedData, PipelineError> {
    let dataset = make_supervised(series, config, scaler)?;
    let (train, test) = split(&dataset, config, seed)?;
    Ok(PreparedData {
        dataset,
        train,
        test,
        scaler: scaler.clone(),
    })
}

/// Scaler for `config`; the adj_close target column is always included.
pub fn fit_for(series: &OhlcvSeries, config: &PipelineConfig) -> Result<ScalerParams, PipelineError> {
    let mut features = config.variables.clone();
    if !features.contains(&Feature::AdjClose) {
        features.push(Feature::AdjClose);
    }
    if !config.scale {
        return Ok(ScalerParams::identity(&features));
    }
    let range = match config.fit_range {
        FitScope::All => FitRange::All,
        FitScope::Train => {
            let n = series.len();
            if n < config.min_rows() {
                return Err(PipelineError::TooShort {
                    len: n,
                    min: config.min_rows(),
                });
            }
            let m = config.sample_count(n);
            let n_test = config.test_count(m);
            if n_test == 0 || n_test >= m {
                return Err(PipelineError::EmptyPartition {
                    train: m.saturating_sub(n_test),
                    test: n_test.min(m),
                });
            }
            // First test target row; everything before it is visible to training.
            let first_test = m - n_test;
            let cut_row = first_test + config.no_steps - 1 + config.forward_step;
            FitRange::TrainOnly(series.bars[cut_row].date)
        }
    };
    fit_scaler(series, &features, range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;

    fn series(values: &[f64]) -> OhlcvSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let bars = values
            .iter()
            .enumerate()
            .map(|(i, &v)| OhlcvBar {
                date: start.checked_add_days(Days::new(i as u64)).unwrap(),
                open: v,
                high: v + 1.0,
                low: v - 0.5,
                close: v,
                adj_close: v,
                volume: 1000 + i as u64,
            })
            .collect();
        OhlcvSeries::new("T", bars).unwrap()
    }

    fn cfg(l: usize, s: usize) -> PipelineConfig {
        PipelineConfig {
            no_steps: l,
            forward_step: s,
            ..Default::default()
        }
    }

    #[test]
    fn min_max_endpoints() {
        let s = series(&[2.0, 6.0, 10.0]);
        let p = fit_scaler(&s, &[Feature::AdjClose], FitRange::All).unwrap();
        assert_eq!(p.get(Feature::AdjClose).unwrap(), MinMax { min: 2.0, max: 10.0 });
        let t = apply_scaler(&s, &p);
        assert_eq!(t.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(invert_scaler(&[0.0, 0.5, 1.0], &p).unwrap(), vec![2.0, 6.0, 10.0]);
    }

    #[test]
    fn degenerate_column() {
        let s = series(&[7.0, 7.0, 7.0]);
        let p = fit_scaler(&s, &[Feature::AdjClose], FitRange::All).unwrap();
        let mm = p.target().unwrap();
        assert_eq!(mm.max, mm.min);
        assert!(apply_scaler(&s, &p).iter().all(|&v| v == 0.0));
        assert_eq!(invert_scaler(&[0.0], &p).unwrap(), vec![7.0]);
    }

    #[test]
    fn train_only_fit_extrapolates() {
        let s = series(&[1.0, 2.0, 3.0, 10.0]);
        let cut = s.bars[3].date;
        let p = fit_scaler(&s, &[Feature::AdjClose], FitRange::TrainOnly(cut)).unwrap();
        let scaled = apply_scaler(&s, &p);
        assert_eq!(scaled[[3, 0]], 4.5);
        let first = s.bars[0].date;
        assert_eq!(
            fit_scaler(&s, &[Feature::AdjClose], FitRange::TrainOnly(first)),
            Err(PipelineError::EmptyFitRange)
        );
    }

    #[test]
    fn invert_half_scale() {
        let p = ScalerParams {
            columns: vec![(Feature::AdjClose, MinMax { min: 100.0, max: 300.0 })],
        };
        assert_eq!(invert_scaler(&[0.5], &p).unwrap(), vec![200.0]);
        let missing = ScalerParams { columns: vec![] };
        assert!(matches!(invert_scaler(&[0.5], &missing), Err(PipelineError::UnknownFeature(_))));
    }

    #[test]
    fn window_counts_and_boundary() {
        let vals: Vec<f64> = (0..60).map(|i| 10.0 + i as f64).collect();
        let c = cfg(50, 1);
        let s60 = series(&vals);
        let p = fit_for(&s60, &c).unwrap();
        assert_eq!(make_supervised(&s60, &c, &p).unwrap().len(), 10);

        let s51 = series(&vals[..51]);
        let p51 = fit_for(&s51, &c).unwrap();
        let d = make_supervised(&s51, &c, &p51).unwrap();
        assert_eq!(d.len(), 1);
        let mm = p51.target().unwrap();
        assert_eq!(d.samples[0].target, mm.transform(s51.bars[50].adj_close));
        assert_eq!(d.samples[0].current_price, s51.bars[49].adj_close);
        assert_eq!(d.samples[0].actual_future_price, s51.bars[50].adj_close);

        let s50 = series(&vals[..50]);
        assert_eq!(
            make_supervised(&s50, &c, &p51).unwrap_err(),
            PipelineError::TooShort { len: 50, min: 51 }
        );
    }

    #[test]
    fn window_shape_and_last_window() {
        let vals: Vec<f64> = (0..12).map(|i| 1.0 + i as f64).collect();
        let s = series(&vals);
        let c = cfg(4, 2);
        let p = fit_for(&s, &c).unwrap();
        let d = make_supervised(&s, &c, &p).unwrap();
        assert_eq!(d.samples[0].window.dim(), (4, 5));
        assert_eq!(d.last_window.dim(), (4, 5));
        assert_eq!(d.last_window_end, s.bars[11].date);
        // adj_close is the last configured column
        let mm = p.target().unwrap();
        assert_eq!(d.last_window[[3, 4]], mm.transform(12.0));
        assert_eq!(d.samples[0].target_date, s.bars[5].date);
    }

    #[test]
    fn exclude_target_feature_drops_column() {
        let vals: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let s = series(&vals);
        let c = PipelineConfig {
            exclude_target_feature: true,
            ..cfg(5, 1)
        };
        let p = fit_for(&s, &c).unwrap();
        let d = make_supervised(&s, &c, &p).unwrap();
        assert_eq!(d.samples[0].window.ncols(), 4);
        assert!(p.target().is_ok());
    }

    #[test]
    fn by_date_split_is_a_cut() {
        let vals: Vec<f64> = (0..14).map(|i| 1.0 + i as f64).collect();
        let s = series(&vals);
        let c = PipelineConfig { shuffle: false, ..cfg(4, 1) };
        let p = fit_for(&s, &c).unwrap();
        let d = make_supervised(&s, &c, &p).unwrap();
        assert_eq!(d.len(), 10);
        let (train, test) = split(&d, &c, 7).unwrap();
        assert_eq!(train.samples, d.samples[..8].to_vec());
        assert_eq!(test.samples, d.samples[8..].to_vec());
    }

    #[test]
    fn random_split_is_seeded() {
        let vals: Vec<f64> = (0..14).map(|i| 1.0 + i as f64).collect();
        let s = series(&vals);
        let c = PipelineConfig { split_by_date: false, ..cfg(4, 1) };
        let p = fit_for(&s, &c).unwrap();
        let d = make_supervised(&s, &c, &p).unwrap();
        let a = split(&d, &c, 42).unwrap();
        let b = split(&d, &c, 42).unwrap();
        assert_eq!(a.0.samples, b.0.samples);
        assert_eq!(a.1.samples, b.1.samples);
        assert_eq!(a.1.len(), 2);
        assert!(a.1.samples.windows(2).all(|w| w[0].target_date < w[1].target_date));
    }

    #[test]
    fn test_count_uses_ceiling() {
        let c = PipelineConfig::default();
        assert_eq!(c.test_count(10), 2);
        assert_eq!(c.test_count(11), 3);
        assert_eq!(c.test_count(1), 1);
    }

    #[test]
    fn empty_partition_rejected() {
        let vals: Vec<f64> = (0..5).map(|i| 1.0 + i as f64).collect();
        let s = series(&vals);
        let c = cfg(4, 1);
        let p = fit_for(&s, &c).unwrap();
        let d = make_supervised(&s, &c, &p).unwrap();
        assert_eq!(d.len(), 1);
        assert!(matches!(split(&d, &c, 0), Err(PipelineError::EmptyPartition { .. })));
    }

    #[test]
    fn train_fit_range_excludes_test_rows() {
        let mut vals: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        vals[19] = 1000.0;
        let s = series(&vals);
        let c = PipelineConfig { fit_range: FitScope::Train, ..cfg(5, 1) };
        let p = fit_for(&s, &c).unwrap();
        assert!(p.target().unwrap().max < 1000.0);
        let all = fit_for(&s, &cfg(5, 1)).unwrap();
        assert_eq!(all.target().unwrap().max, 1000.0);
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.test_size = 1.0;
        assert!(c.validate().is_err());
        let c = PipelineConfig { variables: vec![Feature::Open], ..Default::default() };
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            fit_range: FitScope::Train,
            split_by_date: false,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert_eq!("adj_close".parse::<Feature>().unwrap(), Feature::AdjClose);
        assert!("vwap".parse::<Feature>().is_err());
    }

    #[test]
    fn unscaled_mode_is_identity() {
        let vals: Vec<f64> = (0..10).map(|i| 100.0 + i as f64).collect();
        let s = series(&vals);
        let c = PipelineConfig { scale: false, ..cfg(3, 1) };
        let p = fit_for(&s, &c).unwrap();
        let d = make_supervised(&s, &c, &p).unwrap();
        assert_eq!(d.samples[0].target, 103.0);
    }
}
