use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use stockcaster_core::neuralnet::{huber_loss, predict_scaled};
use stockcaster_core::{
    compute_metrics, fetch_history, grid_search, init_params, invert_scaler,
    load_checkpoint_expecting, mean_price, predict_next, prepare, prepare_with_scaler, rank_sectors,
    read_csv, save_checkpoint, sector_aggregate, simulate_trades, train, validate_series,
    write_csv, Checkpoint, ForecastFigures, GridRow, MeanWindow, OhlcvSeries, PreparedData,
    SectorReport, StockSummary, TradeInput, TradeMetrics, TradeRecord, TrainHistory,
};

use crate::config::RunConfig;
use crate::CliError;

/// Where every artifact of a run lives under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-&^=".contains(c) { c } else { '_' })
        .collect()
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn at(&self, dir: &str, name: &str, suffix: &str) -> PathBuf {
        self.root.join(dir).join(format!("{}{suffix}", file_stem(name)))
    }

    pub fn data(&self, ticker: &str) -> PathBuf {
        self.at("data", ticker, ".csv")
    }

    pub fn checkpoint(&self, ticker: &str) -> PathBuf {
        self.at("models", ticker, ".ckpt")
    }

    pub fn history(&self, ticker: &str) -> PathBuf {
        self.at("models", ticker, ".history.csv")
    }

    pub fn metrics(&self, ticker: &str) -> PathBuf {
        self.at("backtest", ticker, ".metrics.csv")
    }

    pub fn predictions(&self, ticker: &str) -> PathBuf {
        self.at("backtest", ticker, ".predictions.csv")
    }

    pub fn sector(&self, sector: &str) -> PathBuf {
        self.at("sectors", sector, ".csv")
    }

    pub fn ranking(&self) -> PathBuf {
        self.root.join("sectors").join("ranking.csv")
    }

    pub fn prices(&self, ticker: &str) -> PathBuf {
        self.at("plots", ticker, ".prices.csv")
    }

    pub fn loss(&self, ticker: &str) -> PathBuf {
        self.at("plots", ticker, ".loss.csv")
    }

    pub fn grid(&self, ticker: &str) -> PathBuf {
        self.at("grid", ticker, ".csv")
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

fn read_file(path: &Path, what: &'static str) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput {
            what,
            path: path.to_path_buf(),
        });
    }
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `f` over `items` on up to `jobs` threads. Results keep input order.
pub fn run_parallel<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let idx = {
                    let mut n = next.lock().expect("job queue");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(item) = items.get(idx) else { break };
                let r = f(item);
                *slots[idx].lock().expect("job slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("job slot").expect("every job ran"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub dropped: usize,
}

pub fn fetch_one(cfg: &RunConfig, layout: &Layout, ticker: &str, endpoint: &str) -> Result<FetchSummary, CliError> {
    let (start, end) = cfg.date_range()?;
    let fetched = fetch_history(ticker, start, end, endpoint)?;
    let (series, report) = validate_series(&fetched.series);
    for d in &report.dropped {
        log::warn!("{ticker}: dropped {}: {}", d.date, d.reason);
    }
    if series.is_empty() {
        return Err(CliError::MarketData(stockcaster_core::MarketDataError::EmptySeries(
            ticker.to_string(),
        )));
    }
    let path = layout.data(ticker);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write_csv(&series, &path)?;
    Ok(FetchSummary {
        path,
        rows: series.len(),
        dropped: report.dropped_count() + fetched.missing_adj_close,
    })
}

pub fn load_series(layout: &Layout, ticker: &str) -> Result<OhlcvSeries, CliError> {
    let path = layout.data(ticker);
    if !path.exists() {
        return Err(CliError::MissingInput { what: "data file", path });
    }
    Ok(read_csv(&path)?)
}

pub fn train_one(cfg: &RunConfig, layout: &Layout, ticker: &str) -> Result<TrainHistory, CliError> {
    let series = load_series(layout, ticker)?;
    let prepared = prepare(&series, &cfg.pipeline, cfg.seed)?;
    let model = cfg.model_config();
    let params = init_params(&model, cfg.seed)?;
    let (params, history) = train(&model, params, &prepared.train.samples, &prepared.test.samples, cfg.seed)?;
    let checkpoint = Checkpoint {
        model,
        pipeline: cfg.pipeline.clone(),
        seed: cfg.seed,
        params,
        scaler: prepared.scaler,
    };
    save_checkpoint(&checkpoint, &layout.checkpoint(ticker))?;
    write_file(&layout.history(ticker), &history.to_csv_string())?;
    Ok(history)
}

/// A trained model with the data it was trained on, split the same way.
pub struct LoadedModel {
    pub checkpoint: Checkpoint,
    pub series: OhlcvSeries,
    pub prepared: PreparedData,
}

pub fn load_model(cfg: &RunConfig, layout: &Layout, ticker: &str) -> Result<LoadedModel, CliError> {
    let series = load_series(layout, ticker)?;
    let path = layout.checkpoint(ticker);
    if !path.exists() {
        return Err(CliError::MissingInput { what: "checkpoint", path });
    }
    let checkpoint = load_checkpoint_expecting(&path, &cfg.model_config())?;
    if checkpoint.pipeline != cfg.pipeline || checkpoint.seed != cfg.seed {
        log::info!("{ticker}: using the pipeline settings and seed stored in the checkpoint");
    }
    let prepared = prepare_with_scaler(&series, &checkpoint.pipeline, &checkpoint.scaler, checkpoint.seed)?;
    Ok(LoadedModel {
        checkpoint,
        series,
        prepared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutcome {
    pub metrics: TradeMetrics,
    pub trades: Vec<TradeRecord>,
}

pub fn predictions_csv(trades: &[TradeRecord]) -> String {
    let mut out = String::from("date,current_price,actual_future,predicted_future,side,profit\n");
    for t in trades {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.date, t.current_price, t.actual_future_price, t.predicted_future_price, t.side, t.profit
        );
    }
    out
}

pub fn backtest_one(cfg: &RunConfig, layout: &Layout, ticker: &str) -> Result<BacktestOutcome, CliError> {
    let LoadedModel {
        checkpoint: ck,
        series,
        prepared,
    } = load_model(cfg, layout, ticker)?;
    let test = &prepared.test.samples;
    let scaled = predict_scaled(&ck.model, &ck.params, test)?;
    let targets: Vec<f64> = test.iter().map(|s| s.target).collect();
    let (huber, _) = huber_loss(&scaled, &targets, ck.model.huber_delta)?;
    let predicted = invert_scaler(&scaled, &ck.scaler)?;

    let inputs: Vec<TradeInput> = test
        .iter()
        .map(|s| TradeInput {
            date: s.window_end_date,
            current_price: s.current_price,
            actual_future_price: s.actual_future_price,
        })
        .collect();
    let trades = simulate_trades(&inputs, &predicted, &cfg.backtest.trade)?;
    let mean = match cfg.backtest.mean_window {
        MeanWindow::Test => mean_price(&test.iter().map(|s| s.actual_future_price).collect::<Vec<_>>())?,
        MeanWindow::Full => mean_price(&series.adj_close())?,
    };
    let next = predict_next(&ck.model, &ck.params, &prepared.dataset)?;
    let metrics = compute_metrics(
        &trades,
        mean,
        ForecastFigures {
            huber_loss_scaled: huber,
            next_day_predicted_price: next,
        },
    )?;
    write_file(&layout.metrics(ticker), &metrics.to_csv_string())?;
    write_file(&layout.predictions(ticker), &predictions_csv(&trades))?;
    Ok(BacktestOutcome { metrics, trades })
}

/// Stored metrics when present, otherwise a fresh backtest.
pub fn metrics_for(cfg: &RunConfig, layout: &Layout, ticker: &str) -> Result<TradeMetrics, CliError> {
    let path = layout.metrics(ticker);
    if path.exists() {
        let text = read_file(&path, "metrics file")?;
        return Ok(TradeMetrics::from_csv_str(&text)?);
    }
    Ok(backtest_one(cfg, layout, ticker)?.metrics)
}

#[derive(Debug)]
pub struct SectorRun {
    pub ranked: Vec<SectorReport>,
    pub failures: Vec<(String, CliError)>,
}

pub fn sector_all(cfg: &RunConfig, layout: &Layout) -> Result<SectorRun, CliError> {
    if cfg.sectors.is_empty() {
        return Err(CliError::Config("the sector command needs `sectors` in the config".into()));
    }
    let tickers: Vec<String> = cfg
        .sectors
        .values()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let results = run_parallel(&tickers, cfg.jobs, |t| metrics_for(cfg, layout, t));
    let mut metrics = BTreeMap::new();
    let mut failures = Vec::new();
    for (t, r) in tickers.into_iter().zip(results) {
        match r {
            Ok(m) => {
                metrics.insert(t, m);
            }
            Err(e) => failures.push((t, e)),
        }
    }

    let mut reports = Vec::new();
    for (name, members) in &cfg.sectors {
        let summaries: Vec<StockSummary> = members
            .iter()
            .filter_map(|t| metrics.get(t).map(|m| StockSummary::from_metrics(t.clone(), m)))
            .collect();
        if summaries.len() < members.len() {
            log::warn!("sector {name}: {} of {} stocks available", summaries.len(), members.len());
        }
        if summaries.is_empty() {
            continue;
        }
        let report = sector_aggregate(name.clone(), summaries)?;
        write_file(&layout.sector(name), &report.to_csv_string())?;
        reports.push(report);
    }
    let ranked = rank_sectors(reports);
    write_file(&layout.ranking(), &crate::render::ranking_csv(&ranked))?;
    Ok(SectorRun { ranked, failures })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSummary {
    pub rows: usize,
    pub predicted_rows: usize,
    pub epochs: usize,
}

pub fn plotdata_one(
    cfg: &RunConfig,
    layout: &Layout,
    ticker: &str,
    predict_train: bool,
) -> Result<PlotSummary, CliError> {
    let history = read_file(&layout.history(ticker), "training history")?;
    let LoadedModel {
        checkpoint: ck,
        prepared,
        ..
    } = load_model(cfg, layout, ticker)?;

    let samples = &prepared.dataset.samples;
    let to_predict: Vec<_> = if predict_train {
        samples.clone()
    } else {
        prepared.test.samples.clone()
    };
    let scaled = predict_scaled(&ck.model, &ck.params, &to_predict)?;
    let predicted = invert_scaler(&scaled, &ck.scaler)?;
    let by_date: BTreeMap<_, f64> = to_predict
        .iter()
        .map(|s| s.target_date)
        .zip(predicted)
        .collect();

    let mut out = String::from("date,actual,predicted\n");
    let mut predicted_rows = 0;
    for s in samples {
        match by_date.get(&s.target_date) {
            Some(p) => {
                predicted_rows += 1;
                let _ = writeln!(out, "{},{},{}", s.target_date, s.actual_future_price, p);
            }
            None => {
                let _ = writeln!(out, "{},{},", s.target_date, s.actual_future_price);
            }
        }
    }
    write_file(&layout.prices(ticker), &out)?;
    write_file(&layout.loss(ticker), &history)?;
    Ok(PlotSummary {
        rows: samples.len(),
        predicted_rows,
        epochs: history.lines().count().saturating_sub(1),
    })
}

pub fn gridsearch_one(cfg: &RunConfig, layout: &Layout, ticker: &str) -> Result<Vec<GridRow>, CliError> {
    let series = load_series(layout, ticker)?;
    let prepared = prepare(&series, &cfg.pipeline, cfg.seed)?;
    let rows = grid_search(
        &cfg.model_config(),
        &cfg.grid,
        &prepared.train.samples,
        &prepared.test.samples,
        cfg.seed,
        cfg.jobs,
    )?;
    let mut out = format!("{}\n", GridRow::csv_header());
    for r in &rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    write_file(&layout.grid(ticker), &out)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_paths() {
        let l = Layout::new("/o");
        assert_eq!(l.data("M&M.NS"), PathBuf::from("/o/data/M&M.NS.csv"));
        assert_eq!(l.checkpoint("A/B"), PathBuf::from("/o/models/A_B.ckpt"));
        assert_eq!(l.ranking(), PathBuf::from("/o/sectors/ranking.csv"));
    }

    #[test]
    fn parallel_keeps_order() {
        let items: Vec<u64> = (0..23).collect();
        let a = run_parallel(&items, 1, |x| x * x);
        let b = run_parallel(&items, 5, |x| x * x);
        assert_eq!(a, b);
        assert!(run_parallel(&Vec::<u64>::new(), 3, |x| *x).is_empty());
    }

    #[test]
    fn missing_inputs_name_paths() {
        let dir = tempfile::tempdir().unwrap();
        let layout = Layout::new(dir.path());
        let cfg = RunConfig::default();
        let err = train_one(&cfg, &layout, "ZZZ").unwrap_err();
        assert!(err.to_string().contains("data/ZZZ.csv"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }
}
