//! The `stockcaster` command line: fetch, train, backtest, sector, plotdata
//! and gridsearch over a JSON run config.
//!
//! Exit codes: 0 on success, 1 when any ticker fails, 2 on a configuration
//! error.

pub mod commands;
pub mod config;
pub mod render;

use std::io::Write;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use stockcaster_core::{
    BacktestError, CheckpointError, FitScope, MarketDataError, MeanWindow, NetError, PipelineError,
};
use thiserror::Error;

use commands::Layout;
use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing {what}: expected {}", path.display())]
    MissingInput { what: &'static str, path: PathBuf },
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stockcaster", version, about = "Next-day stock price forecasting and backtesting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// JSON run config; defaults apply to every missing field.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ticker(s) to process; repeat or comma-separate.
    #[arg(long = "ticker", global = true, value_delimiter = ',')]
    pub tickers: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Concurrent per-ticker jobs (grid cells for gridsearch).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub outdir: Option<PathBuf>,
    /// Prices averaged for the profit ratio: test or full.
    #[arg(long, global = true)]
    pub mean_window: Option<MeanWindow>,
    /// Rows the scaler is fitted on: all or train.
    #[arg(long, global = true)]
    pub fit_range: Option<FitScope>,
    /// Keep adj_close as the target only, not as an input.
    #[arg(long, global = true)]
    pub exclude_target_feature: bool,
    /// Use tanh instead of ReLU for the cell candidate and output.
    #[arg(long, global = true)]
    pub classic_tanh: bool,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// First date to fetch (YYYY-MM-DD).
    #[arg(long, global = true)]
    pub start: Option<NaiveDate>,
    /// Fetch up to, not including, this date.
    #[arg(long, global = true)]
    pub end: Option<NaiveDate>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Download daily history to <outdir>/data/<ticker>.csv.
    Fetch,
    /// Train a model per ticker; writes the checkpoint and loss history.
    Train,
    /// Trade the test period with a trained model and report metrics.
    Backtest,
    /// Aggregate per-stock ratios into sector averages and rank sectors.
    Sector,
    /// Write actual/predicted price and loss-curve CSVs.
    Plotdata {
        /// Also predict the training rows.
        #[arg(long)]
        predict_train: bool,
    },
    /// Train every cell of the configured grid.
    Gridsearch,
}

impl GlobalOpts {
    fn overrides(&self) -> Overrides {
        Overrides {
            tickers: self.tickers.clone(),
            seed: self.seed,
            jobs: self.jobs,
            outdir: self.outdir.clone(),
            mean_window: self.mean_window,
            fit_range: self.fit_range,
            exclude_target_feature: self.exclude_target_feature,
            classic_tanh: self.classic_tanh,
            epochs: self.epochs,
            start: self.start,
            end: self.end,
        }
    }
}

pub fn resolve_config(opts: &GlobalOpts) -> Result<RunConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&opts.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn report_failures(failures: &[(String, CliError)], err: &mut dyn Write) -> u8 {
    for (item, e) in failures {
        let _ = writeln!(err, "error: {item}: {e}");
    }
    failures.iter().map(|(_, e)| e.exit_code()).max().unwrap_or(0)
}

fn split<T>(tickers: &[String], results: Vec<Result<T, CliError>>) -> (Vec<(String, T)>, Vec<(String, CliError)>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (t, r) in tickers.iter().zip(results) {
        match r {
            Ok(v) => ok.push((t.clone(), v)),
            Err(e) => failed.push((t.clone(), e)),
        }
    }
    (ok, failed)
}

/// Runs one command; returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let cfg = match resolve_config(&cli.opts) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    match dispatch(&cli.command, &cfg, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, CliError> {
    let layout = Layout::new(&cfg.outdir);
    let jobs = cfg.jobs;
    let code = match command {
        Command::Fetch => {
            cfg.date_range()?;
            let tickers = cfg.resolve_tickers()?;
            let endpoint = cfg.effective_endpoint();
            let results = commands::run_parallel(&tickers, jobs, |t| commands::fetch_one(cfg, &layout, t, &endpoint));
            let (ok, failed) = split(&tickers, results);
            for (t, s) in ok {
                let _ = writeln!(out, "{t}: {} rows -> {} ({} dropped)", s.rows, s.path.display(), s.dropped);
            }
            report_failures(&failed, err)
        }
        Command::Train => {
            let tickers = cfg.resolve_tickers()?;
            let results = commands::run_parallel(&tickers, jobs, |t| commands::train_one(cfg, &layout, t));
            let (ok, failed) = split(&tickers, results);
            for (t, h) in ok {
                match h.last() {
                    Some(e) => {
                        let _ = writeln!(
                            out,
                            "{t}: {} epochs, loss {:.6}, val_loss {:.6}, val_mae {:.6}",
                            h.len(),
                            e.train_loss,
                            e.val_loss,
                            e.val_mae
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{t}: 0 epochs, initial weights saved");
                    }
                }
            }
            report_failures(&failed, err)
        }
        Command::Backtest => {
            let tickers = cfg.resolve_tickers()?;
            let results = commands::run_parallel(&tickers, jobs, |t| commands::backtest_one(cfg, &layout, t));
            let (ok, failed) = split(&tickers, results);
            if !ok.is_empty() {
                let cols: Vec<_> = ok.into_iter().map(|(t, o)| (t, o.metrics)).collect();
                let _ = write!(out, "{}", render::metrics_table(&cols, None));
            }
            report_failures(&failed, err)
        }
        Command::Sector => {
            let run = commands::sector_all(cfg, &layout)?;
            let _ = write!(out, "{}", render::ranking_table(&run.ranked));
            report_failures(&run.failures, err)
        }
        Command::Plotdata { predict_train } => {
            let tickers = cfg.resolve_tickers()?;
            let results = commands::run_parallel(&tickers, jobs, |t| {
                commands::plotdata_one(cfg, &layout, t, *predict_train)
            });
            let (ok, failed) = split(&tickers, results);
            for (t, s) in ok {
                let _ = writeln!(
                    out,
                    "{t}: {} price rows ({} predicted), {} loss rows",
                    s.rows, s.predicted_rows, s.epochs
                );
            }
            report_failures(&failed, err)
        }
        Command::Gridsearch => {
            if cfg.grid.is_empty() {
                return Err(CliError::Config("gridsearch needs a non-empty `grid` in the config".into()));
            }
            let tickers = cfg.resolve_tickers()?;
            let mut failed = Vec::new();
            for t in &tickers {
                match commands::gridsearch_one(cfg, &layout, t) {
                    Ok(rows) => {
                        let best = rows.first().and_then(|r| r.val_loss.map(|l| (r.cell, l)));
                        match best {
                            Some((cell, loss)) => {
                                let _ = writeln!(out, "{t}: {} cells, best cell {cell} val_loss {loss:.6}", rows.len());
                            }
                            None => {
                                let _ = writeln!(out, "{t}: {} cells, all failed", rows.len());
                            }
                        }
                    }
                    Err(e) => failed.push((t.clone(), e)),
                }
            }
            report_failures(&failed, err)
        }
    };
    Ok(code)
}
