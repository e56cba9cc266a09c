//! Next-day stock price forecasting and profitability analysis.
//!
//! The crate is organised the way a run flows:
//!
//! - [`market_data`]: daily OHLCV bars, CSV persistence and the chart API client.
//! - [`pipeline`]: min-max scaling, windowing into supervised samples, train/test split.
//! - [`neuralnet`]: a stacked LSTM regressor with dropout, Huber/MAE/MSE losses,
//!   full backpropagation through time, Adam, checkpointing and grid search.
//! - [`backtest`]: the one-share buy/sell rule driven by predictions, per-stock
//!   metrics and sector aggregation.

pub mod backtest;
pub mod market_data;
pub mod neuralnet;
pub mod pipeline;

pub use backtest::{
    compute_metrics, mean_price, rank_sectors, sector_aggregate, simulate_trades, BacktestError,
    ForecastFigures, MeanWindow, ProfitSummary, SectorReport, Side, StockSummary, TradeInput,
    TradeMetrics, TradeOptions, TradeRecord,
};
pub use market_data::{
    fetch_history, read_csv, validate_series, write_csv, ChartClient, FetchedHistory,
    MarketDataError, OhlcvBar, OhlcvSeries, ValidationReport,
};
pub use neuralnet::{
    evaluate, grid_search, init_params, load_checkpoint, load_checkpoint_expecting, predict,
    predict_next, save_checkpoint, train, AdamConfig, AdamState, Checkpoint, CheckpointError,
    EpochStats, GridRow, GridSpec, HiddenActivation, LossKind, ModelConfig, ModelParams, NetError,
    OutputActivation, TrainHistory,
};
pub use pipeline::{
    apply_scaler, fit_for, fit_scaler, invert_scaler, make_supervised, prepare,
    prepare_with_scaler, split, Feature, FitRange, FitScope, PipelineConfig, PipelineError,
    PreparedData, ScalerParams, SupervisedDataset, SupervisedSample,
};
