//! One-share daily trading driven by next-day forecasts, with per-stock and
//! per-sector profitability figures.
//!
//! Each test day the forecast is compared with the current price: a higher
//! forecast buys today and closes at tomorrow's actual price, a lower one
//! sells today and buys back tomorrow. Equal forecasts do not trade.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BacktestError {
    #[error("{what}: expected {expected} values, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("no test cases")]
    Empty,
    #[error("invalid price {value} on {date}")]
    InvalidPrice { date: NaiveDate, value: f64 },
    #[error("mean stock price must be finite and positive, got {0}")]
    InvalidMeanPrice(f64),
    #[error("sector `{0}` has no member stocks")]
    EmptySector(String),
    #[error("metrics CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
    None,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
            Side::None => "none",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A test day before the forecast is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeInput {
    pub date: NaiveDate,
    pub current_price: f64,
    pub actual_future_price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeOptions {
    /// Shares per trade.
    pub position_size: f64,
    /// Flat cost charged on every executed trade.
    pub cost_per_trade: f64,
}

impl Default for TradeOptions {
    fn default() -> Self {
        Self {
            position_size: 1.0,
            cost_per_trade: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub date: NaiveDate,
    pub side: Side,
    pub current_price: f64,
    pub actual_future_price: f64,
    pub predicted_future_price: f64,
    pub profit: f64,
}

pub fn simulate_trades(
    inputs: &[TradeInput],
    predictions: &[f64],
    options: &TradeOptions,
) -> Result<Vec<TradeRecord>, BacktestError> {
    if inputs.len() != predictions.len() {
        return Err(BacktestError::LengthMismatch {
            what: "predictions",
            expected: inputs.len(),
            actual: predictions.len(),
        });
    }
    inputs
        .iter()
        .zip(predictions)
        .map(|(day, &predicted)| {
            for value in [day.current_price, day.actual_future_price] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(BacktestError::InvalidPrice { date: day.date, value });
                }
            }
            if !predicted.is_finite() {
                return Err(BacktestError::InvalidPrice { date: day.date, value: predicted });
            }
            let move_ = day.actual_future_price - day.current_price;
            let (side, profit) = if predicted > day.current_price {
                (Side::Buy, options.position_size * move_ - options.cost_per_trade)
            } else if predicted < day.current_price {
                (Side::Sell, -options.position_size * move_ - options.cost_per_trade)
            } else {
                (Side::None, 0.0)
            };
            Ok(TradeRecord {
                date: day.date,
                side,
                current_price: day.current_price,
                actual_future_price: day.actual_future_price,
                predicted_future_price: predicted,
                profit,
            })
        })
        .collect()
}

/// Raw sums over a trade log, accumulated in chronological order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfitSummary {
    pub total_buy_profit: f64,
    pub total_sell_profit: f64,
    pub n_test_cases: usize,
    pub n_profitable: usize,
    pub n_buys: usize,
    pub n_sells: usize,
    pub abs_error_sum: f64,
}

impl ProfitSummary {
    pub fn from_trades(trades: &[TradeRecord]) -> Self {
        let mut s = ProfitSummary {
            n_test_cases: trades.len(),
            ..Default::default()
        };
        for t in trades {
            match t.side {
                Side::Buy => {
                    s.total_buy_profit += t.profit;
                    s.n_buys += 1;
                }
                Side::Sell => {
                    s.total_sell_profit += t.profit;
                    s.n_sells += 1;
                }
                Side::None => {}
            }
            if t.profit > 0.0 {
                s.n_profitable += 1;
            }
            s.abs_error_sum += (t.predicted_future_price - t.actual_future_price).abs();
        }
        s
    }
}

/// Which prices the mean stock price is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanWindow {
    /// Actual adj_close on the test target dates.
    #[default]
    Test,
    /// Every adj_close in the series.
    Full,
}

impl FromStr for MeanWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "test" => Ok(MeanWindow::Test),
            "full" => Ok(MeanWindow::Full),
            other => Err(format!("unknown mean window `{other}` (expected test|full)")),
        }
    }
}

pub fn mean_price(prices: &[f64]) -> Result<f64, BacktestError> {
    if prices.is_empty() {
        return Err(BacktestError::Empty);
    }
    let mean = prices.iter().sum::<f64>() / prices.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(BacktestError::InvalidMeanPrice(mean));
    }
    Ok(mean)
}

/// One stock's results, in the layout of a results-table column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeMetrics {
    pub total_buy_profit: f64,
    pub total_sell_profit: f64,
    pub total_profit: f64,
    pub mean_stock_price: f64,
    pub profit_to_mean_price_ratio: f64,
    pub n_test_cases: usize,
    pub profit_per_trade: f64,
    pub accuracy_score: f64,
    pub mean_absolute_score: f64,
    pub huber_loss_scaled: f64,
    pub next_day_predicted_price: f64,
}

/// Model-side figures that the trade log does not carry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForecastFigures {
    pub huber_loss_scaled: f64,
    pub next_day_predicted_price: f64,
}

impl TradeMetrics {
    /// Derives every ratio from raw sums.
    pub fn from_summary(
        summary: &ProfitSummary,
        mean_stock_price: f64,
        forecast: ForecastFigures,
    ) -> Result<Self, BacktestError> {
        if summary.n_test_cases == 0 {
            return Err(BacktestError::Empty);
        }
        if !(mean_stock_price.is_finite() && mean_stock_price > 0.0) {
            return Err(BacktestError::InvalidMeanPrice(mean_stock_price));
        }
        let n = summary.n_test_cases as f64;
        let total_profit = summary.total_buy_profit + summary.total_sell_profit;
        Ok(Self {
            total_buy_profit: summary.total_buy_profit,
            total_sell_profit: summary.total_sell_profit,
            total_profit,
            mean_stock_price,
            profit_to_mean_price_ratio: total_profit / mean_stock_price,
            n_test_cases: summary.n_test_cases,
            profit_per_trade: total_profit / n,
            accuracy_score: summary.n_profitable as f64 / n,
            mean_absolute_score: summary.abs_error_sum / n,
            huber_loss_scaled: forecast.huber_loss_scaled,
            next_day_predicted_price: forecast.next_day_predicted_price,
        })
    }

    const KEYS: [&'static str; 11] = [
        "next_day_predicted_price",
        "huber_loss_scaled",
        "mean_absolute_score",
        "accuracy_score",
        "total_buy_profit",
        "total_sell_profit",
        "total_profit",
        "mean_stock_price",
        "profit_to_mean_price_ratio",
        "n_test_cases",
        "profit_per_trade",
    ];

    fn values(&self) -> [f64; 11] {
        [
            self.next_day_predicted_price,
            self.huber_loss_scaled,
            self.mean_absolute_score,
            self.accuracy_score,
            self.total_buy_profit,
            self.total_sell_profit,
            self.total_profit,
            self.mean_stock_price,
            self.profit_to_mean_price_ratio,
            self.n_test_cases as f64,
            self.profit_per_trade,
        ]
    }

    /// `metric,value` rows at full precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in Self::KEYS.iter().zip(self.values()) {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self, BacktestError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("metric,value") {
            return Err(BacktestError::Csv("expected header `metric,value`".into()));
        }
        let mut vals = [f64::NAN; 11];
        let mut seen = [false; 11];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(',')
                .ok_or_else(|| BacktestError::Csv(format!("malformed row `{line}`")))?;
            let idx = Self::KEYS
                .iter()
                .position(|key| *key == k.trim())
                .ok_or_else(|| BacktestError::Csv(format!("unknown metric `{k}`")))?;
            vals[idx] = v
                .trim()
                .parse()
                .map_err(|_| BacktestError::Csv(format!("bad value for `{k}`: `{v}`")))?;
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(BacktestError::Csv(format!("missing metric `{}`", Self::KEYS[i])));
        }
        Ok(Self {
            next_day_predicted_price: vals[0],
            huber_loss_scaled: vals[1],
            mean_absolute_score: vals[2],
            accuracy_score: vals[3],
            total_buy_profit: vals[4],
            total_sell_profit: vals[5],
            total_profit: vals[6],
            mean_stock_price: vals[7],
            profit_to_mean_price_ratio: vals[8],
            n_test_cases: vals[9] as usize,
            profit_per_trade: vals[10],
        })
    }
}

/// Metrics for a trade log.
///
/// Accuracy counts trades with strictly positive profit; untraded days stay in
/// the denominator. The mean absolute score is in price units.
pub fn compute_metrics(
    trades: &[TradeRecord],
    mean_stock_price: f64,
    forecast: ForecastFigures,
) -> Result<TradeMetrics, BacktestError> {
    TradeMetrics::from_summary(&ProfitSummary::from_trades(trades), mean_stock_price, forecast)
}

/// A stock's row in a sector report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockSummary {
    pub stock: String,
    pub total_buy_profit: f64,
    pub total_sell_profit: f64,
    pub total_profit: f64,
    pub mean_price: f64,
    pub ratio: f64,
    pub n_test: usize,
    pub profit_per_trade: f64,
}

impl StockSummary {
    pub fn from_metrics(stock: impl Into<String>, m: &TradeMetrics) -> Self {
        Self {
            stock: stock.into(),
            total_buy_profit: m.total_buy_profit,
            total_sell_profit: m.total_sell_profit,
            total_profit: m.total_profit,
            mean_price: m.mean_stock_price,
            ratio: m.profit_to_mean_price_ratio,
            n_test: m.n_test_cases,
            profit_per_trade: m.profit_per_trade,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub sector: String,
    pub members: Vec<StockSummary>,
    /// Mean of the members' profit-to-mean-price ratios.
    pub sector_profitability: f64,
}

impl SectorReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "stock,total_buy_profit,total_sell_profit,total_profit,mean_price,ratio,n_test,profit_per_trade\n",
        );
        for m in &self.members {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.stock,
                m.total_buy_profit,
                m.total_sell_profit,
                m.total_profit,
                m.mean_price,
                m.ratio,
                m.n_test,
                m.profit_per_trade
            );
        }
        let _ = writeln!(out, "average,,,,,{},,", self.sector_profitability);
        out
    }
}

pub fn sector_aggregate(
    name: impl Into<String>,
    members: Vec<StockSummary>,
) -> Result<SectorReport, BacktestError> {
    let sector = name.into();
    if members.is_empty() {
        return Err(BacktestError::EmptySector(sector));
    }
    let avg = members.iter().map(|m| m.ratio).sum::<f64>() / members.len() as f64;
    Ok(SectorReport {
        sector,
        members,
        sector_profitability: avg,
    })
}

/// Most profitable sector first; equal scores fall back to name order.
pub fn rank_sectors(mut reports: Vec<SectorReport>) -> Vec<SectorReport> {
    reports.sort_by(|a, b| {
        b.sector_profitability
            .total_cmp(&a.sector_profitability)
            .then_with(|| a.sector.cmp(&b.sector))
    });
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(i)
    }

    fn inputs(current: &[f64], next: &[f64]) -> Vec<TradeInput> {
        current
            .iter()
            .zip(next)
            .enumerate()
            .map(|(i, (&c, &a))| TradeInput {
                date: day(i as u64),
                current_price: c,
                actual_future_price: a,
            })
            .collect()
    }

    fn summary(stock: &str, ratio: f64) -> StockSummary {
        StockSummary {
            stock: stock.into(),
            total_buy_profit: 0.0,
            total_sell_profit: 0.0,
            total_profit: 0.0,
            mean_price: 1.0,
            ratio,
            n_test: 1,
            profit_per_trade: 0.0,
        }
    }

    #[test]
    fn buy_then_sell() {
        let t = simulate_trades(
            &inputs(&[100.0, 102.0], &[102.0, 101.0]),
            &[103.0, 100.0],
            &TradeOptions::default(),
        )
        .unwrap();
        assert_eq!((t[0].side, t[0].profit), (Side::Buy, 2.0));
        assert_eq!((t[1].side, t[1].profit), (Side::Sell, 1.0));
    }

    #[test]
    fn flat_forecast_never_trades() {
        let p = [5.0, 5.0, 5.0];
        let t = simulate_trades(&inputs(&p, &p), &p, &TradeOptions::default()).unwrap();
        assert!(t.iter().all(|r| r.side == Side::None && r.profit == 0.0));
        let m = compute_metrics(&t, 5.0, ForecastFigures::default()).unwrap();
        assert_eq!(m.total_profit, 0.0);
        assert_eq!(m.accuracy_score, 0.0);
    }

    #[test]
    fn length_mismatch() {
        let err = simulate_trades(&inputs(&[1.0], &[2.0]), &[], &TradeOptions::default()).unwrap_err();
        assert!(matches!(err, BacktestError::LengthMismatch { expected: 1, actual: 0, .. }));
    }

    #[test]
    fn accuracy_counts_positive_profits() {
        let opts = TradeOptions::default();
        let a = simulate_trades(&inputs(&[10.0, 10.0], &[12.0, 9.0]), &[11.0, 9.5], &opts).unwrap();
        assert_eq!(compute_metrics(&a, 10.0, ForecastFigures::default()).unwrap().accuracy_score, 1.0);
        let b = simulate_trades(&inputs(&[10.0, 10.0], &[12.0, 11.0]), &[11.0, 9.5], &opts).unwrap();
        let m = compute_metrics(&b, 10.0, ForecastFigures::default()).unwrap();
        assert_eq!(m.accuracy_score, 0.5);
        assert_eq!(m.total_profit, 1.0);
        assert_eq!(m.mean_absolute_score, (1.0 + 1.5) / 2.0);
    }

    #[test]
    fn empty_trades_rejected() {
        assert_eq!(
            compute_metrics(&[], 1.0, ForecastFigures::default()).unwrap_err(),
            BacktestError::Empty
        );
    }

    #[test]
    fn metrics_csv_round_trip() {
        let t = simulate_trades(
            &inputs(&[100.0, 102.0, 99.5], &[102.0, 101.0, 99.0]),
            &[103.0, 100.0, 100.0],
            &TradeOptions::default(),
        )
        .unwrap();
        let m = compute_metrics(&t, 100.5, ForecastFigures { huber_loss_scaled: 1e-4, next_day_predicted_price: 98.7 })
            .unwrap();
        let back = TradeMetrics::from_csv_str(&m.to_csv_string()).unwrap();
        assert_eq!(back, m);
        assert!(TradeMetrics::from_csv_str("metric,value\ntotal_profit,1\n").is_err());
    }

    #[test]
    fn sector_mean_and_ranking() {
        assert!(sector_aggregate("x", vec![]).is_err());
        let one = sector_aggregate("solo", vec![summary("A", 321.0)]).unwrap();
        assert_eq!(one.sector_profitability, 321.0);
        let ranked = rank_sectors(vec![
            sector_aggregate("b", vec![summary("A", 5.0)]).unwrap(),
            sector_aggregate("a", vec![summary("B", 5.0)]).unwrap(),
            sector_aggregate("c", vec![summary("C", 9.0)]).unwrap(),
        ]);
        let names: Vec<_> = ranked.iter().map(|r| r.sector.as_str()).collect();
        assert_eq!(names, ["c", "a", "b"]);
        let csv = one.to_csv_string();
        assert!(csv.ends_with("average,,,,,321,,\n"), "{csv}");
    }

    fn walk() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(-3.0f64..3.0, n - 1),
            )
                .prop_map(|(steps, noise)| {
                    let mut p = vec![100.0];
                    for s in steps {
                        let last = *p.last().unwrap();
                        p.push((last + s).max(1.0));
                    }
                    let preds = p[1..].iter().zip(noise.iter().chain([0.0].iter().cycle())).map(|(a, e)| a + e).collect();
                    (p, preds)
                })
        })
    }

    proptest! {
        #[test]
        fn flipping_sides_negates_profit((prices, preds) in walk()) {
            let n = prices.len() - 1;
            let days = inputs(&prices[..n], &prices[1..]);
            let preds = &preds[..n];
            let mirrored: Vec<f64> = days.iter().zip(preds).map(|(d, p)| 2.0 * d.current_price - p).collect();
            let opts = TradeOptions::default();
            let a = simulate_trades(&days, preds, &opts).unwrap();
            let b = simulate_trades(&days, &mirrored, &opts).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.profit, -y.profit);
            }
            let ma = compute_metrics(&a, 1.0, ForecastFigures::default()).unwrap();
            let mb = compute_metrics(&b, 1.0, ForecastFigures::default()).unwrap();
            prop_assert!((ma.total_profit + mb.total_profit).abs() < 1e-9);
        }

        #[test]
        fn position_size_scales_profits((prices, preds) in walk(), k in 1u32..50) {
            let n = prices.len() - 1;
            let days = inputs(&prices[..n], &prices[1..]);
            let one = simulate_trades(&days, &preds[..n], &TradeOptions::default()).unwrap();
            let many = simulate_trades(&days, &preds[..n], &TradeOptions { position_size: k as f64, cost_per_trade: 0.0 }).unwrap();
            for (a, b) in one.iter().zip(&many) {
                prop_assert_eq!(b.profit, k as f64 * a.profit);
            }
        }

        #[test]
        fn total_is_buy_plus_sell((prices, preds) in walk()) {
            let n = prices.len() - 1;
            let days = inputs(&prices[..n], &prices[1..]);
            let t = simulate_trades(&days, &preds[..n], &TradeOptions::default()).unwrap();
            let m = compute_metrics(&t, 50.0, ForecastFigures::default()).unwrap();
            prop_assert_eq!(m.total_profit, m.total_buy_profit + m.total_sell_profit);
            prop_assert!((0.0..=1.0).contains(&m.accuracy_score));
        }
    }
}
