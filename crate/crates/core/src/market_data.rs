//! Daily OHLCV bars: validation, CSV persistence and a chart-style JSON client.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use chrono::{DateTime, NaiveDate};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Exact CSV header for persisted series.
pub const CSV_HEADER: &str = "date,open,high,low,close,adj_close,volume";

pub const ENV_PROXY: &str = "STOCKCASTER_HTTP_PROXY";
pub const ENV_TIMEOUT: &str = "STOCKCASTER_HTTP_TIMEOUT_SECS";
pub const DEFAULT_TIMEOUT_SECS: u64 = 30;

// Unreserved characters stay literal in the ticker path segment.
const TICKER_ESCAPE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~')
    .remove(b'^');

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("transport error fetching {ticker}: {message}")]
    Transport { ticker: String, message: String },
    #[error("ticker not found: {0}")]
    NotFound(String),
    #[error("malformed chart payload: field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("CSV schema error: {message}; expected header `{CSV_HEADER}`")]
    Schema { message: String },
    #[error("CSV row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("invalid date range: start {start} must precede end {end}")]
    InvalidRange { start: NaiveDate, end: NaiveDate },
    #[error("ticker symbol must not be empty")]
    EmptyTicker,
    #[error("series for {0} has no bars")]
    EmptySeries(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MarketDataError {
    /// Whether retrying the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, MarketDataError::Transport { .. })
    }
}

/// One trading day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: u64,
}

impl OhlcvBar {
    /// First invariant this bar violates, if any.
    pub fn defect(&self) -> Option<String> {
        let prices = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
            ("adj_close", self.adj_close),
        ];
        for (name, value) in prices {
            if !value.is_finite() {
                return Some(format!("non-finite {name}"));
            }
            if value <= 0.0 {
                return Some(format!("non-positive {name}"));
            }
        }
        if self.high < self.low {
            return Some("high<low".to_string());
        }
        if self.high < self.open.max(self.close) {
            return Some("high<max(open,close)".to_string());
        }
        if self.low > self.open.min(self.close) {
            return Some("low>min(open,close)".to_string());
        }
        None
    }
}

/// Date-ascending daily bars for one ticker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvSeries {
    pub ticker: String,
    pub bars: Vec<OhlcvBar>,
}

impl OhlcvSeries {
    /// Builds a series, sorting bars by date. Duplicate dates and empty input are rejected.
    pub fn new(ticker: impl Into<String>, mut bars: Vec<OhlcvBar>) -> Result<Self, MarketDataError> {
        let ticker = ticker.into();
        if bars.is_empty() {
            return Err(MarketDataError::EmptySeries(ticker));
        }
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(MarketDataError::DuplicateDate(w[0].date));
        }
        Ok(Self { ticker, bars })
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.bars.iter().map(|b| b.date)
    }

    pub fn adj_close(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.adj_close).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub kept: usize,
    pub dropped: Vec<DroppedRow>,
}

impl ValidationReport {
    pub fn dropped_count(&self) -> usize {
        self.dropped.len()
    }
}

/// Drops every bar that breaks a bar or series invariant and reports why.
///
/// Bars are first sorted by date; for repeated dates the first occurrence in
/// input order is kept. An empty result is reported, never an error.
pub fn validate_series(series: &OhlcvSeries) -> (OhlcvSeries, ValidationReport) {
    let mut bars = series.bars.clone();
    bars.sort_by_key(|b| b.date);

    let mut report = ValidationReport::default();
    let mut kept: Vec<OhlcvBar> = Vec::with_capacity(bars.len());
    for bar in bars {
        if let Some(reason) = bar.defect() {
            report.dropped.push(DroppedRow { date: bar.date, reason });
            continue;
        }
        if kept.last().is_some_and(|last| last.date == bar.date) {
            report.dropped.push(DroppedRow {
                date: bar.date,
                reason: "duplicate date".to_string(),
            });
            continue;
        }
        kept.push(bar);
    }
    report.kept = kept.len();
    (
        OhlcvSeries {
            ticker: series.ticker.clone(),
            bars: kept,
        },
        report,
    )
}

/// Reads a series from a CSV file with the [`CSV_HEADER`] layout.
pub fn read_csv(path: impl AsRef<Path>) -> Result<OhlcvSeries, MarketDataError> {
    let path = path.as_ref();
    let ticker = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = fs::read_to_string(path)?;
    parse_csv(&ticker, &text)
}

/// Parses CSV text; `ticker` labels the resulting series.
pub fn parse_csv(ticker: &str, text: &str) -> Result<OhlcvSeries, MarketDataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| MarketDataError::Schema {
        message: e.to_string(),
    })?;
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let actual: Vec<&str> = headers.iter().map(str::trim).collect();
    if actual != expected {
        let missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|c| !actual.contains(c))
            .collect();
        let message = if missing.is_empty() {
            format!("unexpected header `{}`", actual.join(","))
        } else {
            format!("missing column(s) {}", missing.join(", "))
        };
        return Err(MarketDataError::Schema { message });
    }

    let mut bars = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| MarketDataError::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != expected.len() {
            return Err(MarketDataError::Row {
                row,
                message: format!("expected {} cells, found {}", expected.len(), record.len()),
            });
        }
        let cell = |idx: usize| record[idx].trim();
        let date = NaiveDate::parse_from_str(cell(0), "%Y-%m-%d").map_err(|e| {
            MarketDataError::Row {
                row,
                message: format!("date `{}`: {e}", cell(0)),
            }
        })?;
        let price = |idx: usize| -> Result<f64, MarketDataError> {
            cell(idx).parse::<f64>().map_err(|e| MarketDataError::Row {
                row,
                message: format!("{} `{}`: {e}", expected[idx], cell(idx)),
            })
        };
        let volume = cell(6).parse::<u64>().map_err(|e| MarketDataError::Row {
            row,
            message: format!("volume `{}`: {e}", cell(6)),
        })?;
        bars.push(OhlcvBar {
            date,
            open: price(1)?,
            high: price(2)?,
            low: price(3)?,
            close: price(4)?,
            adj_close: price(5)?,
            volume,
        });
    }
    if bars.is_empty() {
        return Err(MarketDataError::EmptySeries(ticker.to_string()));
    }
    OhlcvSeries::new(ticker, bars).map_err(|e| match e {
        MarketDataError::DuplicateDate(d) => MarketDataError::Schema {
            message: format!("duplicate date {d}"),
        },
        other => other,
    })
}

/// Renders a series as CSV text. Floats use the shortest representation that
/// parses back to the same value, so a round trip is exact.
pub fn to_csv_string(series: &OhlcvSeries) -> Result<String, MarketDataError> {
    if series.bars.is_empty() {
        return Err(MarketDataError::EmptySeries(series.ticker.clone()));
    }
    let mut out = String::with_capacity(64 * (series.bars.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for b in &series.bars {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.date.format("%Y-%m-%d"),
            b.open,
            b.high,
            b.low,
            b.close,
            b.adj_close,
            b.volume
        );
    }
    Ok(out)
}

pub fn write_csv(series: &OhlcvSeries, path: impl AsRef<Path>) -> Result<(), MarketDataError> {
    let text = to_csv_string(series)?;
    fs::write(path, text)?;
    Ok(())
}

/// Result of a remote fetch: the series plus the number of rows dropped
/// because they carried no adjusted close.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchedHistory {
    pub series: OhlcvSeries,
    pub missing_adj_close: usize,
}

/// Client for a chart-style endpoint (`/v8/finance/chart/{ticker}`).
#[derive(Debug, Clone)]
pub struct ChartClient {
    endpoint: String,
    timeout: Duration,
    proxy: Option<String>,
}

impl ChartClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS),
            proxy: None,
        }
    }

    /// Reads proxy and timeout settings from `STOCKCASTER_HTTP_PROXY` and
    /// `STOCKCASTER_HTTP_TIMEOUT_SECS`.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        let mut client = Self::new(endpoint);
        if let Some(secs) = std::env::var(ENV_TIMEOUT)
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
        {
            client.timeout = Duration::from_secs(secs);
        }
        client.proxy = std::env::var(ENV_PROXY).ok().filter(|p| !p.trim().is_empty());
        client
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn url_for(&self, ticker: &str, start: NaiveDate, end: NaiveDate) -> String {
        format!(
            "{}/v8/finance/chart/{}?period1={}&period2={}&interval=1d",
            self.endpoint,
            utf8_percent_encode(ticker, TICKER_ESCAPE),
            unix_midnight(start),
            unix_midnight(end)
        )
    }

    pub fn fetch(
        &self,
        ticker: &str,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<FetchedHistory, MarketDataError> {
        check_request(ticker, start, end)?;
        let transport = |message: String| MarketDataError::Transport {
            ticker: ticker.to_string(),
            message,
        };

        let mut config = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .proxy(None);
        if let Some(proxy) = &self.proxy {
            let proxy = ureq::Proxy::new(proxy).map_err(|e| transport(format!("proxy: {e}")))?;
            config = config.proxy(Some(proxy));
        }
        let agent: ureq::Agent = config.build().into();

        let url = self.url_for(ticker, start, end);
        log::debug!("GET {url}");
        let mut response = agent
            .get(&url)
            .header("User-Agent", "stockcaster/0.1")
            .call()
            .map_err(|e| transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| transport(e.to_string()))?;

        match status {
            200 => parse_chart_response(ticker, &body, start, end),
            404 => Err(MarketDataError::NotFound(ticker.to_string())),
            s if s >= 500 || s == 429 => Err(transport(format!("HTTP {s}"))),
            s => {
                // Some endpoints signal unknown symbols with a 4xx and a chart error body.
                match parse_chart_response(ticker, &body, start, end) {
                    Err(MarketDataError::NotFound(t)) => Err(MarketDataError::NotFound(t)),
                    _ => Err(transport(format!("HTTP {s}"))),
                }
            }
        }
    }
}

/// Fetches `[start, end)` daily history for `ticker` from `endpoint`, using
/// proxy/timeout settings from the environment.
pub fn fetch_history(
    ticker: &str,
    start: NaiveDate,
    end: NaiveDate,
    endpoint: &str,
) -> Result<FetchedHistory, MarketDataError> {
    ChartClient::from_env(endpoint).fetch(ticker, start, end)
}

fn check_request(ticker: &str, start: NaiveDate, end: NaiveDate) -> Result<(), MarketDataError> {
    if ticker.trim().is_empty() {
        return Err(MarketDataError::EmptyTicker);
    }
    if start >= end {
        return Err(MarketDataError::InvalidRange { start, end });
    }
    Ok(())
}

fn unix_midnight(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

fn parse_err(field: &str, message: impl Into<String>) -> MarketDataError {
    MarketDataError::Parse {
        field: field.to_string(),
        message: message.into(),
    }
}

fn numeric_array<'a>(value: Option<&'a Value>, field: &str) -> Result<&'a Vec<Value>, MarketDataError> {
    value
        .ok_or_else(|| parse_err(field, "missing"))?
        .as_array()
        .ok_or_else(|| parse_err(field, "expected an array"))
}

fn optional_f64(values: &[Value], idx: usize, field: &str) -> Result<Option<f64>, MarketDataError> {
    match values.get(idx) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| parse_err(field, format!("element {idx} is not a number"))),
    }
}

/// Decodes a chart JSON payload into a date-ascending series restricted to
/// `start <= date < end`.
///
/// Rows without an adjusted close are dropped and counted. Missing
/// open/high/low/close values become NaN so that [`validate_series`] can
/// report them; a missing volume is read as 0.
pub fn parse_chart_response(
    ticker: &str,
    body: &str,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<FetchedHistory, MarketDataError> {
    let root: Value = serde_json::from_str(body).map_err(|e| parse_err("<root>", e.to_string()))?;
    let chart = root.get("chart").ok_or_else(|| parse_err("chart", "missing"))?;

    if let Some(err) = chart.get("error").filter(|e| !e.is_null()) {
        let code = err.get("code").and_then(Value::as_str).unwrap_or_default();
        let description = err
            .get("description")
            .and_then(Value::as_str)
            .unwrap_or_default();
        if code.eq_ignore_ascii_case("Not Found") || description.contains("No data found") {
            return Err(MarketDataError::NotFound(ticker.to_string()));
        }
        return Err(parse_err("chart.error", format!("{code}: {description}")));
    }

    let result = chart
        .get("result")
        .and_then(Value::as_array)
        .and_then(|r| r.first())
        .ok_or_else(|| MarketDataError::NotFound(ticker.to_string()))?;

    let gmtoffset = result
        .get("meta")
        .and_then(|m| m.get("gmtoffset"))
        .and_then(Value::as_i64)
        .unwrap_or(0);

    // A valid symbol with no trading days in range has no timestamp array.
    let empty = Vec::new();
    let timestamps = match result.get("timestamp") {
        None | Some(Value::Null) => &empty,
        v => numeric_array(v, "timestamp")?,
    };

    let indicators = result
        .get("indicators")
        .ok_or_else(|| parse_err("indicators", "missing"))?;
    let quote = indicators
        .get("quote")
        .and_then(Value::as_array)
        .and_then(|q| q.first())
        .ok_or_else(|| parse_err("indicators.quote", "missing or empty"))?;
    let adj = indicators
        .get("adjclose")
        .and_then(Value::as_array)
        .and_then(|a| a.first());

    let series_of = |name: &str| -> Result<&Vec<Value>, MarketDataError> {
        let field = format!("indicators.quote.{name}");
        match quote.get(name) {
            None | Some(Value::Null) if timestamps.is_empty() => Ok(&empty),
            v => numeric_array(v, &field),
        }
    };
    let open = series_of("open")?;
    let high = series_of("high")?;
    let low = series_of("low")?;
    let close = series_of("close")?;
    let volume = series_of("volume")?;
    let adjclose = match adj.and_then(|a| a.get("adjclose")) {
        Some(v) => numeric_array(Some(v), "indicators.adjclose.adjclose")?,
        None if timestamps.is_empty() => &empty,
        None => return Err(parse_err("indicators.adjclose", "missing")),
    };

    let n = timestamps.len();
    for (name, arr) in [
        ("indicators.quote.open", open),
        ("indicators.quote.high", high),
        ("indicators.quote.low", low),
        ("indicators.quote.close", close),
        ("indicators.quote.volume", volume),
        ("indicators.adjclose.adjclose", adjclose),
    ] {
        if arr.len() != n {
            return Err(parse_err(
                name,
                format!("length {} does not match {} timestamps", arr.len(), n),
            ));
        }
    }

    let mut bars = Vec::with_capacity(n);
    let mut missing_adj_close = 0;
    for (i, stamp) in timestamps.iter().enumerate() {
        let ts = stamp
            .as_i64()
            .ok_or_else(|| parse_err("timestamp", format!("element {i} is not an integer")))?;
        let date = DateTime::from_timestamp(ts + gmtoffset, 0)
            .ok_or_else(|| parse_err("timestamp", format!("element {i} out of range")))?
            .date_naive();
        if date < start || date >= end {
            continue;
        }
        let Some(adj_close) = optional_f64(adjclose, i, "indicators.adjclose.adjclose")? else {
            missing_adj_close += 1;
            continue;
        };
        let price = |arr: &[Value], name: &str| -> Result<f64, MarketDataError> {
            Ok(optional_f64(arr, i, name)?.unwrap_or(f64::NAN))
        };
        let vol = optional_f64(volume, i, "indicators.quote.volume")?.unwrap_or(0.0);
        if !(vol.is_finite() && vol >= 0.0) {
            return Err(parse_err(
                "indicators.quote.volume",
                format!("element {i} is negative or non-finite"),
            ));
        }
        bars.push(OhlcvBar {
            date,
            open: price(open, "indicators.quote.open")?,
            high: price(high, "indicators.quote.high")?,
            low: price(low, "indicators.quote.low")?,
            close: price(close, "indicators.quote.close")?,
            adj_close,
            volume: vol.round() as u64,
        });
    }
    if missing_adj_close > 0 {
        log::warn!("{ticker}: dropped {missing_adj_close} row(s) without adj_close");
    }

    bars.sort_by_key(|b| b.date);
    // Intraday duplicates (e.g. a live bar for today) collapse onto the last value.
    bars.dedup_by(|later, earlier| {
        if later.date == earlier.date {
            *earlier = *later;
            true
        } else {
            false
        }
    });
    if bars.is_empty() {
        return Err(MarketDataError::EmptySeries(ticker.to_string()));
    }
    Ok(FetchedHistory {
        series: OhlcvSeries {
            ticker: ticker.to_string(),
            bars,
        },
        missing_adj_close,
    })
}
