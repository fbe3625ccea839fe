//! Price series and per-message market outcomes.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{parse_timestamp, CrowdPumpMessage, Direction};

pub const WINDOW: Duration = Duration::hours(72);
/// How far after `t` a first point may lie and still price the announcement.
pub const FORWARD_FILL: Duration = Duration::minutes(10);

#[derive(Debug, thiserror::Error)]
pub enum MarketError {
    #[error("no price data for pid {pid} around {at} ({what})")]
    MissingData { pid: u64, at: DateTime<Utc>, what: &'static str },
    #[error("no price series for {0}")]
    UnknownPair(String),
    #[error("series {pair}: {reason} at row {row}")]
    BadSeries { pair: String, row: usize, reason: String },
    #[error("{path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub t: DateTime<Utc>,
    pub price: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub pair: String,
    points: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(pair: impl Into<String>, points: Vec<PricePoint>) -> Result<Self, MarketError> {
        let pair = pair.into();
        for (row, p) in points.iter().enumerate() {
            let bad = |reason: &str| MarketError::BadSeries { pair: pair.clone(), row, reason: reason.into() };
            if !(p.price.is_finite() && p.price > 0.0) {
                return Err(bad("price must be positive"));
            }
            if !(p.volume.is_finite() && p.volume >= 0.0) {
                return Err(bad("volume must be nonnegative"));
            }
            if row > 0 && points[row - 1].t >= p.t {
                return Err(bad("timestamps must be strictly increasing"));
            }
        }
        Ok(Self { pair, points })
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    /// Index of the first point with `t > at`.
    fn after(&self, at: DateTime<Utc>) -> usize {
        self.points.partition_point(|p| p.t <= at)
    }

    /// Index of the first point with `t >= at`.
    fn at_or_after(&self, at: DateTime<Utc>) -> usize {
        self.points.partition_point(|p| p.t < at)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnRule {
    /// Longs move up, shorts move down.
    #[default]
    DirectionAware,
    /// Highest price in the window for both directions.
    HighestPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome {
    pub pid: u64,
    pub announcement_price: f64,
    pub extreme_price: f64,
    pub max_return: f64,
    pub targets_achieved: usize,
    pub targets_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeImpact {
    pub pid: u64,
    pub duration_minutes: f64,
    pub pump_volume: f64,
    pub baseline_volume: f64,
}

impl VolumeImpact {
    pub fn ratio(&self) -> Option<f64> {
        (self.baseline_volume > 0.0).then(|| self.pump_volume / self.baseline_volume)
    }
}

fn missing(msg_pid: u64, at: DateTime<Utc>, what: &'static str) -> MarketError {
    MarketError::MissingData { pid: msg_pid, at, what }
}

/// Last price at or before `t`, else the first within [`FORWARD_FILL`] after it.
pub fn price_at(series: &PriceSeries, t: DateTime<Utc>) -> Option<f64> {
    let i = series.after(t);
    if i > 0 {
        return Some(series.points[i - 1].price);
    }
    series.points.first().filter(|p| p.t - t <= FORWARD_FILL).map(|p| p.price)
}

fn uses_max(direction: Direction, rule: ReturnRule) -> bool {
    rule == ReturnRule::HighestPrice || direction == Direction::Long
}

/// Announcement price plus the favorable extreme over `(t, t+72h]` and the
/// time it is first reached.
fn window_extreme(
    series: &PriceSeries,
    msg: &CrowdPumpMessage,
    rule: ReturnRule,
) -> Result<(f64, f64, DateTime<Utc>), MarketError> {
    let t = msg.source_datetime;
    let p0 = price_at(series, t).ok_or_else(|| missing(msg.pid, t, "announcement price"))?;
    let lo = series.at_or_after(t);
    let hi = series.after(t + WINDOW);
    if lo >= hi {
        return Err(missing(msg.pid, t, "no points in the 72h window"));
    }
    let want_max = uses_max(msg.trade_direction, rule);
    let mut best = (p0, t);
    for p in &series.points[series.after(t)..hi] {
        let better = if want_max { p.price > best.0 } else { p.price < best.0 };
        if better {
            best = (p.price, p.t);
        }
    }
    Ok((p0, best.0, best.1))
}

pub fn max_return(series: &PriceSeries, msg: &CrowdPumpMessage, rule: ReturnRule) -> Result<f64, MarketError> {
    let (p0, extreme, _) = window_extreme(series, msg, rule)?;
    Ok(relative_move(p0, extreme, msg.trade_direction, rule))
}

fn relative_move(p0: f64, extreme: f64, direction: Direction, rule: ReturnRule) -> f64 {
    if uses_max(direction, rule) {
        (extreme - p0) / p0
    } else {
        (p0 - extreme) / p0
    }
}

fn count_targets(msg: &CrowdPumpMessage, extreme: f64, rule: ReturnRule) -> usize {
    let want_max = uses_max(msg.trade_direction, rule);
    msg.target_prices
        .iter()
        .filter(|t| {
            let t = t.to_f64();
            if want_max {
                t <= extreme
            } else {
                t >= extreme
            }
        })
        .count()
}

/// `(achieved, total)` against the window extreme.
pub fn targets_achieved(
    series: &PriceSeries,
    msg: &CrowdPumpMessage,
    rule: ReturnRule,
) -> Result<(usize, usize), MarketError> {
    let (_, extreme, _) = window_extreme(series, msg, rule)?;
    Ok((count_targets(msg, extreme, rule), msg.target_prices.len()))
}

pub fn outcome(series: &PriceSeries, msg: &CrowdPumpMessage, rule: ReturnRule) -> Result<MarketOutcome, MarketError> {
    let (p0, extreme, _) = window_extreme(series, msg, rule)?;
    Ok(MarketOutcome {
        pid: msg.pid,
        announcement_price: p0,
        extreme_price: extreme,
        max_return: relative_move(p0, extreme, msg.trade_direction, rule),
        targets_achieved: count_targets(msg, extreme, rule),
        targets_total: msg.target_prices.len(),
    })
}

/// Volume traded until the favorable extreme against the pre-announcement
/// per-minute average scaled to the same duration.
pub fn estimate_volume_impact(
    series: &PriceSeries,
    msg: &CrowdPumpMessage,
    rule: ReturnRule,
) -> Result<VolumeImpact, MarketError> {
    let t = msg.source_datetime;
    let first = series.points.first().ok_or_else(|| missing(msg.pid, t, "empty series"))?;
    if first.t > t - WINDOW + FORWARD_FILL {
        return Err(missing(msg.pid, t, "series does not cover the 72h before"));
    }
    let (_, _, t_ext) = window_extreme(series, msg, rule)?;
    let duration = t_ext - t;
    let duration_minutes = duration.num_seconds() as f64 / 60.0;
    let pump_volume: f64 = series.points[series.after(t)..series.after(t_ext)].iter().map(|p| p.volume).sum();
    let before: f64 = series.points[series.at_or_after(t - WINDOW)..series.at_or_after(t)]
        .iter()
        .map(|p| p.volume)
        .sum();
    let per_minute = before / WINDOW.num_minutes() as f64;
    Ok(VolumeImpact { pid: msg.pid, duration_minutes, pump_volume, baseline_volume: per_minute * duration_minutes })
}

/// Outcomes for every message that has a series; pids lacking data are returned separately.
pub fn compute_outcomes(
    messages: &[CrowdPumpMessage],
    series: &BTreeMap<String, PriceSeries>,
    rule: ReturnRule,
) -> (Vec<MarketOutcome>, Vec<u64>) {
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for m in messages {
        match series.get(&m.cryptocurrency).map(|s| outcome(s, m, rule)) {
            Some(Ok(o)) => out.push(o),
            _ => missing.push(m.pid),
        }
    }
    (out, missing)
}

// ---------------------------------------------------------------------------
// CSV input

#[derive(Debug, Deserialize)]
struct Row {
    timestamp: String,
    price: f64,
    volume: f64,
}

fn parse_csv_time(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit() || b == b'-') {
        return s.parse::<i64>().ok().and_then(DateTime::from_timestamp_millis);
    }
    parse_timestamp(s)
}

pub fn read_series<R: std::io::Read>(pair: &str, reader: R) -> Result<PriceSeries, MarketError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut points = Vec::new();
    for (row, rec) in rdr.deserialize::<Row>().enumerate() {
        let bad = |reason: String| MarketError::BadSeries { pair: pair.to_string(), row: row + 1, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let t = parse_csv_time(&rec.timestamp).ok_or_else(|| bad(format!("bad timestamp {:?}", rec.timestamp)))?;
        points.push(PricePoint { t, price: rec.price, volume: rec.volume });
    }
    PriceSeries::new(pair, points)
}

/// Load every `<TICKER>.csv` in a directory.
pub fn load_price_dir(dir: &Path) -> Result<BTreeMap<String, PriceSeries>, MarketError> {
    let read_err = |e: std::io::Error| MarketError::Read { path: dir.display().to_string(), message: e.to_string() };
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(read_err)? {
        let path = entry.map_err(read_err)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some(ticker) = path.file_stem().and_then(|s| s.to_str()).map(str::to_uppercase) else {
            continue;
        };
        let file = std::fs::File::open(&path)
            .map_err(|e| MarketError::Read { path: path.display().to_string(), message: e.to_string() })?;
        out.insert(ticker.clone(), read_series(&ticker, file)?);
    }
    Ok(out)
}

pub fn write_series(path: &Path, series: &PriceSeries) -> Result<(), MarketError> {
    let err = |e: csv::Error| MarketError::Read { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["timestamp", "price", "volume"]).map_err(err)?;
    for p in &series.points {
        w.write_record([p.t.timestamp_millis().to_string(), p.price.to_string(), p.volume.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| MarketError::Read { path: path.display().to_string(), message: e.to_string() })
}
