//! Grouping of parsed messages into crowd-pump events.
//!
//! Messages are grouped per observation period, coin and direction. Each
//! group is cut wherever the gap between consecutive messages exceeds the
//! group's threshold, the lesser of the 95th-percentile gap and 72 hours.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{CrowdPumpMessage, Direction};

/// Upper bound on the segmentation threshold, in seconds.
pub const GAP_CAP_SECS: f64 = 72.0 * 3600.0;

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("gap list is empty")]
    EmptyGaps,
    #[error("gap {0} is negative or not finite")]
    BadGap(f64),
    #[error("messages are not sorted at position {0}")]
    Unsorted(usize),
    #[error("message {pid} does not belong to group {coin}/{direction}")]
    MixedGroup { pid: u64, coin: String, direction: Direction },
    #[error("message {pid} lies outside period {label}")]
    OutsidePeriod { pid: u64, label: String },
    #[error("period {0} is empty or inverted")]
    InvalidPeriod(String),
    #[error("periods {0} and {1} overlap")]
    OverlappingPeriods(String, String),
    #[error("event {event_id} references unknown message {pid}")]
    UnknownPid { event_id: u64, pid: u64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPeriod {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub label: String,
}

impl ObservationPeriod {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>, label: impl Into<String>) -> Result<Self, EventError> {
        let label = label.into();
        if start >= end {
            return Err(EventError::InvalidPeriod(label));
        }
        Ok(Self { start, end, label })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrowdPumpEvent {
    pub event_id: u64,
    pub cryptocurrency: String,
    pub direction: Direction,
    pub messages: Vec<CrowdPumpMessage>,
}

impl CrowdPumpEvent {
    pub fn spreaders(&self) -> impl Iterator<Item = &str> {
        self.messages.iter().map(|m| m.entity_id.as_str())
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.messages[0].source_datetime
    }
}

/// Events of one coin within one period, both directions pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSet {
    pub period: String,
    pub cryptocurrency: String,
    pub events: Vec<CrowdPumpEvent>,
    /// Threshold used per direction, in seconds.
    pub thresholds: BTreeMap<Direction, f64>,
    /// Repeat messages from a channel already present in its event.
    pub duplicates: usize,
}

/// Keyed by (period index, coin).
pub type EventSets = BTreeMap<(usize, String), EventSet>;

/// Percentile by linear interpolation at zero-based index `q·(k−1)`.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `min(P95(gaps), 72h)`, gaps and result in seconds.
pub fn compute_gap_threshold(gaps: &[f64]) -> Result<f64, EventError> {
    compute_gap_threshold_capped(gaps, GAP_CAP_SECS)
}

/// `min(P95(gaps), cap_secs)`.
pub fn compute_gap_threshold_capped(gaps: &[f64], cap_secs: f64) -> Result<f64, EventError> {
    if gaps.is_empty() {
        return Err(EventError::EmptyGaps);
    }
    if let Some(&g) = gaps.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(EventError::BadGap(g));
    }
    let mut sorted = gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_linear(&sorted, 0.95).min(cap_secs))
}

fn order_key(m: &CrowdPumpMessage) -> (DateTime<Utc>, &str) {
    (m.source_datetime, m.entity_id.as_str())
}

fn check_sorted(messages: &[CrowdPumpMessage]) -> Result<(), EventError> {
    match messages.windows(2).position(|w| order_key(&w[0]) > order_key(&w[1])) {
        Some(i) => Err(EventError::Unsorted(i + 1)),
        None => Ok(()),
    }
}

fn gaps_secs(messages: &[CrowdPumpMessage]) -> Vec<f64> {
    messages
        .windows(2)
        .map(|w| (w[1].source_datetime - w[0].source_datetime).num_seconds() as f64)
        .collect()
}

/// Result of cutting one group into events.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub events: Vec<CrowdPumpEvent>,
    pub threshold_secs: f64,
    pub duplicates: usize,
}

/// Cut a sorted single-group sequence at gaps strictly above `threshold_secs`.
/// Event ids count up from `first_id`.
pub fn segment_with_threshold(
    messages: &[CrowdPumpMessage],
    threshold_secs: f64,
    first_id: u64,
) -> Result<Segmentation, EventError> {
    check_sorted(messages)?;
    let Some(first) = messages.first() else {
        return Ok(Segmentation { events: Vec::new(), threshold_secs, duplicates: 0 });
    };
    let (coin, direction) = (&first.cryptocurrency, first.trade_direction);
    if let Some(m) = messages.iter().find(|m| &m.cryptocurrency != coin || m.trade_direction != direction) {
        return Err(EventError::MixedGroup { pid: m.pid, coin: coin.clone(), direction });
    }

    let mut events = Vec::new();
    let mut duplicates = 0;
    let mut current: Vec<CrowdPumpMessage> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut prev: Option<DateTime<Utc>> = None;
    let flush = |current: &mut Vec<CrowdPumpMessage>, events: &mut Vec<CrowdPumpEvent>| {
        if !current.is_empty() {
            events.push(CrowdPumpEvent {
                event_id: first_id + events.len() as u64,
                cryptocurrency: coin.clone(),
                direction,
                messages: std::mem::take(current),
            });
        }
    };
    for m in messages {
        if let Some(p) = prev {
            if (m.source_datetime - p).num_seconds() as f64 > threshold_secs {
                flush(&mut current, &mut events);
                seen.clear();
            }
        }
        prev = Some(m.source_datetime);
        if seen.insert(m.entity_id.as_str()) {
            current.push(m.clone());
        } else {
            duplicates += 1;
        }
    }
    flush(&mut current, &mut events);
    Ok(Segmentation { events, threshold_secs, duplicates })
}

/// Segment one (coin, direction) group of a period using its own threshold.
pub fn segment_events(
    messages: &[CrowdPumpMessage],
    period: &ObservationPeriod,
) -> Result<Segmentation, EventError> {
    segment_events_capped(messages, period, GAP_CAP_SECS)
}

pub fn segment_events_capped(
    messages: &[CrowdPumpMessage],
    period: &ObservationPeriod,
    cap_secs: f64,
) -> Result<Segmentation, EventError> {
    if let Some(m) = messages.iter().find(|m| !period.contains(m.source_datetime)) {
        return Err(EventError::OutsidePeriod { pid: m.pid, label: period.label.clone() });
    }
    check_sorted(messages)?;
    let gaps = gaps_secs(messages);
    let threshold = if gaps.is_empty() { cap_secs } else { compute_gap_threshold_capped(&gaps, cap_secs)? };
    segment_with_threshold(messages, threshold, 0)
}

fn check_periods(periods: &[ObservationPeriod]) -> Result<(), EventError> {
    for p in periods {
        if p.start >= p.end {
            return Err(EventError::InvalidPeriod(p.label.clone()));
        }
    }
    for (i, a) in periods.iter().enumerate() {
        for b in &periods[i + 1..] {
            if a.start < b.end && b.start < a.end {
                return Err(EventError::OverlappingPeriods(a.label.clone(), b.label.clone()));
            }
        }
    }
    Ok(())
}

/// Build per-(period, coin) event sets. Messages outside every period are ignored.
/// Event ids are unique across the whole result.
pub fn build_event_sets(
    messages: &[CrowdPumpMessage],
    periods: &[ObservationPeriod],
) -> Result<EventSets, EventError> {
    build_event_sets_capped(messages, periods, GAP_CAP_SECS)
}

pub fn build_event_sets_capped(
    messages: &[CrowdPumpMessage],
    periods: &[ObservationPeriod],
    cap_secs: f64,
) -> Result<EventSets, EventError> {
    check_periods(periods)?;
    let mut groups: BTreeMap<(usize, String, Direction), Vec<CrowdPumpMessage>> = BTreeMap::new();
    for m in messages {
        if let Some(pi) = periods.iter().position(|p| p.contains(m.source_datetime)) {
            groups
                .entry((pi, m.cryptocurrency.clone(), m.trade_direction))
                .or_default()
                .push(m.clone());
        }
    }

    let mut sets: EventSets = BTreeMap::new();
    for ((pi, coin, direction), mut group) in groups {
        group.sort_by(|a, b| order_key(a).cmp(&order_key(b)).then(a.pid.cmp(&b.pid)));
        let seg = segment_events_capped(&group, &periods[pi], cap_secs)?;
        let set = sets.entry((pi, coin.clone())).or_insert_with(|| EventSet {
            period: periods[pi].label.clone(),
            cryptocurrency: coin.clone(),
            events: Vec::new(),
            thresholds: BTreeMap::new(),
            duplicates: 0,
        });
        set.thresholds.insert(direction, seg.threshold_secs);
        set.duplicates += seg.duplicates;
        set.events.extend(seg.events);
    }

    let mut next_id = 0;
    for set in sets.values_mut() {
        set.events.sort_by(|a, b| (a.start(), a.direction).cmp(&(b.start(), b.direction)));
        for e in &mut set.events {
            e.event_id = next_id;
            next_id += 1;
        }
    }
    Ok(sets)
}

// ---------------------------------------------------------------------------
// Evasion flags

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    SameSecond,
    IdenticalText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub event_id: u64,
    pub cryptocurrency: String,
    pub channels: Vec<String>,
    pub reasons: Vec<FlagReason>,
}

/// Flag events where at least 3 channels post in the same second or at
/// least 2 channels post byte-identical text.
pub fn flag_concurrent_broadcasts(events: &[CrowdPumpEvent]) -> Vec<Flag> {
    let mut flags = Vec::new();
    for event in events {
        let mut by_second: BTreeMap<i64, BTreeSet<&str>> = BTreeMap::new();
        let mut by_text: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for m in &event.messages {
            by_second.entry(m.source_datetime.timestamp()).or_default().insert(&m.entity_id);
            by_text.entry(m.message_text.as_str()).or_default().insert(&m.entity_id);
        }
        let mut channels: BTreeSet<&str> = BTreeSet::new();
        let mut reasons = Vec::new();
        for chans in by_second.values().filter(|c| c.len() >= 3) {
            channels.extend(chans);
            if !reasons.contains(&FlagReason::SameSecond) {
                reasons.push(FlagReason::SameSecond);
            }
        }
        for chans in by_text.values().filter(|c| c.len() >= 2) {
            channels.extend(chans);
            if !reasons.contains(&FlagReason::IdenticalText) {
                reasons.push(FlagReason::IdenticalText);
            }
        }
        if !reasons.is_empty() {
            flags.push(Flag {
                event_id: event.event_id,
                cryptocurrency: event.cryptocurrency.clone(),
                channels: channels.into_iter().map(String::from).collect(),
                reasons,
            });
        }
    }
    flags
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: u64,
    pub cryptocurrency: String,
    pub direction: Direction,
    pub messages: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<String>,
}

impl From<&CrowdPumpEvent> for EventRecord {
    fn from(e: &CrowdPumpEvent) -> Self {
        Self {
            event_id: e.event_id,
            cryptocurrency: e.cryptocurrency.clone(),
            direction: e.direction,
            messages: e.messages.iter().map(|m| m.pid).collect(),
            period: None,
        }
    }
}

/// Rebuild events from records and the message pool they reference.
pub fn resolve_records(
    records: &[EventRecord],
    messages: &[CrowdPumpMessage],
) -> Result<Vec<CrowdPumpEvent>, EventError> {
    let by_pid: HashMap<u64, &CrowdPumpMessage> = messages.iter().map(|m| (m.pid, m)).collect();
    records
        .iter()
        .map(|r| {
            let msgs = r
                .messages
                .iter()
                .map(|pid| {
                    by_pid
                        .get(pid)
                        .map(|m| (*m).clone())
                        .ok_or(EventError::UnknownPid { event_id: r.event_id, pid: *pid })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CrowdPumpEvent {
                event_id: r.event_id,
                cryptocurrency: r.cryptocurrency.clone(),
                direction: r.direction,
                messages: msgs,
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EventError> {
    let io_err = |source| EventError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| EventError::Json { line: 0, message: e.to_string() })?;
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EventError> {
    let io_err = |source| EventError::Io { path: path.display().to_string(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EventError::Json { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}
