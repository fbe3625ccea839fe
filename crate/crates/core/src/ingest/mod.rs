//! Message corpus ingestion and entity extraction.
//!
//! Input is JSON lines of [`RawMessage`]; output is [`CrowdPumpMessage`]
//! records using the field names of the extracted-signal JSON schema.

mod ner;
mod price;
mod rules;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

pub use ner::{extract, Entities, SkipReason};
pub use price::{Price, PriceError};
pub use rules::{normalize_symbol, KeywordRole, KeywordRule, PairRule, RuleSet};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("channel {channel}, line {line}: malformed timestamp {value:?}")]
    Timestamp { channel: String, line: usize, value: String },
    #[error("line {line}: channel_id is empty")]
    EmptyChannel { line: usize },
    #[error("channel {channel}, line {line}: message text is empty")]
    EmptyText { channel: String, line: usize },
    #[error("symbol {0:?} is empty after stripping quote currencies")]
    EmptySymbol(String),
    #[error("rule file: {0}")]
    Rules(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Long,
    Short,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Long => "Long",
            Direction::Short => "Short",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMessage {
    pub channel_id: String,
    pub timestamp: String,
    pub text: String,
    #[serde(default)]
    pub channel_participants: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdPumpMessage {
    #[serde(rename = "PID", alias = "pid")]
    pub pid: u64,
    pub entity_id: String,
    pub trade_direction: Direction,
    #[serde(with = "listing_time")]
    pub source_datetime: DateTime<Utc>,
    pub exchange: String,
    pub cryptocurrency: String,
    pub channel_participants: u64,
    pub entry_prices: Vec<Price>,
    pub target_prices: Vec<Price>,
    pub stop_loss: Option<Price>,
    pub message_text: String,
}

/// Per-reason counts of discarded input lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub no_entities: usize,
    pub parse_error: usize,
    pub ambiguous: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub messages: Vec<CrowdPumpMessage>,
    pub skips: SkipReport,
    /// Recoverable per-line errors, in input order.
    pub errors: Vec<String>,
}

const LISTING_FORMAT: &str = "%m-%d-%Y %H:%M:%S";

const NAIVE_FORMATS: [&str; 4] = [LISTING_FORMAT, "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"];

/// Accepts `MM-DD-YYYY HH:MM:SS` and ISO-8601 (with or without offset).
/// Naive times are taken as UTC; sub-second parts are truncated.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    let parsed = DateTime::parse_from_rfc3339(s).map(|d| d.with_timezone(&Utc)).ok().or_else(|| {
        NAIVE_FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .map(|n| n.and_utc())
    })?;
    DateTime::from_timestamp(parsed.timestamp(), 0)
}

mod listing_time {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format(super::LISTING_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp {raw:?}")))
    }
}

/// Outcome of running extraction on one raw message.
#[derive(Debug, Clone, PartialEq)]
pub enum Extraction {
    Message(CrowdPumpMessage),
    Skipped(SkipReason),
}

/// Validate and extract one message; `line` is used for error positions.
pub fn classify_message(
    rules: &RuleSet,
    raw: &RawMessage,
    pid: u64,
    line: usize,
) -> Result<Extraction, IngestError> {
    if raw.channel_id.trim().is_empty() {
        return Err(IngestError::EmptyChannel { line });
    }
    let source_datetime = parse_timestamp(&raw.timestamp).ok_or_else(|| IngestError::Timestamp {
        channel: raw.channel_id.clone(),
        line,
        value: raw.timestamp.clone(),
    })?;
    if raw.text.trim().is_empty() {
        return Err(IngestError::EmptyText { channel: raw.channel_id.clone(), line });
    }
    Ok(match extract(rules, &raw.text) {
        Ok(e) => Extraction::Message(CrowdPumpMessage {
            pid,
            entity_id: raw.channel_id.clone(),
            trade_direction: e.direction,
            source_datetime,
            exchange: e.exchange,
            cryptocurrency: e.cryptocurrency,
            channel_participants: raw.channel_participants,
            entry_prices: e.entry_prices,
            target_prices: e.target_prices,
            stop_loss: e.stop_loss,
            message_text: raw.text.clone(),
        }),
        Err(reason) => Extraction::Skipped(reason),
    })
}

/// Extract a message with the builtin rules. Skipped messages yield `None`.
pub fn parse_message(raw: &RawMessage, next_pid: u64) -> Result<Option<CrowdPumpMessage>, IngestError> {
    let line = usize::try_from(next_pid).unwrap_or(usize::MAX);
    Ok(match classify_message(RuleSet::builtin(), raw, next_pid, line)? {
        Extraction::Message(m) => Some(m),
        Extraction::Skipped(_) => None,
    })
}

/// Parse a JSON-lines corpus from any reader. Pids are 1-based line numbers.
pub fn parse_corpus_reader<R: Read>(rules: &RuleSet, reader: R) -> Result<ParsedCorpus, IngestError> {
    let mut out = ParsedCorpus::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| IngestError::Io { path: format!("line {lineno}"), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawMessage = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                out.skips.parse_error += 1;
                out.errors.push(IngestError::Json { line: lineno, message: e.to_string() }.to_string());
                continue;
            }
        };
        match classify_message(rules, &raw, lineno as u64, lineno) {
            Ok(Extraction::Message(m)) => out.messages.push(m),
            Ok(Extraction::Skipped(SkipReason::NoEntities)) => out.skips.no_entities += 1,
            Ok(Extraction::Skipped(SkipReason::Ambiguous)) => out.skips.ambiguous += 1,
            Err(e) => {
                out.skips.parse_error += 1;
                out.errors.push(e.to_string());
            }
        }
    }
    sort_messages(&mut out.messages);
    Ok(out)
}

/// Parse a corpus file with the builtin rules.
pub fn parse_corpus(path: &Path) -> Result<ParsedCorpus, IngestError> {
    parse_corpus_with(RuleSet::builtin(), path)
}

pub fn parse_corpus_with(rules: &RuleSet, path: &Path) -> Result<ParsedCorpus, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    parse_corpus_reader(rules, file)
}

/// Chronological order with channel and pid as tie-breakers.
pub fn sort_messages(messages: &mut [CrowdPumpMessage]) {
    messages.sort_by(|a, b| {
        (a.source_datetime, &a.entity_id, a.pid).cmp(&(b.source_datetime, &b.entity_id, b.pid))
    });
}

pub fn write_messages(path: &Path, messages: &[CrowdPumpMessage]) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for m in messages {
        let line = serde_json::to_string(m).expect("message serialization cannot fail");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_messages(path: &Path) -> Result<Vec<CrowdPumpMessage>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let m = serde_json::from_str(&line).map_err(|e| IngestError::Json { line: idx + 1, message: e.to_string() })?;
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(ts: &str, text: &str) -> RawMessage {
        RawMessage { channel_id: "-1001313911314".into(), timestamp: ts.into(), text: text.into(), channel_participants: 38046 }
    }

    const VET: &str = "SCAPING300. VETUSDT. Direction: SHORT. Leverage: Cross 20x. Entry: 0.03518, 0.03528. Stoploss: 0.037994. SCALPING: Target1 - 0.035004, Target2 - 0.034828, Target3 - 0.034476. DAY TRADING: Target4 - 0.034124, Target5 - 0.033772, Target6 - 0.033421. SWING TRADING: Target7 - 0.033069, Target8 - 0.032717";

    #[test]
    fn timestamp_formats() {
        let a = parse_timestamp("05-01-2024 03:14:42").unwrap();
        let b = parse_timestamp("2024-05-01T03:14:42Z").unwrap();
        let c = parse_timestamp("2024-05-01T05:14:42.731+02:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(parse_timestamp("yesterday").is_none());
        assert!(parse_timestamp("13-45-2024 03:14:42").is_none());
    }

    #[test]
    fn listing_json_shape() {
        let m = parse_message(&raw("05-01-2024 03:14:42", VET), 398868).unwrap().unwrap();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["PID"], 398868);
        assert_eq!(v["trade_direction"], "Short");
        assert_eq!(v["source_datetime"], "05-01-2024 03:14:42");
        assert_eq!(v["cryptocurrency"], "VET");
        assert_eq!(v["stop_loss"], serde_json::json!(0.037994));
        assert_eq!(v["entry_prices"], serde_json::json!([0.03518, 0.03528]));
        let back: CrowdPumpMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_timestamp_reports_channel_and_line() {
        let err = classify_message(RuleSet::builtin(), &raw("not a time", VET), 1, 17).unwrap_err();
        match err {
            IngestError::Timestamp { channel, line, .. } => {
                assert_eq!(channel, "-1001313911314");
                assert_eq!(line, 17);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_corpus() {
        let c = parse_corpus_reader(RuleSet::builtin(), "".as_bytes()).unwrap();
        assert!(c.messages.is_empty());
        assert_eq!(c.skips, SkipReport::default());
    }

    #[test]
    fn corpus_counts_and_pids() {
        let line = serde_json::to_string(&raw("2024-05-01T03:14:42Z", VET)).unwrap();
        let chat = serde_json::to_string(&raw("2024-05-01T03:15:00Z", "gm")).unwrap();
        let bad = serde_json::to_string(&raw("garbage", VET)).unwrap();
        let text = format!("{line}\n{chat}\n{line}\n{bad}\n{{oops\n");
        let c = parse_corpus_reader(RuleSet::builtin(), text.as_bytes()).unwrap();
        assert_eq!(c.messages.len(), 2);
        assert_eq!(c.messages[0].pid, 1);
        assert_eq!(c.messages[1].pid, 3);
        assert_eq!(c.skips, SkipReport { no_entities: 1, parse_error: 2, ambiguous: 0 });
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(parse_corpus(Path::new("/nonexistent/corpus.jsonl")), Err(IngestError::Io { .. })));
    }
}
