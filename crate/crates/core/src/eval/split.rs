//! Chronological train/validation/test split by token count.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::events::ObservationPeriod;
use crate::ingest::CrowdPumpMessage;

/// A token counts in a split only when this many distinct spreaders target it there.
pub const MIN_TOKEN_SPREADERS: usize = 4;
const GRID: usize = 40;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("split fractions must be three positive numbers summing to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("messages are not sorted by time at index {0}")]
    Unsorted(usize),
    #[error("infeasible split: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub label: String,
    pub tokens: Vec<String>,
    pub messages: usize,
    pub spreaders: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub cut1: DateTime<Utc>,
    pub cut2: DateTime<Utc>,
    pub targets: [f64; 3],
    /// Share of eligible tokens per split.
    pub fractions: [f64; 3],
    pub splits: Vec<SplitSummary>,
    pub periods: Vec<ObservationPeriod>,
}

pub const SPLIT_LABELS: [&str; 3] = ["train", "val", "test"];

/// Tokens with enough spreaders among `msgs`.
fn eligible(msgs: &[CrowdPumpMessage]) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut by_token: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for m in msgs {
        by_token.entry(&m.cryptocurrency).or_default().insert(&m.entity_id);
    }
    by_token.retain(|_, s| s.len() >= MIN_TOKEN_SPREADERS);
    by_token
}

fn counts(msgs: &[CrowdPumpMessage], i: usize, j: usize) -> [usize; 3] {
    [eligible(&msgs[..i]).len(), eligible(&msgs[i..j]).len(), eligible(&msgs[j..]).len()]
}

fn distance(c: [usize; 3], targets: [f64; 3]) -> f64 {
    let total: usize = c.iter().sum();
    if c.contains(&0) {
        return f64::INFINITY;
    }
    c.iter().zip(targets).map(|(&k, t)| (k as f64 / total as f64 - t).abs()).sum()
}

/// Indices where a new timestamp begins; a cut never separates equal times.
fn boundaries(msgs: &[CrowdPumpMessage]) -> Vec<usize> {
    (1..msgs.len()).filter(|&i| msgs[i].source_datetime > msgs[i - 1].source_datetime).collect()
}

fn grid(candidates: &[usize], lo: usize, hi: usize) -> Vec<usize> {
    let span = &candidates[lo..hi];
    if span.len() <= GRID {
        return span.to_vec();
    }
    let mut out: Vec<usize> = (0..GRID).map(|k| span[k * (span.len() - 1) / (GRID - 1)]).collect();
    out.dedup();
    out
}

/// Coarse-to-fine search over cut timestamps minimizing the L1 distance
/// between achieved and target token fractions.
pub fn chronological_split(msgs: &[CrowdPumpMessage], targets: [f64; 3]) -> Result<SplitPlan, SplitError> {
    if targets.iter().any(|&t| !(t > 0.0)) || (targets.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadFractions(targets));
    }
    if let Some(i) = (1..msgs.len()).find(|&i| msgs[i].source_datetime < msgs[i - 1].source_datetime) {
        return Err(SplitError::Unsorted(i));
    }
    let cands = boundaries(msgs);
    if cands.len() < 2 || eligible(msgs).len() < 3 {
        return Err(SplitError::Infeasible(format!(
            "{} eligible tokens over {} distinct timestamps",
            eligible(msgs).len(),
            cands.len() + usize::from(!msgs.is_empty())
        )));
    }
    // positions into `cands`
    let mut window = (0, cands.len(), 0, cands.len());
    let mut best: Option<(f64, usize, usize)> = None;
    loop {
        let first = grid(&cands, window.0, window.1);
        let second = grid(&cands, window.2, window.3);
        let mut improved = false;
        for &i in &first {
            for &j in second.iter().filter(|&&j| j > i) {
                let d = distance(counts(msgs, i, j), targets);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                    improved = true;
                }
            }
        }
        let Some((_, bi, bj)) = best else { break };
        let pi = cands.binary_search(&bi).expect("cut is a candidate");
        let pj = cands.binary_search(&bj).expect("cut is a candidate");
        let step1 = (window.1 - window.0).div_ceil(GRID);
        let step2 = (window.3 - window.2).div_ceil(GRID);
        let next = (
            pi.saturating_sub(step1),
            (pi + step1 + 1).min(cands.len()),
            pj.saturating_sub(step2),
            (pj + step2 + 1).min(cands.len()),
        );
        if next == window || (!improved && step1 <= 1 && step2 <= 1) {
            break;
        }
        window = next;
    }
    let (d, i, j) = best.expect("candidates exist");
    if !d.is_finite() {
        return Err(SplitError::Infeasible("no cut leaves an eligible token in every split".into()));
    }
    let parts = [&msgs[..i], &msgs[i..j], &msgs[j..]];
    let c = counts(msgs, i, j);
    let total: usize = c.iter().sum();
    let splits = parts
        .iter()
        .zip(SPLIT_LABELS)
        .map(|(part, label)| {
            let tokens = eligible(part);
            SplitSummary {
                label: label.to_string(),
                tokens: tokens.keys().map(|s| s.to_string()).collect(),
                messages: part.len(),
                spreaders: part.iter().map(|m| m.entity_id.as_str()).collect::<BTreeSet<_>>().len(),
            }
        })
        .collect();
    let (cut1, cut2) = (msgs[i].source_datetime, msgs[j].source_datetime);
    let start = msgs[0].source_datetime;
    let end = msgs[msgs.len() - 1].source_datetime + Duration::seconds(1);
    let periods = [(start, cut1), (cut1, cut2), (cut2, end)]
        .into_iter()
        .zip(SPLIT_LABELS)
        .map(|((s, e), l)| ObservationPeriod::new(s, e, l).expect("cuts are strictly increasing"))
        .collect();
    Ok(SplitPlan {
        cut1,
        cut2,
        targets,
        fractions: c.map(|k| k as f64 / total as f64),
        splits,
        periods,
    })
}
