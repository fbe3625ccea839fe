//! Diffusion-network inference from event cascades.
//!
//! Each event yields a ranking of its spreaders by first-message time. For
//! every ordered pair the rank gap gives a forward pair strength `h`, which
//! is normalized per sender into `λ`. Co-participation across events gives
//! the Jaccard similarity `θ`. The two combine into a weighted adjacency
//! `W` scaled to a maximum of 1, and the dominant direction of each pair
//! gives the binary adjacency `W*`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::events::{CrowdPumpEvent, EventSets};
use crate::matrix::Matrix;

/// Graphs with fewer spreaders are dropped.
pub const MIN_SPREADERS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum DiffusionError {
    #[error("pair strength needs two distinct spreaders, got {0} twice")]
    SameSpreader(String),
    #[error("spreader {0} does not take part in the event")]
    NotParticipant(String),
    #[error("graph has {0} spreaders, at least {MIN_SPREADERS} required")]
    GraphTooSmall(usize),
    #[error("no events")]
    NoEvents,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How `θ` and `λ` are combined into a raw edge weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `θ_rs · Σ_i λ_rs(i)`
    #[default]
    DaniProduct,
    /// `Σ_i θ_rs / λ_rs(i)` over events with `λ_rs(i) > 0`
    InverseSum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingVector {
    pub event_id: u64,
    pub ranks: BTreeMap<String, usize>,
}

/// 1-based ranks by `(time, entity_id)`.
pub fn ranking_vector(event: &CrowdPumpEvent) -> RankingVector {
    let mut order: Vec<_> = event.messages.iter().map(|m| (m.source_datetime, m.entity_id.as_str())).collect();
    order.sort();
    let mut ranks = BTreeMap::new();
    for (_, id) in order {
        let next = ranks.len() + 1;
        ranks.entry(id.to_string()).or_insert(next);
    }
    RankingVector { event_id: event.event_id, ranks }
}

/// `1 / (l_s (l_s − l_r))` for forward pairs, 0 otherwise.
pub fn pair_strength(l: &RankingVector, r: &str, s: &str) -> Result<f64, DiffusionError> {
    if r == s {
        return Err(DiffusionError::SameSpreader(r.to_string()));
    }
    let lr = *l.ranks.get(r).ok_or_else(|| DiffusionError::NotParticipant(r.to_string()))? as f64;
    let ls = *l.ranks.get(s).ok_or_else(|| DiffusionError::NotParticipant(s.to_string()))? as f64;
    Ok(if lr < ls { 1.0 / (ls * (ls - lr)) } else { 0.0 })
}

/// Per-sender normalized strengths; only nonzero entries are stored.
pub fn lambda_weights(event: &CrowdPumpEvent) -> BTreeMap<(String, String), f64> {
    let l = ranking_vector(event);
    let mut out = BTreeMap::new();
    for r in l.ranks.keys() {
        let strengths: Vec<(&String, f64)> = l
            .ranks
            .keys()
            .filter(|s| *s != r)
            .map(|s| (s, pair_strength(&l, r, s).expect("both participate")))
            .collect();
        let total: f64 = strengths.iter().map(|(_, h)| h).sum();
        if total <= 0.0 {
            continue;
        }
        for (s, h) in strengths {
            if h > 0.0 {
                out.insert((r.clone(), s.clone()), h / total);
            }
        }
    }
    out
}

/// Event ids per spreader.
pub fn participation(events: &[CrowdPumpEvent]) -> BTreeMap<String, BTreeSet<u64>> {
    let mut out: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    for e in events {
        for s in e.spreaders() {
            out.entry(s.to_string()).or_default().insert(e.event_id);
        }
    }
    out
}

pub fn jaccard_theta(participation: &BTreeMap<String, BTreeSet<u64>>, r: &str, s: &str) -> f64 {
    let empty = BTreeSet::new();
    let a = participation.get(r).unwrap_or(&empty);
    let b = participation.get(s).unwrap_or(&empty);
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Nodes in lexicographic order and the normalized weighted adjacency.
pub fn infer_weighted(events: &[CrowdPumpEvent], mode: Aggregation) -> Result<(Vec<String>, Matrix), DiffusionError> {
    if events.is_empty() {
        return Err(DiffusionError::NoEvents);
    }
    let part = participation(events);
    let nodes: Vec<String> = part.keys().cloned().collect();
    if nodes.len() < MIN_SPREADERS {
        return Err(DiffusionError::GraphTooSmall(nodes.len()));
    }
    let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let n = nodes.len();
    let mut lambda_sum = Matrix::zeros(n, n);
    let mut inverse_sum = Matrix::zeros(n, n);
    for e in events {
        for ((r, s), lam) in lambda_weights(e) {
            let (i, j) = (index[r.as_str()], index[s.as_str()]);
            lambda_sum[(i, j)] += lam;
            inverse_sum[(i, j)] += 1.0 / lam;
        }
    }
    let mut raw = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || lambda_sum[(i, j)] == 0.0 {
                continue;
            }
            let theta = jaccard_theta(&part, &nodes[i], &nodes[j]);
            raw[(i, j)] = match mode {
                Aggregation::DaniProduct => theta * lambda_sum[(i, j)],
                Aggregation::InverseSum => theta * inverse_sum[(i, j)],
            };
        }
    }
    let max = raw.max();
    if max > 0.0 {
        raw = raw.scale(1.0 / max);
    }
    Ok((nodes, raw))
}

/// Relative gap below which two weights count as tied.
pub const TIE_EPS: f64 = 1e-12;

/// `W*_rs = 1` iff `W_rs > W_sr`. Weights equal up to rounding are ties.
pub fn derive_directed(w: &Matrix) -> Matrix {
    let n = w.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (w[(i, j)], w[(j, i)]);
            if i != j && a - b > TIE_EPS * a.abs().max(b.abs()) {
                out[(i, j)] = 1.0;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionGraph {
    pub cryptocurrency: String,
    pub period: String,
    pub nodes: Vec<String>,
    pub weighted: Matrix,
    pub directed: Matrix,
    pub event_participation: BTreeMap<String, BTreeSet<u64>>,
}

impl DiffusionGraph {
    /// `"<period>:<COIN>"`
    pub fn graph_id(&self) -> String {
        format!("{}:{}", self.period, self.cryptocurrency)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(node)).ok()
    }
}

pub fn infer_graph(
    cryptocurrency: &str,
    period: &str,
    events: &[CrowdPumpEvent],
    mode: Aggregation,
) -> Result<DiffusionGraph, DiffusionError> {
    let (nodes, weighted) = infer_weighted(events, mode)?;
    let directed = derive_directed(&weighted);
    Ok(DiffusionGraph {
        cryptocurrency: cryptocurrency.to_string(),
        period: period.to_string(),
        nodes,
        weighted,
        directed,
        event_participation: participation(events),
    })
}

/// One graph per event set; sets below the spreader minimum are counted and skipped.
pub fn build_graphs(sets: &EventSets, mode: Aggregation) -> Result<(Vec<DiffusionGraph>, usize), DiffusionError> {
    let mut graphs = Vec::new();
    let mut dropped = 0;
    for set in sets.values() {
        match infer_graph(&set.cryptocurrency, &set.period, &set.events, mode) {
            Ok(g) => graphs.push(g),
            Err(DiffusionError::GraphTooSmall(_) | DiffusionError::NoEvents) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((graphs, dropped))
}

// ---------------------------------------------------------------------------
// Export

fn write_file(path: &Path, body: &str) -> Result<(), DiffusionError> {
    let mut f = std::fs::File::create(path).map_err(|source| DiffusionError::Io { path: path.display().to_string(), source })?;
    f.write_all(body.as_bytes()).map_err(|source| DiffusionError::Io { path: path.display().to_string(), source })
}

pub fn weighted_tsv(g: &DiffusionGraph) -> String {
    let mut out = String::new();
    for i in 0..g.len() {
        for j in 0..g.len() {
            let w = g.weighted[(i, j)];
            if w > 0.0 {
                out.push_str(&format!("{}\t{}\t{:.9}\n", g.nodes[i], g.nodes[j], w));
            }
        }
    }
    out
}

pub fn directed_tsv(g: &DiffusionGraph) -> String {
    let mut out = String::new();
    for i in 0..g.len() {
        for j in 0..g.len() {
            if g.directed[(i, j)] > 0.0 {
                out.push_str(&format!("{}\t{}\n", g.nodes[i], g.nodes[j]));
            }
        }
    }
    out
}

pub fn node_index_tsv(g: &DiffusionGraph) -> String {
    g.nodes.iter().enumerate().map(|(i, n)| format!("{i}\t{n}\n")).collect()
}

/// Writes `<stem>.weighted.tsv`, `<stem>.directed.tsv` and `<stem>.nodes.tsv` into `dir`.
pub fn export_graph(dir: &Path, stem: &str, g: &DiffusionGraph) -> Result<(), DiffusionError> {
    write_file(&dir.join(format!("{stem}.weighted.tsv")), &weighted_tsv(g))?;
    write_file(&dir.join(format!("{stem}.directed.tsv")), &directed_tsv(g))?;
    write_file(&dir.join(format!("{stem}.nodes.tsv")), &node_index_tsv(g))
}
