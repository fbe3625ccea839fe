//! Per-spreader feature vectors for diffusion graphs.
//!
//! Column order: the three OSN/market columns, then each topological
//! measure twice (binary directed graph first, weighted graph second).

pub mod centrality;
pub mod ego;
pub mod louvain;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionGraph;
use crate::events::CrowdPumpEvent;
use crate::market::MarketOutcome;
use crate::matrix::Matrix;

pub use centrality::Metric;
pub use louvain::{louvain, modularity, CommunityPartition};

pub const NUM_FEATURES: usize = 23;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "total_targets_achieved",
    "rating",
    "average_increase",
    "clustering_u",
    "clustering_w",
    "closeness_u",
    "closeness_w",
    "betweenness_u",
    "betweenness_w",
    "pagerank_u",
    "pagerank_w",
    "in_ratio_u",
    "in_ratio_w",
    "out_degree_u",
    "out_degree_w",
    "out_ratio_u",
    "out_ratio_w",
    "efficiency_u",
    "efficiency_w",
    "effective_size_u",
    "effective_size_w",
    "density_u",
    "density_w",
];

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("graph {graph}: no label for {}", .nodes.join(", "))]
    MissingLabels { graph: String, nodes: Vec<String> },
    #[error("label file row {row}: {reason}")]
    BadLabel { row: usize, reason: String },
    #[error("standardizer expects {expected} columns, got {got}")]
    Width { expected: usize, got: usize },
    #[error("no training rows to fit the standardizer")]
    EmptyFit,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub spreader: String,
    pub values: [f64; NUM_FEATURES],
}

/// Achieved and total target counts summed over a spreader's messages.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OsnFeatures {
    pub total_targets_achieved: usize,
    pub rating: f64,
    /// Set when outcomes exist but carry no targets at all.
    pub zero_total: bool,
}

pub fn osn_features<'a>(outcomes: impl IntoIterator<Item = &'a MarketOutcome>) -> OsnFeatures {
    let (achieved, total, seen) =
        outcomes.into_iter().fold((0, 0, false), |(a, t, _), o| (a + o.targets_achieved, t + o.targets_total, true));
    OsnFeatures {
        total_targets_achieved: achieved,
        rating: if total > 0 { achieved as f64 / total as f64 } else { 0.0 },
        zero_total: seen && total == 0,
    }
}

/// Mean max return; 0 when empty.
pub fn market_feature<'a>(outcomes: impl IntoIterator<Item = &'a MarketOutcome>) -> f64 {
    let (sum, n) = outcomes.into_iter().fold((0.0, 0usize), |(s, n), o| (s + o.max_return, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Binary and weighted topological columns, 10 pairs per node.
pub fn topological_features(graph: &DiffusionGraph) -> Vec<[f64; 20]> {
    let d = &graph.directed;
    let w = &graph.weighted;
    let cu = centrality::clustering_unweighted(d);
    let cw = centrality::clustering_weighted(w);
    let clu = centrality::closeness(d, Metric::Hops);
    let clw = centrality::closeness(w, Metric::InverseWeight);
    let bu = centrality::betweenness(d, Metric::Hops);
    let bw = centrality::betweenness(w, Metric::InverseWeight);
    let pu = centrality::pagerank(d);
    let pw = centrality::pagerank(w);
    let eu = ego::all_ego_features(d);
    let ew = ego::all_ego_features(w);
    (0..graph.len())
        .map(|i| {
            [
                cu[i], cw[i], clu[i], clw[i], bu[i], bw[i], pu[i], pw[i],
                eu[i].in_ratio, ew[i].in_ratio,
                eu[i].out_degree, ew[i].out_degree,
                eu[i].out_ratio, ew[i].out_ratio,
                eu[i].efficiency, ew[i].efficiency,
                eu[i].effective_size, ew[i].effective_size,
                eu[i].density, ew[i].density,
            ]
        })
        .collect()
}

/// Full feature rows for a graph. Each spreader's OSN and market columns
/// use the outcomes of its messages within `events`.
pub fn graph_features(
    graph: &DiffusionGraph,
    events: &[CrowdPumpEvent],
    outcomes: &HashMap<u64, MarketOutcome>,
) -> (Vec<NodeFeatures>, usize) {
    let mut by_spreader: BTreeMap<&str, Vec<&MarketOutcome>> = BTreeMap::new();
    for e in events {
        for m in &e.messages {
            if let Some(o) = outcomes.get(&m.pid) {
                by_spreader.entry(m.entity_id.as_str()).or_default().push(o);
            }
        }
    }
    let topo = topological_features(graph);
    let mut zero_totals = 0;
    let rows = graph
        .nodes
        .iter()
        .zip(topo)
        .map(|(node, t)| {
            let mine = by_spreader.get(node.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let osn = osn_features(mine.iter().copied());
            zero_totals += usize::from(osn.zero_total);
            let mut values = [0.0; NUM_FEATURES];
            values[0] = osn.total_targets_achieved as f64;
            values[1] = osn.rating;
            values[2] = market_feature(mine.iter().copied());
            values[3..].copy_from_slice(&t);
            NodeFeatures { spreader: node.clone(), values }
        })
        .collect();
    (rows, zero_totals)
}

// ---------------------------------------------------------------------------
// Labels and matrices

pub type Label = u8;

/// Labels keyed by `(graph_id, entity_id)`; a `None` graph applies everywhere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labels {
    map: BTreeMap<(Option<String>, String), Label>,
}

impl Labels {
    pub fn insert(&mut self, graph_id: Option<&str>, entity_id: &str, label: Label) {
        self.map.insert((graph_id.map(String::from), entity_id.to_string()), label);
    }

    pub fn get(&self, graph_id: &str, entity_id: &str) -> Option<Label> {
        self.map
            .get(&(Some(graph_id.to_string()), entity_id.to_string()))
            .or_else(|| self.map.get(&(None, entity_id.to_string())))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// CSV `entity_id,label[,graph_id]`; label is 1 (mastermind) or 0.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let mut out = Labels::default();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| FeatureError::BadLabel { row, reason: e.to_string() })?;
            let entity = rec.get(0).filter(|s| !s.is_empty()).ok_or(FeatureError::BadLabel { row, reason: "missing entity_id".into() })?;
            let label = match rec.get(1).map(str::trim) {
                Some("1") => 1,
                Some("0") => 0,
                other => return Err(FeatureError::BadLabel { row, reason: format!("label must be 0 or 1, got {other:?}") }),
            };
            let graph = rec.get(2).map(str::trim).filter(|s| !s.is_empty());
            out.insert(graph, entity, label);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let f = std::fs::File::open(path).map_err(|e| FeatureError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::read_csv(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub graph_id: String,
    pub nodes: Vec<String>,
    /// `nodes.len() × NUM_FEATURES`
    pub x: Matrix,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn mastermind_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

pub fn assemble_matrix(graph: &DiffusionGraph, rows: &[NodeFeatures], labels: &Labels) -> Result<FeatureMatrix, FeatureError> {
    let gid = graph.graph_id();
    let missing: Vec<String> = graph.nodes.iter().filter(|n| labels.get(&gid, n).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(FeatureError::MissingLabels { graph: gid, nodes: missing });
    }
    let x = Matrix::from_rows(&rows.iter().map(|r| r.values.to_vec()).collect::<Vec<_>>());
    Ok(FeatureMatrix {
        graph_id: gid.clone(),
        nodes: graph.nodes.clone(),
        x,
        labels: graph.nodes.iter().map(|n| labels.get(&gid, n).expect("checked above")).collect(),
    })
}

// ---------------------------------------------------------------------------
// Standardization

/// Column z-scores fit on training rows (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a Matrix>) -> Result<Self, FeatureError> {
        let mats: Vec<&Matrix> = matrices.into_iter().filter(|m| m.rows() > 0).collect();
        let Some(first) = mats.first() else {
            return Err(FeatureError::EmptyFit);
        };
        let cols = first.cols();
        if let Some(m) = mats.iter().find(|m| m.cols() != cols) {
            return Err(FeatureError::Width { expected: cols, got: m.cols() });
        }
        let n: usize = mats.iter().map(|m| m.rows()).sum();
        let mut mean = vec![0.0; cols];
        for m in &mats {
            for i in 0..m.rows() {
                for (acc, x) in mean.iter_mut().zip(m.row(i)) {
                    *acc += x;
                }
            }
        }
        mean.iter_mut().for_each(|x| *x /= n as f64);
        let mut var = vec![0.0; cols];
        for m in &mats {
            for i in 0..m.rows() {
                for ((acc, x), mu) in var.iter_mut().zip(m.row(i)).zip(&mean) {
                    *acc += (x - mu).powi(2);
                }
            }
        }
        let std = var.into_iter().map(|v| (v / n as f64).sqrt()).collect();
        let columns = if cols == NUM_FEATURES {
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..cols).map(|c| format!("c{c}")).collect()
        };
        Ok(Self { columns, mean, std })
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix, FeatureError> {
        if m.cols() != self.mean.len() {
            return Err(FeatureError::Width { expected: self.mean.len(), got: m.cols() });
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, x) in out.row_mut(i).iter_mut().enumerate() {
                *x = if self.std[j] > 0.0 { (*x - self.mean[j]) / self.std[j] } else { 0.0 };
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// CSV export

pub fn write_feature_csv(path: &Path, matrices: &[FeatureMatrix]) -> Result<(), FeatureError> {
    let err = |e: csv::Error| FeatureError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.extend(["entity_id", "label", "graph_id"]);
    w.write_record(&header).map_err(err)?;
    for fm in matrices {
        for (i, node) in fm.nodes.iter().enumerate() {
            let mut rec: Vec<String> = fm.x.row(i).iter().map(|v| format!("{v}")).collect();
            rec.push(node.clone());
            rec.push(fm.labels[i].to_string());
            rec.push(fm.graph_id.clone());
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| FeatureError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Graph-level check used in reports: how many labeled masterminds share a community.
pub fn mastermind_communities(partition: &CommunityPartition, fm: &FeatureMatrix) -> BTreeSet<usize> {
    fm.labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 1)
        .map(|(i, _)| partition.assignment[i])
        .collect()
}
