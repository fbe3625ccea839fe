//! The evaluation report: per-variant metrics, feature t-tests, communities.

use std::collections::BTreeMap;

use pumptrace_core::diffusion::DiffusionGraph;
use pumptrace_core::eval::{self, Confusion, Metrics, SplitPlan, SweepRow};
use pumptrace_core::features::{self, FeatureMatrix, FEATURE_NAMES};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::pipeline::{confusion_of, Prediction};

pub const NOTES: [&str; 2] = [
    "precision, recall, F1 and MCC are 0 when their denominator is 0",
    "t-tests are Welch two-sample tests, masterminds against accomplices",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub nodes: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
    /// Absent when the split holds a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantEval {
    /// Best-F1 threshold on the validation split.
    pub threshold: f64,
    pub val: SplitScores,
    pub test: SplitScores,
    pub val_sweep: Vec<SweepRow>,
    pub test_sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTest {
    pub feature: String,
    pub mastermind_mean: f64,
    pub accomplice_mean: f64,
    pub statistic: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySummary {
    pub graph_id: String,
    pub communities: usize,
    pub modularity: f64,
    pub masterminds: usize,
    /// Distinct communities holding at least one mastermind.
    pub mastermind_communities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub artifact_version: u32,
    pub config: PipelineConfig,
    pub split: SplitPlan,
    pub variants: BTreeMap<String, VariantEval>,
    pub t_tests: Vec<FeatureTest>,
    pub communities: Vec<CommunitySummary>,
    pub notes: Vec<String>,
}

fn scores(preds: &[&Prediction], threshold: f64) -> SplitScores {
    let confusion = confusion_of(preds, threshold);
    let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    SplitScores { nodes: preds.len(), confusion, metrics: confusion.metrics(), auc: eval::roc_auc(&probs, &labels).ok() }
}

fn sweep(preds: &[&Prediction], grid: &[f64]) -> Vec<SweepRow> {
    let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    eval::threshold_sweep(&probs, &labels, grid)
}

pub fn evaluate_variant(preds: &[Prediction], grid: &[f64]) -> VariantEval {
    let val: Vec<&Prediction> = preds.iter().filter(|p| p.period == "val").collect();
    let test: Vec<&Prediction> = preds.iter().filter(|p| p.period == "test").collect();
    let val_sweep = sweep(&val, grid);
    let threshold = if val.is_empty() { 0.5 } else { eval::best_threshold(&val_sweep).unwrap_or(0.5) };
    VariantEval {
        threshold,
        val: scores(&val, threshold),
        test: scores(&test, threshold),
        val_sweep,
        test_sweep: sweep(&test, grid),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One Welch test per feature column over every node of every graph.
pub fn feature_t_tests(fms: &[FeatureMatrix]) -> Vec<FeatureTest> {
    FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let (mut mm, mut acc) = (Vec::new(), Vec::new());
            for f in fms {
                for (i, &l) in f.labels.iter().enumerate() {
                    if l == 1 { &mut mm } else { &mut acc }.push(f.x[(i, c)]);
                }
            }
            let (mastermind_mean, accomplice_mean) = (mean(&mm), mean(&acc));
            match eval::welch_t_test(&mm, &acc) {
                Ok(r) => FeatureTest {
                    feature: name.to_string(),
                    mastermind_mean,
                    accomplice_mean,
                    statistic: Some(r.statistic),
                    df: Some(r.df),
                    p_value: Some(r.p_value),
                    skipped: None,
                },
                Err(e) => FeatureTest {
                    feature: name.to_string(),
                    mastermind_mean,
                    accomplice_mean,
                    statistic: None,
                    df: None,
                    p_value: None,
                    skipped: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn community_summary(graphs: &[DiffusionGraph], fms: &[FeatureMatrix]) -> Vec<CommunitySummary> {
    let by_id: BTreeMap<String, &FeatureMatrix> = fms.iter().map(|f| (f.graph_id.clone(), f)).collect();
    graphs
        .iter()
        .filter_map(|g| {
            let f = by_id.get(&g.graph_id())?;
            let part = features::louvain(&g.weighted);
            Some(CommunitySummary {
                graph_id: g.graph_id(),
                communities: part.count(),
                modularity: part.modularity,
                masterminds: f.mastermind_count(),
                mastermind_communities: features::mastermind_communities(&part, f).len(),
            })
        })
        .collect()
}
