//! Pipeline configuration loaded from JSON.

use std::path::{Path, PathBuf};

use pumptrace_core::diffusion::Aggregation;
use pumptrace_core::eval::default_grid;
use pumptrace_core::gnn::{GraphVariant, ModelConfig};
use pumptrace_core::market::ReturnRule;
use pumptrace_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub prices_dir: PathBuf,
    pub labels: PathBuf,
    pub out_dir: PathBuf,
    /// Extraction rules; the built-in set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    pub split_fractions: [f64; 3],
    pub event_cap_hours: f64,
    pub return_rule: ReturnRule,
    pub aggregation: Aggregation,
    pub model: ModelConfig,
    /// One model is trained per variant.
    pub variants: Vec<GraphVariant>,
    pub threshold_grid: Vec<f64>,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: "data/corpus.jsonl".into(),
            prices_dir: "data/prices".into(),
            labels: "data/labels.csv".into(),
            out_dir: "out".into(),
            rules: None,
            split_fractions: [0.7, 0.15, 0.15],
            event_cap_hours: 72.0,
            return_rule: ReturnRule::DirectionAware,
            aggregation: Aggregation::DaniProduct,
            model: ModelConfig::default(),
            variants: vec![GraphVariant::Directed, GraphVariant::Weighted],
            threshold_grid: default_grid(),
            synth: SynthConfig::default(),
        }
    }
}

/// Which input files a stage needs to exist before it starts.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub corpus: bool,
    pub prices: bool,
    pub labels: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(vec![format!("cannot read config {}: {e}", path.display())]))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// Every invalid field, plus missing input paths the stage needs.
    pub fn validate(&self, needs: Needs) -> Result<(), PipelineError> {
        let mut bad = Vec::new();
        let f = self.split_fractions;
        if f.iter().any(|&x| !(x > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bad.push(format!("split_fractions: must be positive and sum to 1, got {f:?}"));
        }
        if !(self.event_cap_hours > 0.0 && self.event_cap_hours.is_finite()) {
            bad.push(format!("event_cap_hours: must be positive, got {}", self.event_cap_hours));
        }
        bad.extend(self.model.problems().into_iter().map(|p| format!("model.{p}")));
        if self.variants.is_empty() {
            bad.push("variants: at least one graph variant is required".into());
        }
        let mut seen = self.variants.clone();
        seen.sort_by_key(|v| *v as u8);
        seen.dedup();
        if seen.len() != self.variants.len() {
            bad.push("variants: duplicate entries".into());
        }
        if self.threshold_grid.is_empty() || self.threshold_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            bad.push("threshold_grid: needs values in [0, 1]".into());
        }
        bad.extend(self.synth.problems().into_iter().map(|p| format!("synth.{p}")));
        let mut need = |on: bool, name: &str, path: &Path| {
            if on && !path.exists() {
                bad.push(format!("{name}: {} does not exist", path.display()));
            }
        };
        need(needs.corpus, "corpus", &self.corpus);
        need(needs.prices, "prices_dir", &self.prices_dir);
        need(needs.labels, "labels", &self.labels);
        if let Some(r) = &self.rules {
            need(true, "rules", r);
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(bad))
        }
    }

    pub fn event_cap_secs(&self) -> f64 {
        self.event_cap_hours * 3600.0
    }

    pub fn model_for(&self, variant: GraphVariant) -> ModelConfig {
        ModelConfig { graph_variant: variant, ..self.model.clone() }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
