//! Node classifier built from GAT or GraphSAGE layers.
//!
//! Hidden layers use ELU; the last layer is linear with one output that
//! goes through a sigmoid. Gradients are derived by hand and checked
//! against finite differences in the tests.

pub mod adam;
pub mod layers;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionGraph;
use crate::eval::Confusion;
use crate::features::Standardizer;
use crate::matrix::Matrix;

pub use adam::AdamState;
pub use layers::{Architecture, LayerParams};

pub const PROB_CLAMP: f64 = 1e-7;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum GnnError {
    #[error("non-finite value in layer {layer} output")]
    NonFinite { layer: usize },
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("empty training set")]
    EmptyTraining,
    #[error("invalid model config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("graph {graph}: {reason}")]
    Shape { graph: String, reason: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("unsupported parameter file version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphVariant {
    #[default]
    Directed,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub graph_variant: GraphVariant,
    pub hidden_channels: usize,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::GraphSage,
            graph_variant: GraphVariant::Weighted,
            hidden_channels: 8,
            num_layers: 2,
            learning_rate: 0.0005,
            epochs: 100,
            seed: 7,
            threshold: 0.5,
        }
    }
}

impl ModelConfig {
    /// Every problem found, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hidden_channels == 0 {
            out.push("hidden_channels must be positive".into());
        }
        if self.num_layers == 0 {
            out.push("num_layers must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            out.push("learning_rate must be a nonnegative number".into());
        }
        if self.epochs == 0 {
            out.push("epochs must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            out.push("threshold must lie in [0, 1]".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(GnnError::Config(p))
        }
    }
}

/// Aggregation neighborhoods, self excluded.
pub fn neighborhoods(graph: &DiffusionGraph, variant: GraphVariant) -> Vec<Vec<usize>> {
    let n = graph.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i
                        && match variant {
                            GraphVariant::Directed => graph.directed[(j, i)] > 0.0,
                            GraphVariant::Weighted => graph.weighted[(i, j)] > 0.0 || graph.weighted[(j, i)] > 0.0,
                        }
                })
                .collect()
        })
        .collect()
}

/// One graph as a training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphData {
    pub graph_id: String,
    pub nodes: Vec<String>,
    pub neighbors: Vec<Vec<usize>>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl GraphData {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    fn check(&self, in_dim: usize) -> Result<(), GnnError> {
        let bad = |reason: String| GnnError::Shape { graph: self.graph_id.clone(), reason };
        let n = self.nodes.len();
        if self.x.rows() != n || self.y.len() != n || self.neighbors.len() != n {
            return Err(bad(format!("{n} nodes but x has {} rows, y {} labels", self.x.rows(), self.y.len())));
        }
        if self.x.cols() != in_dim {
            return Err(bad(format!("expected {in_dim} feature columns, got {}", self.x.cols())));
        }
        if self.neighbors.iter().enumerate().any(|(i, nb)| nb.iter().any(|&j| j >= n || j == i)) {
            return Err(bad("neighbor index out of range or self".into()));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss(p: &[f64], y: &[f64]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / p.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub in_dim: usize,
    pub layers: Vec<LayerParams>,
    pub adam: AdamState,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..=limit)).collect()
}

impl ModelParams {
    /// Glorot-uniform weights and attention vectors, zero biases.
    pub fn init(config: &ModelConfig, in_dim: usize) -> Result<Self, GnnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims = vec![in_dim];
        dims.extend(std::iter::repeat_n(config.hidden_channels, config.num_layers - 1));
        dims.push(1);
        let layers: Vec<LayerParams> = dims
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let weights = Matrix::from_vec(i, o, glorot(&mut rng, i, o, i * o));
                let att = (config.architecture == Architecture::Gat).then(|| glorot(&mut rng, 2 * o, 1, 2 * o));
                LayerParams { w: weights, b: vec![0.0; o], att }
            })
            .collect();
        let adam = AdamState::for_shapes(layers.iter().flat_map(|l| l.slices().into_iter().map(<[f64]>::len)));
        Ok(Self { config: config.clone(), in_dim, layers, adam })
    }

    fn forward_cached(&self, neighbors: &[Vec<usize>], x: &Matrix) -> Result<(Vec<f64>, Vec<layers::LayerCache>), GnnError> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (k, p) in self.layers.iter().enumerate() {
            let (out, cache) = layers::forward(self.config.architecture, p, &h, neighbors, k < last);
            if out.data().iter().any(|v| !v.is_finite()) {
                return Err(GnnError::NonFinite { layer: k });
            }
            caches.push(cache);
            h = out;
        }
        Ok((h.into_data(), caches))
    }

    /// Sigmoid probability per node.
    pub fn forward(&self, neighbors: &[Vec<usize>], x: &Matrix) -> Result<Vec<f64>, GnnError> {
        Ok(self.forward_cached(neighbors, x)?.0.into_iter().map(sigmoid).collect())
    }

    /// Loss and analytic gradients for one graph batch.
    pub fn loss_and_grads(&self, g: &GraphData) -> Result<(f64, Vec<LayerParams>), GnnError> {
        g.check(self.in_dim)?;
        let (logits, caches) = self.forward_cached(&g.neighbors, &g.x)?;
        let p: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let loss = bce_loss(&p, &g.y);
        let n = p.len().max(1) as f64;
        let mut d = Matrix::from_vec(p.len(), 1, p.iter().zip(&g.y).map(|(p, y)| (p - y) / n).collect());
        let mut grads = vec![LayerParams { w: Matrix::zeros(0, 0), b: Vec::new(), att: None }; self.layers.len()];
        for k in (0..self.layers.len()).rev() {
            let (grad, d_in) = layers::backward(self.config.architecture, &self.layers[k], &caches[k], &g.neighbors, &d);
            if grad.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
                return Err(GnnError::NonFiniteGradient { layer: k });
            }
            grads[k] = grad;
            d = d_in;
        }
        Ok((loss, grads))
    }

    /// Forward, backward and one Adam update; returns the loss before the update.
    pub fn backward_and_step(&mut self, g: &GraphData) -> Result<f64, GnnError> {
        let (loss, grads) = self.loss_and_grads(g)?;
        let lr = self.config.learning_rate;
        let mut params: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(LayerParams::slices_mut).collect();
        let grad_slices: Vec<&[f64]> = grads.iter().flat_map(LayerParams::slices).collect();
        self.adam.step(lr, &mut params, &grad_slices);
        Ok(loss)
    }

    /// Binary labels (`p ≥ threshold`) and probabilities.
    pub fn predict(&self, g: &GraphData, threshold: f64) -> Result<(Vec<u8>, Vec<f64>), GnnError> {
        g.check(self.in_dim)?;
        let p = self.forward(&g.neighbors, &g.x)?;
        Ok((p.iter().map(|&q| u8::from(q >= threshold)).collect(), p))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.slices()).map(<[f64]>::len).sum()
    }
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub epoch_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Node-weighted mean loss and pooled predictions at `threshold`.
pub fn evaluate_batches(params: &ModelParams, graphs: &[GraphData], threshold: f64) -> Result<(f64, Vec<f64>, Vec<u8>), GnnError> {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for g in graphs {
        let (_, p) = params.predict(g, threshold)?;
        probs.extend(p);
        labels.extend(g.y.iter().map(|&y| u8::from(y >= 0.5)));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    Ok((bce_loss(&probs, &y), probs, labels))
}

/// Train with one optimizer step per graph, graphs in the given order.
/// Keeps the epoch with the best validation F1 at 0.5, ties going to the
/// lower validation loss and then the earlier epoch.
pub fn train(config: &ModelConfig, train: &[GraphData], val: &[GraphData]) -> Result<TrainOutcome, GnnError> {
    let train: Vec<&GraphData> = train.iter().filter(|g| !g.is_empty()).collect();
    let Some(first) = train.first() else {
        return Err(GnnError::EmptyTraining);
    };
    let mut params = ModelParams::init(config, first.x.cols())?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, ModelParams)> = None;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        let mut nodes = 0usize;
        for g in &train {
            loss_sum += params.backward_and_step(g)? * g.len() as f64;
            nodes += g.len();
        }
        let epoch_seconds = started.elapsed().as_secs_f64();
        let train_loss = loss_sum / nodes as f64;
        let (val_loss, val_f1) = if val.is_empty() {
            (f64::NAN, 0.0)
        } else {
            let (loss, probs, labels) = evaluate_batches(&params, val, 0.5)?;
            (loss, Confusion::at_threshold(&probs, &labels, 0.5).f1())
        };
        history.push(EpochRecord { epoch, train_loss, val_loss, val_f1, epoch_seconds });
        let better = match &best {
            None => true,
            Some((f1, loss, _, _)) => val_f1 > *f1 || (val_f1 == *f1 && val_loss < *loss),
        };
        if better || val.is_empty() {
            best = Some((val_f1, val_loss, epoch, params.clone()));
        }
    }
    let (_, _, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, history, best_epoch })
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<(), GnnError> {
    let err = |e: csv::Error| GnnError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["epoch", "train_loss", "val_loss", "val_f1", "epoch_seconds"]).map_err(err)?;
    for r in history {
        let val_loss = if r.val_loss.is_nan() { String::new() } else { r.val_loss.to_string() };
        w.write_record([r.epoch.to_string(), r.train_loss.to_string(), val_loss, r.val_f1.to_string(), r.epoch_seconds.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| GnnError::Io { path: path.display().to_string(), message: e.to_string() })
}

// ---------------------------------------------------------------------------
// Persistence

/// Versioned parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub params: ModelParams,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

impl ModelDocument {
    pub fn new(params: ModelParams, threshold: f64, standardizer: Option<Standardizer>) -> Self {
        Self { format_version: FORMAT_VERSION, params, threshold, standardizer }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GnnError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| GnnError::Io { path: "<model>".into(), message: e.to_string() })?;
        if doc.format_version != FORMAT_VERSION {
            return Err(GnnError::Version(doc.format_version));
        }
        Ok(doc)
    }
}
