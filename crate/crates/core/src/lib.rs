//! Crowd-pump forensics: message extraction, cascade segmentation,
//! diffusion-network inference, graph features and GNN classification.

pub mod diffusion;
pub mod eval;
pub mod events;
pub mod features;
pub mod gnn;
pub mod ingest;
pub mod market;
pub mod matrix;
pub mod synth;
