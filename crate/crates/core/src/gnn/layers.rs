//! GAT and GraphSAGE layers with hand-written backward passes.
//!
//! Every node aggregates over itself plus its neighbor list; the self term
//! is added here, so neighbor lists never contain the node itself.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub const LEAKY_SLOPE: f64 = 0.2;

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "GAT", alias = "gat")]
    Gat,
    #[serde(rename = "GraphSAGE", alias = "graphsage", alias = "sage")]
    GraphSage,
}

/// Trainable tensors of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `in_dim × out_dim`
    pub w: Matrix,
    pub b: Vec<f64>,
    /// Attention vector `[a_dst ‖ a_src]` of length `2·out_dim`; GAT only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub att: Option<Vec<f64>>,
}

impl LayerParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
            att: self.att.as_ref().map(|a| vec![0.0; a.len()]),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.cols()
    }

    /// Parameter blocks in a fixed order: weights, bias, attention.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![self.w.data(), &self.b];
        if let Some(a) = &self.att {
            v.push(a);
        }
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![self.w.data_mut(), &mut self.b];
        if let Some(a) = &mut self.att {
            v.push(a);
        }
        v
    }
}

/// Values kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Matrix,
    /// GAT: `H W`. SAGE: mean-aggregated input.
    z: Matrix,
    /// GAT attention per node, aligned with `[self, neighbors…]`.
    alpha: Vec<Vec<f64>>,
    /// GAT pre-activation attention logits, same layout as `alpha`.
    logits: Vec<Vec<f64>>,
    /// Layer output before the activation.
    pub pre: Matrix,
    activate: bool,
}

impl LayerCache {
    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }
}

fn members(neighbors: &[Vec<usize>], i: usize) -> impl Iterator<Item = usize> + '_ {
    std::iter::once(i).chain(neighbors[i].iter().copied())
}

fn add_bias(m: &mut Matrix, b: &[f64]) {
    for i in 0..m.rows() {
        for (x, bj) in m.row_mut(i).iter_mut().zip(b) {
            *x += bj;
        }
    }
}

pub fn forward(
    arch: Architecture,
    p: &LayerParams,
    h: &Matrix,
    neighbors: &[Vec<usize>],
    activate: bool,
) -> (Matrix, LayerCache) {
    let n = h.rows();
    let d = p.out_dim();
    let (z, alpha, logits, mut pre) = match arch {
        Architecture::GraphSage => {
            let mut agg = Matrix::zeros(n, h.cols());
            for i in 0..n {
                let count = neighbors[i].len() + 1;
                for j in members(neighbors, i) {
                    for (a, x) in agg.row_mut(i).iter_mut().zip(h.row(j)) {
                        *a += x / count as f64;
                    }
                }
            }
            let pre = agg.matmul(&p.w);
            (agg, Vec::new(), Vec::new(), pre)
        }
        Architecture::Gat => {
            let a = p.att.as_ref().expect("GAT layer carries an attention vector");
            let (a_dst, a_src) = a.split_at(d);
            let z = h.matmul(&p.w);
            let dst: Vec<f64> = (0..n).map(|i| dot(z.row(i), a_dst)).collect();
            let src: Vec<f64> = (0..n).map(|j| dot(z.row(j), a_src)).collect();
            let mut alpha = Vec::with_capacity(n);
            let mut logits = Vec::with_capacity(n);
            let mut pre = Matrix::zeros(n, d);
            for i in 0..n {
                let e: Vec<f64> = members(neighbors, i).map(|j| dst[i] + src[j]).collect();
                let act: Vec<f64> = e.iter().map(|&x| leaky(x)).collect();
                let max = act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = act.iter().map(|x| (x - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                let al: Vec<f64> = exps.iter().map(|x| x / total).collect();
                for (j, &aij) in members(neighbors, i).zip(&al) {
                    for (o, zj) in pre.row_mut(i).iter_mut().zip(z.row(j)) {
                        *o += aij * zj;
                    }
                }
                alpha.push(al);
                logits.push(e);
            }
            (z, alpha, logits, pre)
        }
    };
    add_bias(&mut pre, &p.b);
    let out = if activate { pre.map(elu) } else { pre.clone() };
    (out, LayerCache { input: h.clone(), z, alpha, logits, pre, activate })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradients of the layer parameters and of its input, given the
/// gradient with respect to its output.
pub fn backward(
    arch: Architecture,
    p: &LayerParams,
    cache: &LayerCache,
    neighbors: &[Vec<usize>],
    d_out: &Matrix,
) -> (LayerParams, Matrix) {
    let n = cache.input.rows();
    let d = p.out_dim();
    let d_pre = if cache.activate { d_out.zip_map(&cache.pre, |g, x| g * elu_grad(x)) } else { d_out.clone() };
    let mut grad = p.zeros_like();
    for i in 0..n {
        for (gb, g) in grad.b.iter_mut().zip(d_pre.row(i)) {
            *gb += g;
        }
    }
    match arch {
        Architecture::GraphSage => {
            grad.w = cache.z.transpose().matmul(&d_pre);
            let d_agg = d_pre.matmul(&p.w.transpose());
            let mut d_in = Matrix::zeros(n, cache.input.cols());
            for i in 0..n {
                let count = (neighbors[i].len() + 1) as f64;
                for j in members(neighbors, i) {
                    for (o, g) in d_in.row_mut(j).iter_mut().zip(d_agg.row(i)) {
                        *o += g / count;
                    }
                }
            }
            (grad, d_in)
        }
        Architecture::Gat => {
            let a = p.att.as_ref().expect("GAT layer carries an attention vector");
            let (a_dst, a_src) = a.split_at(d);
            let z = &cache.z;
            let mut d_z = Matrix::zeros(n, d);
            let mut d_dst = vec![0.0; n];
            let mut d_src = vec![0.0; n];
            for i in 0..n {
                let al = &cache.alpha[i];
                let gi = d_pre.row(i);
                let d_alpha: Vec<f64> = members(neighbors, i).map(|j| dot(gi, z.row(j))).collect();
                for (j, &aij) in members(neighbors, i).zip(al) {
                    for (o, g) in d_z.row_mut(j).iter_mut().zip(gi) {
                        *o += aij * g;
                    }
                }
                let weighted: f64 = al.iter().zip(&d_alpha).map(|(a, g)| a * g).sum();
                for (k, j) in members(neighbors, i).enumerate() {
                    let de = al[k] * (d_alpha[k] - weighted) * leaky_grad(cache.logits[i][k]);
                    d_dst[i] += de;
                    d_src[j] += de;
                }
            }
            let mut d_att = vec![0.0; 2 * d];
            for i in 0..n {
                for c in 0..d {
                    d_att[c] += d_dst[i] * z[(i, c)];
                    d_att[d + c] += d_src[i] * z[(i, c)];
                }
                for (c, o) in d_z.row_mut(i).iter_mut().enumerate() {
                    *o += d_dst[i] * a_dst[c] + d_src[i] * a_src[c];
                }
            }
            grad.att = Some(d_att);
            grad.w = cache.input.transpose().matmul(&d_z);
            let d_in = d_z.matmul(&p.w.transpose());
            (grad, d_in)
        }
    }
}
