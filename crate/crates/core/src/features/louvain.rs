//! Louvain community detection on the symmetrized weighted graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityPartition {
    /// Community id per node, numbered by first appearance.
    pub assignment: Vec<usize>,
    pub modularity: f64,
    /// Modularity after each aggregation pass.
    pub history: Vec<f64>,
}

impl CommunityPartition {
    pub fn count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }
}

/// `(W + Wᵀ)/2` with a zero diagonal.
pub fn symmetrize(w: &Matrix) -> Matrix {
    let n = w.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s[(i, j)] = 0.5 * (w[(i, j)] + w[(j, i)]);
            }
        }
    }
    s
}

/// Newman modularity of `assignment` on a symmetric matrix.
pub fn modularity(a: &Matrix, assignment: &[usize]) -> f64 {
    let n = a.rows();
    let two_m = a.sum();
    if two_m <= 0.0 {
        return 0.0;
    }
    let k: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if assignment[i] == assignment[j] {
                q += a[(i, j)] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

fn renumber(assignment: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    assignment
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Move nodes in index order until no move improves modularity.
fn local_moves(a: &Matrix) -> (Vec<usize>, bool) {
    let n = a.rows();
    let two_m = a.sum();
    let k: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = k.clone();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for i in 0..n {
            let own = comm[i];
            tot[own] -= k[i];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for j in 0..n {
                if j != i && a[(i, j)] > 0.0 {
                    *links.entry(comm[j]).or_default() += a[(i, j)];
                }
            }
            let gain = |c: usize, link: f64| link - tot[c] * k[i] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
            for (&c, &link) in &links {
                let g = gain(c, link);
                if g > best_gain + 1e-12 {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k[i];
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (renumber(&comm), moved_any)
}

fn aggregate(a: &Matrix, comm: &[usize], count: usize) -> Matrix {
    let mut out = Matrix::zeros(count, count);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out[(comm[i], comm[j])] += a[(i, j)];
        }
    }
    out
}

/// Louvain on `(W + Wᵀ)/2`. Deterministic: nodes are visited in index order.
pub fn louvain(w: &Matrix) -> CommunityPartition {
    let sym = symmetrize(w);
    let n = sym.rows();
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut history = Vec::new();
    if n == 0 || sym.sum() <= 0.0 {
        let q = modularity(&sym, &assignment);
        return CommunityPartition { assignment, modularity: q, history: vec![q] };
    }
    let mut level = sym.clone();
    loop {
        let (comm, moved) = local_moves(&level);
        if !moved {
            break;
        }
        let count = comm.iter().max().map_or(0, |m| m + 1);
        for c in &mut assignment {
            *c = comm[*c];
        }
        history.push(modularity(&sym, &assignment));
        if count == level.rows() {
            break;
        }
        level = aggregate(&level, &comm, count);
    }
    let assignment = renumber(&assignment);
    let q = modularity(&sym, &assignment);
    if history.is_empty() {
        history.push(q);
    }
    CommunityPartition { assignment, modularity: q, history }
}
