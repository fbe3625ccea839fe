//! Whole-graph node centralities on dense adjacency matrices.
//!
//! Path-based measures treat `adj[(i, j)] > 0` as an edge `i → j`. Binary
//! graphs use hop counts; weighted graphs use distance `1 / weight`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::matrix::Matrix;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_TOL: f64 = 1e-9;
pub const PAGERANK_MAX_ITER: usize = 200;

/// Relative slack when comparing weighted path lengths.
const DIST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Hops,
    InverseWeight,
}

fn edge_len(adj: &Matrix, i: usize, j: usize, metric: Metric) -> Option<f64> {
    let w = adj[(i, j)];
    if i == j || w <= 0.0 {
        return None;
    }
    Some(match metric {
        Metric::Hops => 1.0,
        Metric::InverseWeight => 1.0 / w,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= DIST_EPS * a.abs().max(b.abs()).max(1.0)
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths: distances, path counts, predecessors and
/// the settle order used by Brandes accumulation.
struct Sssp {
    dist: Vec<f64>,
    sigma: Vec<f64>,
    preds: Vec<Vec<usize>>,
    order: Vec<usize>,
}

fn sssp(adj: &Matrix, s: usize, metric: Metric) -> Sssp {
    let n = adj.rows();
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0; n];
    let mut preds = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    dist[s] = 0.0;
    sigma[s] = 1.0;
    match metric {
        Metric::Hops => {
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for v in 0..n {
                    if edge_len(adj, u, v, metric).is_none() {
                        continue;
                    }
                    if dist[v].is_infinite() {
                        dist[v] = dist[u] + 1.0;
                        queue.push_back(v);
                    }
                    if dist[v] == dist[u] + 1.0 {
                        sigma[v] += sigma[u];
                        preds[v].push(u);
                    }
                }
            }
        }
        Metric::InverseWeight => {
            let mut settled = vec![false; n];
            let mut heap = BinaryHeap::from([Item(0.0, s)]);
            while let Some(Item(d, u)) = heap.pop() {
                if settled[u] || d > dist[u] {
                    continue;
                }
                settled[u] = true;
                order.push(u);
                for v in 0..n {
                    let Some(len) = edge_len(adj, u, v, metric) else { continue };
                    if settled[v] {
                        continue;
                    }
                    let alt = dist[u] + len;
                    if dist[v].is_finite() && close(alt, dist[v]) {
                        sigma[v] += sigma[u];
                        preds[v].push(u);
                    } else if alt < dist[v] {
                        dist[v] = alt;
                        sigma[v] = sigma[u];
                        preds[v] = vec![u];
                        heap.push(Item(alt, v));
                    }
                }
            }
        }
    }
    Sssp { dist, sigma, preds, order }
}

/// Reachable count over total outward distance; 0 when nothing is reachable.
pub fn closeness(adj: &Matrix, metric: Metric) -> Vec<f64> {
    (0..adj.rows())
        .map(|s| {
            let d = sssp(adj, s, metric).dist;
            let (count, total) = d
                .iter()
                .enumerate()
                .filter(|&(v, x)| v != s && x.is_finite())
                .fold((0usize, 0.0), |(c, t), (_, x)| (c + 1, t + x));
            if count == 0 || total <= 0.0 {
                0.0
            } else {
                count as f64 / total
            }
        })
        .collect()
}

/// Directed, unnormalized Brandes betweenness.
pub fn betweenness(adj: &Matrix, metric: Metric) -> Vec<f64> {
    let n = adj.rows();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let Sssp { sigma, preds, order, .. } = sssp(adj, s, metric);
        let mut delta = vec![0.0; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb
}

/// Power-iteration PageRank on the row-normalized adjacency.
pub fn pagerank(adj: &Matrix) -> Vec<f64> {
    let n = adj.rows();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let out: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| adj[(i, j)].max(0.0)).sum()).collect();
    let mut pr = vec![1.0 / nf; n];
    for _ in 0..PAGERANK_MAX_ITER {
        let dangling: f64 = (0..n).filter(|&i| out[i] <= 0.0).map(|i| pr[i]).sum();
        let base = (1.0 - PAGERANK_DAMPING) / nf + PAGERANK_DAMPING * dangling / nf;
        let mut next = vec![base; n];
        for i in 0..n {
            if out[i] <= 0.0 {
                continue;
            }
            let share = PAGERANK_DAMPING * pr[i] / out[i];
            for j in 0..n {
                let w = adj[(i, j)];
                if j != i && w > 0.0 {
                    next[j] += share * w;
                }
            }
        }
        let diff: f64 = next.iter().zip(&pr).map(|(a, b)| (a - b).abs()).sum();
        pr = next;
        if diff < PAGERANK_TOL {
            break;
        }
    }
    let total: f64 = pr.iter().sum();
    pr.iter().map(|x| x / total).collect()
}

/// Local clustering on the undirected projection of a binary graph.
pub fn clustering_unweighted(adj: &Matrix) -> Vec<f64> {
    let n = adj.rows();
    let linked = |i: usize, j: usize| i != j && (adj[(i, j)] > 0.0 || adj[(j, i)] > 0.0);
    (0..n)
        .map(|v| {
            let nbrs: Vec<usize> = (0..n).filter(|&u| linked(v, u)).collect();
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut tri = 0usize;
            for (a, &i) in nbrs.iter().enumerate() {
                for &j in &nbrs[a + 1..] {
                    if linked(i, j) {
                        tri += 1;
                    }
                }
            }
            2.0 * tri as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Geometric-mean clustering on `(W + Wᵀ)/2` scaled by its maximum.
pub fn clustering_weighted(w: &Matrix) -> Vec<f64> {
    let n = w.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s[(i, j)] = 0.5 * (w[(i, j)] + w[(j, i)]);
            }
        }
    }
    let max = s.max();
    if max <= 0.0 {
        return vec![0.0; n];
    }
    let s = s.scale(1.0 / max);
    (0..n)
        .map(|v| {
            let nbrs: Vec<usize> = (0..n).filter(|&u| s[(v, u)] > 0.0).collect();
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut total = 0.0;
            for (a, &i) in nbrs.iter().enumerate() {
                for &j in &nbrs[a + 1..] {
                    if s[(i, j)] > 0.0 {
                        total += (s[(v, i)] * s[(v, j)] * s[(i, j)]).cbrt();
                    }
                }
            }
            2.0 * total / (k * (k - 1)) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn adj(n: usize, edges: &[(usize, usize)]) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for &(i, j) in edges {
            m[(i, j)] = 1.0;
        }
        m
    }

    #[test]
    fn pagerank_cycle_is_uniform() {
        let pr = pagerank(&adj(3, &[(0, 1), (1, 2), (2, 0)]));
        for p in pr {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pagerank_with_dangling_sums_to_one() {
        let pr = pagerank(&adj(4, &[(0, 1), (1, 2), (0, 3)]));
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pr[2] > pr[0]);
    }

    #[test]
    fn path_betweenness() {
        let b = betweenness(&adj(3, &[(0, 1), (1, 2)]), Metric::Hops);
        assert_eq!(b, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn closeness_reachable_only() {
        let c = closeness(&adj(3, &[(0, 1), (1, 2)]), Metric::Hops);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(c[1], 1.0);
        assert_eq!(c[2], 0.0);
    }

    #[test]
    fn clustering_triangle_and_weights() {
        let c = clustering_unweighted(&adj(4, &[(0, 1), (1, 2), (2, 0), (0, 3)]));
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(c[1], 1.0);
        assert_eq!(c[3], 0.0);
        let mut w = Matrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 2)] = 1.0;
        w[(2, 0)] = 1.0;
        let cw = clustering_weighted(&w);
        assert!(cw.iter().all(|x| (x - 1.0).abs() < 1e-12));
        w[(2, 0)] = 0.125;
        let cw = clustering_weighted(&w);
        assert!((cw[0] - 0.5).abs() < 1e-12);
    }

    /// Floyd–Warshall with shortest-path counts, written independently of Brandes.
    fn brute(adj: &Matrix, metric: Metric) -> (Vec<f64>, Vec<f64>) {
        let n = adj.rows();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            d[i][i] = 0.0;
            for j in 0..n {
                if let Some(l) = edge_len(adj, i, j, metric) {
                    d[i][j] = l;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] - 1e-12 {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        // count shortest paths by dynamic programming over increasing distance
        let mut sigma = vec![vec![0.0; n]; n];
        for s in 0..n {
            let mut by_dist: Vec<usize> = (0..n).filter(|&v| d[s][v].is_finite()).collect();
            by_dist.sort_by(|&a, &b| d[s][a].partial_cmp(&d[s][b]).unwrap());
            sigma[s][s] = 1.0;
            for &v in &by_dist {
                if v == s {
                    continue;
                }
                for u in 0..n {
                    if let Some(l) = edge_len(adj, u, v, metric) {
                        if d[s][u].is_finite() && (d[s][u] + l - d[s][v]).abs() < 1e-9 {
                            sigma[s][v] += sigma[s][u];
                        }
                    }
                }
            }
        }
        let mut bc = vec![0.0; n];
        for v in 0..n {
            for s in 0..n {
                for t in 0..n {
                    if s == v || t == v || s == t || !d[s][t].is_finite() {
                        continue;
                    }
                    if (d[s][v] + d[v][t] - d[s][t]).abs() < 1e-9 {
                        bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                    }
                }
            }
        }
        let cl = (0..n)
            .map(|s| {
                let r: Vec<f64> = (0..n).filter(|&t| t != s && d[s][t].is_finite()).map(|t| d[s][t]).collect();
                if r.is_empty() { 0.0 } else { r.len() as f64 / r.iter().sum::<f64>() }
            })
            .collect();
        (bc, cl)
    }

    fn arb_graph() -> impl Strategy<Value = Matrix> {
        prop::collection::vec(prop::sample::select(vec![0.0, 0.0, 0.25, 0.5, 1.0]), 64).prop_map(|w| {
            let mut m = Matrix::from_vec(8, 8, w);
            for i in 0..8 {
                m[(i, i)] = 0.0;
            }
            m
        })
    }

    proptest! {
        #[test]
        fn matches_floyd_warshall(w in arb_graph()) {
            let binary = w.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
            for (g, metric) in [(&binary, Metric::Hops), (&w, Metric::InverseWeight)] {
                let (bc, cl) = brute(g, metric);
                let b = betweenness(g, metric);
                let c = closeness(g, metric);
                for v in 0..8 {
                    prop_assert!((b[v] - bc[v]).abs() < 1e-9, "betweenness {} vs {}", b[v], bc[v]);
                    prop_assert!((c[v] - cl[v]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn pagerank_sums_to_one(w in arb_graph()) {
            let pr = pagerank(&w);
            prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(pr.iter().all(|&p| p > 0.0));
        }

        #[test]
        fn relabeling_permutes(w in arb_graph(), perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
            let p = w.permuted(&perm);
            let (b, bp) = (betweenness(&w, Metric::InverseWeight), betweenness(&p, Metric::InverseWeight));
            let (c, cp) = (clustering_weighted(&w), clustering_weighted(&p));
            let (r, rp) = (pagerank(&w), pagerank(&p));
            for i in 0..8 {
                prop_assert!((bp[i] - b[perm[i]]).abs() < 1e-9);
                prop_assert!((cp[i] - c[perm[i]]).abs() < 1e-12);
                prop_assert!((rp[i] - r[perm[i]]).abs() < 1e-9);
            }
        }
    }
}
