//! Brute-force reference implementations used by the acceptance suite.
//! Each one is written from the definitions with plain loops and shares no
//! code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

pub type Dense = Vec<Vec<f64>>;

// ---------------------------------------------------------------------------
// Diffusion inference

/// One event as `(spreader, seconds)` arrivals.
pub type Arrivals = Vec<(String, i64)>;

/// 1-based rank of `who`: one plus the number of spreaders strictly ahead
/// of it by `(time, name)`.
pub fn rank(event: &Arrivals, who: &str) -> Option<usize> {
    let me = event.iter().find(|(s, _)| s == who)?;
    Some(1 + event.iter().filter(|(s, t)| (t, s) < (&me.1, &me.0)).count())
}

pub fn h(event: &Arrivals, r: &str, s: &str) -> f64 {
    let (lr, ls) = (rank(event, r).unwrap() as f64, rank(event, s).unwrap() as f64);
    if lr < ls {
        1.0 / (ls * (ls - lr))
    } else {
        0.0
    }
}

pub fn lambda(event: &Arrivals, r: &str, s: &str) -> f64 {
    if rank(event, r).is_none() || rank(event, s).is_none() || r == s {
        return 0.0;
    }
    let mut denom = 0.0;
    for (other, _) in event {
        if other != r {
            denom += h(event, r, other);
        }
    }
    if denom > 0.0 {
        h(event, r, s) / denom
    } else {
        0.0
    }
}

pub fn theta(events: &[Arrivals], r: &str, s: &str) -> f64 {
    let has = |e: &Arrivals, who: &str| e.iter().any(|(x, _)| x == who);
    let both = events.iter().filter(|e| has(e, r) && has(e, s)).count();
    let either = events.iter().filter(|e| has(e, r) || has(e, s)).count();
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// `W` over `nodes` and the derived `W*`.
pub fn dani(events: &[Arrivals], nodes: &[String]) -> (Dense, Dense) {
    let n = nodes.len();
    let mut raw = vec![vec![0.0; n]; n];
    let mut max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let total: f64 = events.iter().map(|e| lambda(e, &nodes[i], &nodes[j])).sum();
            raw[i][j] = theta(events, &nodes[i], &nodes[j]) * total;
            max = max.max(raw[i][j]);
        }
    }
    let w: Dense = raw.iter().map(|row| row.iter().map(|x| if max > 0.0 { x / max } else { 0.0 }).collect()).collect();
    (w, dani_directed_exact(events, nodes))
}

// ---------------------------------------------------------------------------
// Exact rationals, so that W* sees true ties

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac(i128, i128);

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

impl Frac {
    pub const ZERO: Frac = Frac(0, 1);

    pub fn new(n: i128, d: i128) -> Frac {
        let g = gcd(n, d).max(1);
        Frac(n / g, d / g)
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }

    pub fn mul(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.0, self.1 * o.1)
    }

    pub fn div(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1, self.1 * o.0)
    }

    pub fn gt(self, o: Frac) -> bool {
        self.0 * o.1 > o.0 * self.1
    }
}

fn h_exact(event: &Arrivals, r: &str, s: &str) -> Frac {
    let (lr, ls) = (rank(event, r).unwrap() as i128, rank(event, s).unwrap() as i128);
    if lr < ls { Frac::new(1, ls * (ls - lr)) } else { Frac::ZERO }
}

fn lambda_exact(event: &Arrivals, r: &str, s: &str) -> Frac {
    if rank(event, r).is_none() || rank(event, s).is_none() || r == s {
        return Frac::ZERO;
    }
    let denom = event.iter().filter(|(o, _)| o != r).fold(Frac::ZERO, |acc, (o, _)| acc.add(h_exact(event, r, o)));
    if denom.0 > 0 { h_exact(event, r, s).div(denom) } else { Frac::ZERO }
}

/// `W*` from exact raw weights. Normalizing by the positive maximum keeps the order.
pub fn dani_directed_exact(events: &[Arrivals], nodes: &[String]) -> Dense {
    let has = |e: &Arrivals, who: &str| e.iter().any(|(x, _)| x == who);
    let raw = |r: &str, s: &str| {
        let both = events.iter().filter(|e| has(e, r) && has(e, s)).count() as i128;
        let either = events.iter().filter(|e| has(e, r) || has(e, s)).count() as i128;
        if either == 0 {
            return Frac::ZERO;
        }
        let total = events.iter().fold(Frac::ZERO, |acc, e| acc.add(lambda_exact(e, r, s)));
        Frac::new(both, either).mul(total)
    };
    let n = nodes.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i != j && raw(&nodes[i], &nodes[j]).gt(raw(&nodes[j], &nodes[i])) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Ego networks

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ego {
    pub in_ratio: f64,
    pub out_degree: f64,
    pub out_ratio: f64,
    pub efficiency: f64,
    pub effective_size: f64,
    pub density: f64,
}

/// Enumerates every ordered pair inside the out-ego and in-ego networks.
pub fn ego(a: &Dense, v: usize) -> Ego {
    let n_all = a.len();
    let ins: Vec<usize> = (0..n_all).filter(|&i| i != v && a[i][v] > 0.0).collect();
    let in_ratio = if ins.is_empty() { 0.0 } else { ins.iter().map(|&i| a[i][v]).sum::<f64>() / ins.len() as f64 };
    let alters: Vec<usize> = (0..n_all).filter(|&j| j != v && a[v][j] > 0.0).collect();
    let n = alters.len();
    if n == 0 {
        return Ego { in_ratio, out_degree: 0.0, out_ratio: 0.0, efficiency: 0.0, effective_size: 0.0, density: 0.0 };
    }
    let nf = n as f64;
    let mut q = 0.0;
    for &j in &alters {
        q += a[v][j];
    }
    // t_i: ties from alter i to the other alters
    let mut t_sum = 0.0;
    for &i in &alters {
        let mut t = 0.0;
        for &j in &alters {
            if j != i {
                t += a[i][j];
            }
        }
        t_sum += t;
    }
    let mut m = q;
    for &i in &alters {
        m += a[i][v];
    }
    m += t_sum;
    Ego {
        in_ratio,
        out_degree: q,
        out_ratio: q / nf,
        efficiency: 1.0 - t_sum / (nf * nf),
        effective_size: nf - t_sum / nf,
        density: if n > 1 { 2.0 * m / (nf * (nf - 1.0)) } else { 0.0 },
    }
}

// ---------------------------------------------------------------------------
// Whole-graph centralities

/// All-pairs distances by Floyd-Warshall; hop lengths or `1/w`.
pub fn distances(a: &Dense, inverse_weight: bool) -> Dense {
    let n = a.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for j in 0..n {
            if i != j && a[i][j] > 0.0 {
                d[i][j] = if inverse_weight { 1.0 / a[i][j] } else { 1.0 };
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn closeness(a: &Dense, inverse_weight: bool) -> Vec<f64> {
    let d = distances(a, inverse_weight);
    (0..a.len())
        .map(|s| {
            let reach: Vec<f64> = (0..a.len()).filter(|&t| t != s && d[s][t].is_finite()).map(|t| d[s][t]).collect();
            let total: f64 = reach.iter().sum();
            if reach.is_empty() || total <= 0.0 {
                0.0
            } else {
                reach.len() as f64 / total
            }
        })
        .collect()
}

/// Shortest-path counts from the distance matrix: `σ(s,t)` sums `σ(s,u)`
/// over last hops `u → t` that lie on a shortest path.
fn path_counts(a: &Dense, d: &Dense, inverse_weight: bool) -> Dense {
    let n = a.len();
    let mut sigma = vec![vec![0.0; n]; n];
    for s in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&t| d[s][t].is_finite()).collect();
        order.sort_by(|&x, &y| d[s][x].total_cmp(&d[s][y]));
        sigma[s][s] = 1.0;
        for &t in &order {
            if t == s {
                continue;
            }
            let mut c = 0.0;
            for u in 0..n {
                if u == t || a[u][t] <= 0.0 || !d[s][u].is_finite() {
                    continue;
                }
                let len = if inverse_weight { 1.0 / a[u][t] } else { 1.0 };
                if same(d[s][u] + len, d[s][t]) {
                    c += sigma[s][u];
                }
            }
            sigma[s][t] = c;
        }
    }
    sigma
}

/// `Σ_{s≠v≠t} σ_st(v)/σ_st` with `σ_st(v) = σ_sv σ_vt` on shortest paths.
pub fn betweenness(a: &Dense, inverse_weight: bool) -> Vec<f64> {
    let n = a.len();
    let d = distances(a, inverse_weight);
    let sigma = path_counts(a, &d, inverse_weight);
    (0..n)
        .map(|v| {
            let mut total = 0.0;
            for s in 0..n {
                for t in 0..n {
                    if s == t || s == v || t == v || !d[s][t].is_finite() {
                        continue;
                    }
                    if d[s][v].is_finite() && d[v][t].is_finite() && same(d[s][v] + d[v][t], d[s][t]) {
                        total += sigma[s][v] * sigma[v][t] / sigma[s][t];
                    }
                }
            }
            total
        })
        .collect()
}

/// Stationary PageRank by Gaussian elimination on
/// `(I − d Pᵀ) x = (1−d)/n + d·(dangling mass)/n` with `Σx = 1`.
pub fn pagerank(a: &Dense, damping: f64) -> Vec<f64> {
    let n = a.len();
    let nf = n as f64;
    let out: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| a[i][j].max(0.0)).sum()).collect();
    // M[j][i]: probability mass flowing i → j, dangling rows spread uniformly
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[j][i] = if out[i] > 0.0 {
                if i != j && a[i][j] > 0.0 { a[i][j] / out[i] } else { 0.0 }
            } else {
                1.0 / nf
            };
        }
    }
    let mut sys: Dense = (0..n)
        .map(|r| {
            let mut row: Vec<f64> = (0..n).map(|c| f64::from(u8::from(r == c)) - damping * m[r][c]).collect();
            row.push((1.0 - damping) / nf);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| sys[x][col].abs().total_cmp(&sys[y][col].abs())).unwrap();
        sys.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = sys[r][col] / sys[col][col];
                for c in col..=n {
                    sys[r][c] -= f * sys[col][c];
                }
            }
        }
    }
    let x: Vec<f64> = (0..n).map(|r| sys[r][n] / sys[r][r]).collect();
    let total: f64 = x.iter().sum();
    x.iter().map(|v| v / total).collect()
}

/// Local clustering over all neighbor triples of the undirected projection.
pub fn clustering_unweighted(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let linked = |i: usize, j: usize| i != j && (a[i][j] > 0.0 || a[j][i] > 0.0);
    (0..n)
        .map(|v| {
            let k = (0..n).filter(|&u| linked(v, u)).count();
            if k < 2 {
                return 0.0;
            }
            let mut tri = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if linked(v, i) && linked(v, j) && linked(i, j) {
                        tri += 1;
                    }
                }
            }
            2.0 * f64::from(tri) / (k * (k - 1)) as f64
        })
        .collect()
}

/// Geometric-mean clustering on the max-scaled symmetrized weights.
pub fn clustering_weighted(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let mut s = vec![vec![0.0; n]; n];
    let mut max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s[i][j] = (a[i][j] + a[j][i]) / 2.0;
                max = max.max(s[i][j]);
            }
        }
    }
    if max <= 0.0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|v| {
            let k = (0..n).filter(|&u| s[v][u] > 0.0).count();
            if k < 2 {
                return 0.0;
            }
            let mut total = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if s[v][i] > 0.0 && s[v][j] > 0.0 && s[i][j] > 0.0 {
                        total += ((s[v][i] / max) * (s[v][j] / max) * (s[i][j] / max)).powf(1.0 / 3.0);
                    }
                }
            }
            2.0 * total / (k * (k - 1)) as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Communities and metrics

/// Newman modularity of `assignment` on `(A + Aᵀ)/2` with a zero diagonal.
pub fn modularity(a: &Dense, assignment: &[usize]) -> f64 {
    let n = a.len();
    let s: Dense = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { (a[i][j] + a[j][i]) / 2.0 }).collect()).collect();
    let two_m: f64 = s.iter().flatten().sum();
    if two_m <= 0.0 {
        return 0.0;
    }
    let k: Vec<f64> = s.iter().map(|row| row.iter().sum()).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if assignment[i] == assignment[j] {
                q += s[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

#[derive(Debug, Clone, Copy)]
pub struct Scores {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub mcc: f64,
}

pub fn scores(probs: &[f64], labels: &[u8], threshold: f64) -> Scores {
    let mut cells: BTreeMap<(bool, bool), u64> = BTreeMap::new();
    for (&p, &l) in probs.iter().zip(labels) {
        *cells.entry((p >= threshold, l == 1)).or_default() += 1;
    }
    let get = |k| cells.get(&k).copied().unwrap_or(0);
    let (tp, fp, fn_, tn) = (get((true, true)), get((true, false)), get((false, true)), get((false, false)));
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    let accuracy = ratio(tp + tn, tp + fp + fn_ + tn);
    let denom = ((tp + fp) as f64 * (tp + fn_) as f64 * (tn + fp) as f64 * (tn + fn_) as f64).sqrt();
    let mcc = if denom == 0.0 { 0.0 } else { (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / denom };
    Scores { tp, fp, fn_, tn, precision, recall, f1, accuracy, mcc }
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn pairwise_auc(probs: &[f64], labels: &[u8]) -> Option<f64> {
    let (mut num, mut pairs) = (0.0, 0u64);
    for (i, &pi) in probs.iter().enumerate() {
        for (j, &pj) in probs.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                if pi > pj {
                    num += 1.0;
                } else if pi == pj {
                    num += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| num / pairs as f64)
}
