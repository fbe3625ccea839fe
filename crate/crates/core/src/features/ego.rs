//! One-step ego-network measures.
//!
//! The out-ego of `v` is `v` plus its out-neighbors; `n` is the number of
//! alters (ego excluded). The same formulas serve the binary and weighted
//! graphs: with a 0/1 matrix the weight sums are tie counts.

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EgoFeatures {
    pub in_ratio: f64,
    pub out_degree: f64,
    pub out_ratio: f64,
    pub efficiency: f64,
    pub effective_size: f64,
    pub density: f64,
}

fn out_alters(adj: &Matrix, v: usize) -> Vec<usize> {
    (0..adj.cols()).filter(|&j| j != v && adj[(v, j)] > 0.0).collect()
}

fn in_alters(adj: &Matrix, v: usize) -> Vec<usize> {
    (0..adj.rows()).filter(|&i| i != v && adj[(i, v)] > 0.0).collect()
}

pub fn ego_features(adj: &Matrix, v: usize) -> EgoFeatures {
    let ins = in_alters(adj, v);
    let in_ratio = if ins.is_empty() {
        0.0
    } else {
        ins.iter().map(|&i| adj[(i, v)]).sum::<f64>() / ins.len() as f64
    };

    let alters = out_alters(adj, v);
    let n = alters.len();
    if n == 0 {
        return EgoFeatures { in_ratio, ..EgoFeatures::default() };
    }
    let nf = n as f64;
    let out_degree: f64 = alters.iter().map(|&j| adj[(v, j)]).sum();
    // Σ over alters of their outward ties to other alters
    let alter_ties: f64 = alters
        .iter()
        .map(|&i| alters.iter().filter(|&&j| j != i).map(|&j| adj[(i, j)]).sum::<f64>())
        .sum();
    let ego_in: f64 = alters.iter().map(|&i| adj[(i, v)]).sum();
    let total = out_degree + ego_in + alter_ties;
    let density = if n > 1 { 2.0 * total / (nf * (nf - 1.0)) } else { 0.0 };
    EgoFeatures {
        in_ratio,
        out_degree,
        out_ratio: out_degree / nf,
        efficiency: 1.0 - alter_ties / (nf * nf),
        effective_size: nf - alter_ties / nf,
        density,
    }
}

pub fn all_ego_features(adj: &Matrix) -> Vec<EgoFeatures> {
    (0..adj.rows()).map(|v| ego_features(adj, v)).collect()
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
    fn star() {
        let f = ego_features(&adj(4, &[(0, 1), (0, 2), (0, 3)]), 0);
        assert_eq!(f.effective_size, 3.0);
        assert_eq!(f.efficiency, 1.0);
        assert_eq!(f.out_degree, 3.0);
        assert_eq!(f.out_ratio, 1.0);
        assert_eq!(f.in_ratio, 0.0);
        assert!((f.density - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_alters() {
        let f = ego_features(&adj(3, &[(0, 1), (0, 2), (1, 2), (2, 1)]), 0);
        assert_eq!(f.effective_size, 1.0);
        assert_eq!(f.efficiency, 0.5);
    }

    #[test]
    fn degenerate_sizes() {
        let lone = ego_features(&adj(3, &[(1, 0)]), 0);
        assert_eq!(lone, EgoFeatures { in_ratio: 1.0, ..EgoFeatures::default() });
        let single = ego_features(&adj(2, &[(0, 1)]), 0);
        assert_eq!(single.density, 0.0);
        assert_eq!(single.effective_size, 1.0);
    }

    #[test]
    fn weighted_sums() {
        let mut w = Matrix::zeros(3, 3);
        w[(0, 1)] = 0.5;
        w[(0, 2)] = 1.0;
        w[(1, 2)] = 0.4;
        w[(2, 0)] = 0.2;
        let f = ego_features(&w, 0);
        assert!((f.out_degree - 1.5).abs() < 1e-12);
        assert!((f.out_ratio - 0.75).abs() < 1e-12);
        assert!((f.effective_size - (2.0 - 0.4 / 2.0)).abs() < 1e-12);
        assert!((f.efficiency - (1.0 - 0.4 / 4.0)).abs() < 1e-12);
        assert!((f.density - 2.0 * (1.5 + 0.2 + 0.4) / 2.0).abs() < 1e-12);
        assert!((f.in_ratio - 0.2).abs() < 1e-12);
    }

    // Enumerates every ordered pair of the ego network explicitly.
    fn brute(a: &Matrix, v: usize) -> (f64, f64, f64, f64) {
        let n_all = a.rows();
        let members: Vec<usize> = (0..n_all).filter(|&j| j == v || (j != v && a[(v, j)] > 0.0)).collect();
        let n = members.len() - 1;
        if n == 0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let mut ties = 0.0;
        let mut m = 0.0;
        for &i in &members {
            for &j in &members {
                if i == j {
                    continue;
                }
                m += a[(i, j)];
                if i != v && j != v {
                    ties += a[(i, j)];
                }
            }
        }
        let nf = n as f64;
        let density = if n > 1 { 2.0 * m / (nf * (nf - 1.0)) } else { 0.0 };
        (nf - ties / nf, 1.0 - ties / (nf * nf), density, (0..n_all).filter(|&j| j != v && a[(v, j)] > 0.0).count() as f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn matches_tie_enumeration(n in 1usize..=10, bits in prop::collection::vec(any::<bool>(), 100)) {
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && bits[i * 10 + j] { a[(i, j)] = 1.0; }
                }
            }
            for v in 0..n {
                let f = ego_features(&a, v);
                let (es, eff, dens, q) = brute(&a, v);
                prop_assert_eq!(f.effective_size, es);
                prop_assert_eq!(f.efficiency, eff);
                prop_assert_eq!(f.density, dens);
                prop_assert_eq!(f.out_degree, q);
                prop_assert!(f.efficiency <= 1.0);
                prop_assert!(f.effective_size <= q);
            }
        }
    }
}
