//! Classification metrics, ROC analysis, threshold sweeps and timing summaries.

pub mod split;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use split::{chronological_split, SplitError, SplitPlan, SplitSummary, MIN_TOKEN_SPREADERS};
pub use stats::{student_t_two_sided, welch_t_test, StatsError, WelchResult};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("AUC undefined: labels contain a single class")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    Length { scores: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], labels: &[u8]) -> Self {
        let mut c = Self::default();
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p != 0, y != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// Predict positive when `score ≥ threshold`.
    pub fn at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> Self {
        let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
        Self::from_predictions(&predicted, labels)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn f1(&self) -> f64 {
        ratio(2.0 * self.tp as f64, (2 * self.tp + self.fp + self.fn_) as f64)
    }

    pub fn accuracy(&self) -> f64 {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    pub fn false_positive_rate(&self) -> f64 {
        ratio(self.fp as f64, (self.fp + self.tn) as f64)
    }

    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        ratio(tp * tn - fp * fn_, den)
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            accuracy: self.accuracy(),
            mcc: self.mcc(),
        }
    }
}

/// Zero denominators yield 0 for the affected metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub mcc: f64,
}

/// Rank-based AUC with midranks for ties (a tie counts one half).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Length { scores: scores.len(), labels: labels.len() });
    }
    let pos = labels.iter().filter(|&&y| y != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k] != 0).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// `0.00, 0.05, …, 1.00`
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub tpr: f64,
    pub fpr: f64,
}

pub fn threshold_sweep(scores: &[f64], labels: &[u8], grid: &[f64]) -> Vec<SweepRow> {
    grid.iter()
        .map(|&threshold| {
            let confusion = Confusion::at_threshold(scores, labels, threshold);
            SweepRow {
                threshold,
                confusion,
                metrics: confusion.metrics(),
                tpr: confusion.recall(),
                fpr: confusion.false_positive_rate(),
            }
        })
        .collect()
}

/// Threshold with the highest F1; ties go to the one nearest 0.5, then the lower.
pub fn best_threshold(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .min_by(|a, b| {
            b.metrics
                .f1
                .total_cmp(&a.metrics.f1)
                .then((a.threshold - 0.5).abs().total_cmp(&(b.threshold - 0.5).abs()))
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .map(|r| r.threshold)
}

pub fn write_sweep_csv<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["threshold", "tp", "fp", "fn", "tn", "precision", "recall", "f1", "accuracy", "mcc", "tpr", "fpr"])?;
    for r in rows {
        let c = r.confusion;
        let m = r.metrics;
        w.write_record(
            [r.threshold, c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64, m.precision, m.recall, m.f1, m.accuracy, m.mcc, r.tpr, r.fpr]
                .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Timing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub seconds: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceBucket {
    pub min_nodes: usize,
    /// Exclusive; `None` for the open top bucket.
    pub max_nodes: Option<usize>,
    pub count: usize,
    pub mean_seconds: f64,
    pub max_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub epoch_cdf: Vec<CdfPoint>,
    pub inference: Vec<InferenceBucket>,
}

const BUCKET_EDGES: [usize; 5] = [0, 10, 50, 100, 500];

/// Empirical CDF of epoch times (one point per distinct time) and
/// inference times bucketed by graph node count.
pub fn timing_report(epoch_seconds: &[f64], inference: &[(usize, f64)]) -> TimingReport {
    let mut sorted = epoch_seconds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut epoch_cdf: Vec<CdfPoint> = Vec::new();
    for (i, &s) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match epoch_cdf.last_mut() {
            Some(last) if last.seconds == s => last.fraction = fraction,
            _ => epoch_cdf.push(CdfPoint { seconds: s, fraction }),
        }
    }
    let mut buckets = Vec::new();
    for (k, &lo) in BUCKET_EDGES.iter().enumerate() {
        let hi = BUCKET_EDGES.get(k + 1).copied();
        let times: Vec<f64> = inference
            .iter()
            .filter(|(nodes, _)| *nodes >= lo && hi.is_none_or(|h| *nodes < h))
            .map(|&(_, t)| t)
            .collect();
        if times.is_empty() {
            continue;
        }
        buckets.push(InferenceBucket {
            min_nodes: lo,
            max_nodes: hi,
            count: times.len(),
            mean_seconds: times.iter().sum::<f64>() / times.len() as f64,
            max_seconds: times.iter().copied().fold(0.0, f64::max),
        });
    }
    TimingReport { epoch_cdf, inference: buckets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 1.0;
                    total += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn perfect_prediction() {
        let c = Confusion::from_predictions(&[1, 0, 1, 0], &[1, 0, 1, 0]);
        let m = c.metrics();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy, m.mcc), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_negative_prediction() {
        let c = Confusion::from_predictions(&[0, 0, 0], &[1, 0, 1]);
        assert_eq!((c.precision(), c.recall(), c.mcc(), c.f1()), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn mcc_reference_value() {
        // computed separately: (7*88 - 2*3) / sqrt(9*10*90*91)
        let c = Confusion { tp: 7, fp: 2, fn_: 3, tn: 88 };
        assert!((c.mcc() - 0.7105041671115224).abs() < 1e-15);
    }

    #[test]
    fn auc_trivial_cases() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass));
    }

    #[test]
    fn six_point_fixture() {
        let s = [0.9, 0.4, 0.4, 0.7, 0.2, 0.7];
        let y = [1, 0, 1, 0, 0, 1];
        // pairs: (0.9 beats 3) + (0.4: 0.5,0,1) + (0.7: 1,0.5,1)
        assert!((roc_auc(&s, &y).unwrap() - 7.0 / 9.0).abs() < 1e-15);
        assert!((pairwise_auc(&s, &y) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_edges() {
        let s = [0.1, 0.6, 0.3, 0.8];
        let y = [0, 1, 1, 0];
        let rows = threshold_sweep(&s, &y, &default_grid());
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0].metrics.recall, 1.0);
        assert_eq!(rows[10].threshold, 0.5);
        let last = rows.last().unwrap();
        assert_eq!((last.metrics.precision, last.metrics.recall), (0.0, 0.0));
        for w in rows.windows(2) {
            assert!(w[0].tpr >= w[1].tpr);
        }
    }

    #[test]
    fn best_threshold_prefers_half_on_ties() {
        let rows = threshold_sweep(&[0.9, 0.1], &[1, 0], &default_grid());
        assert_eq!(best_threshold(&rows), Some(0.5));
    }

    #[test]
    fn timing_cdf() {
        let r = timing_report(&[0.2, 0.2, 0.2], &[(5, 0.01), (60, 0.03), (70, 0.05)]);
        assert_eq!(r.epoch_cdf, vec![CdfPoint { seconds: 0.2, fraction: 1.0 }]);
        let r = timing_report(&[0.3, 0.1, 0.2, 0.1], &[]);
        assert_eq!(r.epoch_cdf.last().unwrap().fraction, 1.0);
        assert_eq!(r.epoch_cdf[0], CdfPoint { seconds: 0.1, fraction: 0.5 });
        let r = timing_report(&[], &[(5, 0.01), (60, 0.03), (70, 0.05)]);
        assert_eq!(r.inference.len(), 2);
        assert_eq!(r.inference[1].count, 2);
        assert!((r.inference[1].mean_seconds - 0.04).abs() < 1e-15);
    }

    fn prediction_set() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 0.5, 0.75, 0.9, 1.0]), n),
                prop::collection::vec(0u8..=1, n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pairs((s, y) in prediction_set()) {
            let both = y.contains(&0) && y.contains(&1);
            prop_assume!(both);
            prop_assert!((roc_auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs() < 1e-12);
        }

        #[test]
        fn auc_monotone_invariance((s, y) in prediction_set()) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&s, &y).unwrap(), roc_auc(&t, &y).unwrap());
        }

        #[test]
        fn best_f1_dominates_half((s, y) in prediction_set()) {
            let rows = threshold_sweep(&s, &y, &default_grid());
            let best = best_threshold(&rows).unwrap();
            let f = |t: f64| Confusion::at_threshold(&s, &y, t).f1();
            prop_assert!(f(best) >= f(0.5));
        }

        #[test]
        fn counts_partition((s, y) in prediction_set(), t in 0.0f64..1.0) {
            prop_assert_eq!(Confusion::at_threshold(&s, &y, t).total(), s.len() as u64);
        }
    }
}
