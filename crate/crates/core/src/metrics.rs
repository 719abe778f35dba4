//! Partition quality measures.
//!
//! External measures (pair accuracy, NMI, ARI) compare a predicted labelling
//! with ground truth through a contingency table. Internal measures (nMSE,
//! DBI) look at the data and centroids only. The intra/inter-cluster
//! distances used by the evolutionary objective live here as well.

use std::collections::HashMap;
use std::hash::Hash;

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::elbow::compute_sse;
use crate::{Error, Result};

fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean Euclidean distance over ordered pairs of distinct members; 0 for a
/// singleton.
pub fn intra_cluster(points: ArrayView2<f64>) -> Result<f64> {
    let n = points.nrows();
    if n == 0 {
        return Err(Error::Domain("intra-cluster distance of an empty set".into()));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            sum += dist(points.row(a), points.row(b));
        }
    }
    Ok(2.0 * sum / (n * (n - 1)) as f64)
}

/// `(Σ_{x∈A} d(x, v_B) + Σ_{y∈B} d(y, v_A)) / (|A| + |B|)` with `v` the means.
pub fn inter_cluster(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Domain("inter-cluster distance with an empty cluster".into()));
    }
    let va = a.mean_axis(Axis(0)).expect("non-empty");
    let vb = b.mean_axis(Axis(0)).expect("non-empty");
    let to_b: f64 = a.outer_iter().map(|x| dist(x, vb.view())).sum();
    let to_a: f64 = b.outer_iter().map(|y| dist(y, va.view())).sum();
    Ok((to_b + to_a) / (a.nrows() + b.nrows()) as f64)
}

/// Agreement counts over the `N·(N−1)/2` unordered row pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Cluster-by-class counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

fn dense<L: Hash + Eq>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut map: HashMap<&L, usize> = HashMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (idx, map.len())
}

impl ContingencyTable {
    pub fn new<A: Hash + Eq, B: Hash + Eq>(pred: &[A], truth: &[B]) -> Result<Self> {
        check_lengths(pred.len(), truth.len())?;
        let (p, kp) = dense(pred);
        let (t, kt) = dense(truth);
        let mut counts = vec![vec![0u64; kt]; kp];
        for (&i, &j) in p.iter().zip(&t) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..kt).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: pred.len() as u64,
        })
    }
}

fn check_lengths(pred: usize, truth: usize) -> Result<()> {
    if pred != truth {
        return Err(Error::Structural(format!(
            "prediction has {pred} labels, truth has {truth}"
        )));
    }
    Ok(())
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// Rand-style accuracy: `(TP + TN) / (TP + TN + FP + FN)` over row pairs.
pub fn pair_accuracy<A: Hash + Eq, B: Hash + Eq>(pred: &[A], truth: &[B]) -> Result<(f64, PairCounts)> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n < 2 {
        return Err(Error::Domain("pair accuracy needs at least two rows".into()));
    }
    let tp: u64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let same_pred: u64 = table.row_sums.iter().map(|&c| choose2(c)).sum();
    let same_truth: u64 = table.col_sums.iter().map(|&c| choose2(c)).sum();
    let fp = same_pred - tp;
    let fn_ = same_truth - tp;
    let tn = choose2(table.n) - tp - fp - fn_;
    let counts = PairCounts { tp, tn, fp, fn_ };
    Ok(((tp + tn) as f64 / counts.total() as f64, counts))
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2·I(C;K) / (H(C) + H(K))` with natural logarithms. Two single-cluster
/// partitions score 1; if only one of them is single-cluster the score is 0.
pub fn nmi<A: Hash + Eq, B: Hash + Eq>(pred: &[A], truth: &[B]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Err(Error::Domain("NMI of empty partitions".into()));
    }
    let n = table.n as f64;
    let hp = entropy(&table.row_sums, n);
    let ht = entropy(&table.col_sums, n);
    if hp == 0.0 && ht == 0.0 {
        return Ok(1.0);
    }
    if hp == 0.0 || ht == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                let a = table.row_sums[i] as f64;
                let b = table.col_sums[j] as f64;
                mi += c / n * (c * n / (a * b)).ln();
            }
        }
    }
    Ok((2.0 * mi / (hp + ht)).clamp(0.0, 1.0))
}

/// Adjusted Rand index under the hypergeometric null model.
pub fn ari<A: Hash + Eq, B: Hash + Eq>(pred: &[A], truth: &[B]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n < 2 {
        return Err(Error::Domain("ARI needs at least two rows".into()));
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c) as f64).sum();
    let a: f64 = table.row_sums.iter().map(|&c| choose2(c) as f64).sum();
    let b: f64 = table.col_sums.iter().map(|&c| choose2(c) as f64).sum();
    let expected = a * b / choose2(table.n) as f64;
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// `SSE / (N·D)`.
pub fn nmse(data: ArrayView2<f64>, labels: &[usize], centroids: ArrayView2<f64>) -> Result<f64> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::Structural("nMSE of an empty matrix".into()));
    }
    Ok(compute_sse(data, labels, centroids)? / (n * d) as f64)
}

/// Davies–Bouldin index: `(1/k)·Σ_i max_{j≠i} (s_i + s_j) / d(c_i, c_j)`
/// with `s_i` the mean member distance to centroid `i`.
pub fn dbi(data: ArrayView2<f64>, labels: &[usize], centroids: ArrayView2<f64>) -> Result<f64> {
    let k = centroids.nrows();
    if k < 2 {
        return Err(Error::Domain(format!("DBI needs at least two clusters, got {k}")));
    }
    if labels.len() != data.nrows() || data.ncols() != centroids.ncols() {
        return Err(Error::Structural("DBI inputs have inconsistent shapes".into()));
    }
    let mut spread = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (x, &l) in data.outer_iter().zip(labels) {
        if l >= k {
            return Err(Error::Structural(format!("label {l} has no centroid")));
        }
        spread[l] += dist(x, centroids.row(l));
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Domain(format!("cluster {c} is empty")));
    }
    for (s, &c) in spread.iter_mut().zip(&counts) {
        *s /= c as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist(centroids.row(i), centroids.row(j));
            if sep == 0.0 {
                return Err(Error::DegeneratePartition(format!(
                    "centroids {i} and {j} coincide"
                )));
            }
            worst = worst.max((spread[i] + spread[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// The five validation measures for one predicted partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accuracy: f64,
    pub nmi: f64,
    pub ari: f64,
    pub nmse: f64,
    pub dbi: f64,
    pub n: usize,
    pub d: usize,
    pub k_pred: usize,
    pub k_true: usize,
}

impl ValidationReport {
    pub fn is_finite(&self) -> bool {
        [self.accuracy, self.nmi, self.ari, self.nmse, self.dbi]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Scores `pred` against `truth`; `pred[i]` must index a row of `centroids`.
pub fn validate<B: Hash + Eq>(
    data: ArrayView2<f64>,
    pred: &[usize],
    truth: &[B],
    centroids: ArrayView2<f64>,
) -> Result<ValidationReport> {
    check_lengths(pred.len(), truth.len())?;
    if pred.len() != data.nrows() {
        return Err(Error::Structural(format!(
            "{} labels for {} rows",
            pred.len(),
            data.nrows()
        )));
    }
    let (accuracy, _) = pair_accuracy(pred, truth)?;
    let table = ContingencyTable::new(pred, truth)?;
    Ok(ValidationReport {
        accuracy,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
        nmse: nmse(data, pred, centroids)?,
        dbi: dbi(data, pred, centroids)?,
        n: data.nrows(),
        d: data.ncols(),
        k_pred: table.row_sums.len(),
        k_true: table.col_sums.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn intra_examples() {
        assert_eq!(intra_cluster(array![[1.0, 1.0], [1.0, 1.0]].view()).unwrap(), 0.0);
        assert_eq!(intra_cluster(array![[0.0], [1.0]].view()).unwrap(), 1.0);
        let v = intra_cluster(array![[0.0], [1.0], [2.0]].view()).unwrap();
        assert!((v - 8.0 / 6.0).abs() < 1e-15);
        assert_eq!(intra_cluster(array![[3.0, 4.0]].view()).unwrap(), 0.0);
        assert!(intra_cluster(Array2::<f64>::zeros((0, 1)).view()).is_err());
    }

    #[test]
    fn inter_examples() {
        assert_eq!(inter_cluster(array![[0.0]].view(), array![[2.0]].view()).unwrap(), 2.0);
        let a = array![[0.0], [2.0]];
        // Mean distance to own centroid: both points are 1 from mean 1.
        assert_eq!(inter_cluster(a.view(), a.view()).unwrap(), 1.0);
        let p = array![[1.0, 1.0], [1.0, 1.0]];
        let q = array![[4.0, 5.0], [4.0, 5.0]];
        assert_eq!(inter_cluster(p.view(), q.view()).unwrap(), 5.0);
        assert!(inter_cluster(p.view(), Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let truth = [0, 0, 1, 1];
        assert_eq!(pair_accuracy(&truth, &truth).unwrap().0, 1.0);
        let (acc, c) = pair_accuracy(&[7, 7, 7, 7], &truth).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (2, 4, 0, 0));
        assert!((acc - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(pair_accuracy(&[1, 1, 0, 0], &truth).unwrap().0, 1.0);
        assert!(matches!(pair_accuracy(&[0, 1], &[0]), Err(Error::Structural(_))));
    }

    #[test]
    fn nmi_examples() {
        let truth = [0, 0, 1, 1, 2];
        assert!((nmi(&truth, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&[3, 3], &[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn ari_examples() {
        let truth = [0, 0, 1, 1];
        assert_eq!(ari(&truth, &truth).unwrap(), 1.0);
        // Σ C(n_ij,2) = 0, a = b = 2, expected = 4/6, max = 2 → (0 − 2/3)/(2 − 2/3) = −0.5.
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(ari(&["x", "x", "y", "y"], &truth).unwrap(), 1.0);
    }

    #[test]
    fn nmse_examples() {
        let x = array![[0.0], [3.0], [6.0]];
        assert_eq!(nmse(x.view(), &[0, 0, 0], array![[3.0]].view()).unwrap(), 6.0);
        assert_eq!(nmse(x.view(), &[0, 1, 2], x.view()).unwrap(), 0.0);
        let x = array![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
        // SSE = 0 + 9 + 9 = 18, N·D = 6.
        assert_eq!(nmse(x.view(), &[0, 0, 0], array![[0.0, 0.0]].view()).unwrap(), 3.0);
    }

    #[test]
    fn dbi_examples() {
        let x = array![[0.0], [0.0], [5.0], [5.0]];
        assert_eq!(dbi(x.view(), &[0, 0, 1, 1], array![[0.0], [5.0]].view()).unwrap(), 0.0);
        let x = array![[0.0], [2.0], [10.0], [12.0]];
        let c = array![[1.0], [11.0]];
        assert!((dbi(x.view(), &[0, 0, 1, 1], c.view()).unwrap() - 0.2).abs() < 1e-15);
        let scaled = x.mapv(|v| v * 3.5);
        let sc = c.mapv(|v| v * 3.5);
        assert!((dbi(scaled.view(), &[0, 0, 1, 1], sc.view()).unwrap() - 0.2).abs() < 1e-12);
        assert!(matches!(
            dbi(x.view(), &[0, 0, 0, 0], array![[6.0]].view()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            dbi(x.view(), &[0, 0, 1, 1], array![[1.0], [1.0]].view()),
            Err(Error::DegeneratePartition(_))
        ));
    }

    #[test]
    fn validate_perfect_partition() {
        let x = array![[0.0], [0.1], [5.0], [5.1]];
        let c = array![[0.05], [5.05]];
        let r = validate(x.view(), &[0, 0, 1, 1], &["a", "a", "b", "b"], c.view()).unwrap();
        assert_eq!((r.accuracy, r.ari), (1.0, 1.0));
        assert!((r.nmi - 1.0).abs() < 1e-12);
        assert_eq!((r.k_pred, r.k_true, r.n, r.d), (2, 2, 4, 1));
        let json = serde_json::to_string(&r).unwrap();
        let back: ValidationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn external_measures_are_relabel_invariant_and_symmetric(
            pairs in prop::collection::vec((0usize..5, 0usize..4), 2..40),
            shift in 1usize..5,
        ) {
            let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let relabeled: Vec<usize> = pred.iter().map(|l| (l + shift) % 5 + 10).collect();
            let acc = pair_accuracy(&pred, &truth).unwrap().0;
            prop_assert_eq!(acc, pair_accuracy(&relabeled, &truth).unwrap().0);
            prop_assert!((nmi(&pred, &truth).unwrap() - nmi(&relabeled, &truth).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&pred, &truth).unwrap() - ari(&relabeled, &truth).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&pred, &truth).unwrap() - ari(&truth, &pred).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&pred, &truth).unwrap() - nmi(&truth, &pred).unwrap()).abs() < 1e-12);
            let (_, c) = pair_accuracy(&pred, &truth).unwrap();
            let n = pred.len() as u64;
            prop_assert_eq!(c.total(), n * (n - 1) / 2);
        }

        #[test]
        fn inter_symmetric_and_singleton_intra_zero(
            a in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..8),
            b in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..8),
        ) {
            let to_arr = |v: &[(f64, f64)]| Array2::from_shape_fn((v.len(), 2), |(i, j)| if j == 0 { v[i].0 } else { v[i].1 });
            let (pa, pb) = (to_arr(&a), to_arr(&b));
            let ab = inter_cluster(pa.view(), pb.view()).unwrap();
            let ba = inter_cluster(pb.view(), pa.view()).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert_eq!(intra_cluster(pa.slice(ndarray::s![0..1, ..])).unwrap(), 0.0);
        }

        #[test]
        fn dbi_translation_and_scale_invariant(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 6..20),
            t in -10.0f64..10.0,
            s in 0.1f64..10.0,
        ) {
            let n = pts.len();
            let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { pts[i].0 } else { pts[i].1 });
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let c = crate::elbow::member_means(x.view(), &labels, 3);
            let base = match dbi(x.view(), &labels, c.view()) {
                Ok(v) => v,
                Err(_) => return Ok(()),
            };
            let y = x.mapv(|v| v * s + t);
            let cy = c.mapv(|v| v * s + t);
            let moved = dbi(y.view(), &labels, cy.view()).unwrap();
            prop_assert!((base - moved).abs() <= 1e-9 * base.max(1.0));
            prop_assert_eq!(nmse(x.view(), &labels, c.view()).unwrap(),
                crate::elbow::compute_sse(x.view(), &labels, c.view()).unwrap() / (2 * n) as f64);
        }
    }
}
