//! Cluster-count selection from the SSE-versus-k curve.
//!
//! For every candidate k a Lloyd-style partitional pass is restarted several
//! times and the lowest SSE is kept. The elbow is the k with the largest
//! second difference of `ln SSE(k)`; taking the logarithm makes the rule
//! compare relative drops, so a curve that flattens after the true k is
//! found even when earlier merges cost more in absolute terms.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded, SeededRng};
use crate::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_SWEEPS: usize = 50;
pub const CONVERGENCE_TOL: f64 = 1e-9;

/// Squared Euclidean distance.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σ_i Σ_{x∈C_i} ‖x − μ_i‖²`.
pub fn compute_sse(data: ArrayView2<f64>, labels: &[usize], centroids: ArrayView2<f64>) -> Result<f64> {
    if labels.len() != data.nrows() {
        return Err(Error::Structural(format!(
            "{} labels for {} rows",
            labels.len(),
            data.nrows()
        )));
    }
    if data.ncols() != centroids.ncols() {
        return Err(Error::Structural(format!(
            "data has {} columns, centroids have {}",
            data.ncols(),
            centroids.ncols()
        )));
    }
    let mut sse = 0.0;
    for (point, &l) in data.outer_iter().zip(labels) {
        if l >= centroids.nrows() {
            return Err(Error::Structural(format!("label {l} has no centroid")));
        }
        sse += point
            .iter()
            .zip(centroids.row(l))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(sse)
}

/// Result of a Lloyd pass.
#[derive(Debug, Clone)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub sse: f64,
}

/// k-means++ seeding: the first centre is uniform, later ones are drawn with
/// probability proportional to squared distance from the nearest chosen
/// centre, so they are distinct points whenever the data allows it.
fn seed_centres(points: &[Vec<f64>], k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centres = vec![points[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centres.push(c);
    }
    centres
}

/// Lloyd alternation from k-means++ seeds: at most [`MAX_SWEEPS`] sweeps,
/// stopping once no centroid moves by more than [`CONVERGENCE_TOL`].
pub fn lloyd(data: ArrayView2<f64>, k: usize, rng: &mut SeededRng) -> Partition {
    let (n, d) = data.dim();
    let points: Vec<Vec<f64>> = data.outer_iter().map(|r| r.to_vec()).collect();
    let mut centres = seed_centres(&points, k, rng);
    let mut labels = vec![0usize; n];
    for _ in 0..MAX_SWEEPS {
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest(p, &centres);
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // Re-seed an empty cluster at the point farthest from its centre.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centres[labels[a]]);
                        let db = sq_dist(&points[b], &centres[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                points[far].clone()
            };
            shift = shift.max(sq_dist(&next, &centres[c]).sqrt());
            centres[c] = next;
        }
        if shift <= CONVERGENCE_TOL {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest(p, &centres);
    }
    let centroids = Array2::from_shape_fn((k, d), |(c, j)| centres[c][j]);
    let sse = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centres[l]))
        .sum();
    Partition {
        labels,
        centroids,
        sse,
    }
}

pub(crate) fn nearest(p: &[f64], centres: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centre) in centres.iter().enumerate() {
        let d = sq_dist(p, centre);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// SSE curve over `k = 1..=k_max` together with the selected count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub k_values: Vec<usize>,
    pub sse: Vec<f64>,
    pub chosen_k: usize,
    /// Set when the curve was too short for a second difference.
    pub degenerate: bool,
}

impl ElbowScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,sse\n");
        for (k, s) in self.k_values.iter().zip(&self.sse) {
            out.push_str(&format!("{k},{s}\n"));
        }
        out
    }
}

/// `min(10, ⌈√N⌉)`.
pub fn default_k_max(n: usize) -> usize {
    10.min((n as f64).sqrt().ceil() as usize)
}

/// Runs the partitional pass `restarts` times for every k and keeps the
/// minimum SSE. Per-k work uses seeds derived from `(seed, k, restart)`, so
/// the curve does not depend on how the k values are scheduled.
pub fn scan_k(data: ArrayView2<f64>, k_max: usize, restarts: usize, seed: u64) -> Result<ElbowScan> {
    if k_max < 2 {
        return Err(Error::Parameter(format!("k_max must be at least 2, got {k_max}")));
    }
    if data.nrows() < k_max {
        return Err(Error::Parameter(format!(
            "need at least k_max = {k_max} rows, got {}",
            data.nrows()
        )));
    }
    let restarts = restarts.max(1);
    let sse: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            (0..restarts)
                .map(|r| {
                    let mut rng = seeded(derive_seed(seed, &[k as u64, r as u64]));
                    lloyd(data, k, &mut rng).sse
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let choice = select_elbow(&sse);
    Ok(ElbowScan {
        k_values: (1..=k_max).collect(),
        sse,
        chosen_k: choice.k,
        degenerate: choice.degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElbowChoice {
    pub k: usize,
    pub degenerate: bool,
}

/// Picks the k in `[2, k_max − 1]` maximizing
/// `ln SSE(k−1) − 2·ln SSE(k) + ln SSE(k+1)`; ties go to the smaller k.
///
/// `sse[i]` holds SSE(k = i + 1). SSE values are floored at `1e-12·SSE(1)`
/// before taking logarithms so exact fits stay finite. A curve shorter than
/// three points, or one that is identically zero, yields k = 2 with
/// `degenerate` set.
pub fn select_elbow(sse: &[f64]) -> ElbowChoice {
    let degenerate = ElbowChoice {
        k: 2,
        degenerate: true,
    };
    if sse.len() < 3 || sse[0].is_nan() || sse[0] <= 0.0 {
        return degenerate;
    }
    let floor = sse[0] * 1e-12;
    let logs: Vec<f64> = sse.iter().map(|s| s.max(floor).ln()).collect();
    let mut best = ElbowChoice {
        k: 2,
        degenerate: false,
    };
    let mut best_val = f64::NEG_INFINITY;
    for k in 2..sse.len() {
        let v = logs[k - 2] - 2.0 * logs[k - 1] + logs[k];
        if v > best_val {
            best_val = v;
            best.k = k;
        }
    }
    best
}

/// Centroids of a labelled partition (member means); empty clusters get NaN rows.
pub fn member_means(data: ArrayView2<f64>, labels: &[usize], k: usize) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros((k, data.ncols()));
    let mut counts = vec![0usize; k];
    for (p, &l) in data.outer_iter().zip(labels) {
        counts[l] += 1;
        let mut s = sums.row_mut(l);
        s += &p;
    }
    for (c, mut r) in sums.axis_iter_mut(Axis(0)).enumerate() {
        r.mapv_inplace(|v| v / counts[c] as f64);
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn sse_examples() {
        let x = array![[1.0, 2.0], [1.0, 2.0]];
        assert_eq!(compute_sse(x.view(), &[0, 0], array![[1.0, 2.0]].view()).unwrap(), 0.0);
        let x = array![[0.0, 0.0], [2.0, 0.0]];
        assert_eq!(compute_sse(x.view(), &[0, 0], array![[1.0, 0.0]].view()).unwrap(), 2.0);
        let x = array![[0.0], [3.0], [6.0]];
        assert_eq!(compute_sse(x.view(), &[0, 0, 0], array![[3.0]].view()).unwrap(), 18.0);
    }

    #[test]
    fn sse_shape_errors() {
        let x = array![[0.0, 0.0]];
        assert!(compute_sse(x.view(), &[0], array![[0.0]].view()).is_err());
        assert!(compute_sse(x.view(), &[1], array![[0.0, 0.0]].view()).is_err());
        assert!(compute_sse(x.view(), &[], array![[0.0, 0.0]].view()).is_err());
    }

    #[test]
    fn select_elbow_examples() {
        // ln-second differences: k=2 → −0.288, k=3 → 1.022, k=4 → 0.077.
        assert_eq!(select_elbow(&[100.0, 40.0, 12.0, 10.0, 9.0]).k, 3);
        assert_eq!(select_elbow(&[10.0, 8.0, 6.0, 4.0, 2.0]).k, 2);
        let short = select_elbow(&[5.0, 1.0]);
        assert!(short.degenerate);
        assert_eq!(short.k, 2);
        assert!(select_elbow(&[0.0, 0.0, 0.0]).degenerate);
    }

    #[test]
    fn identical_points_have_zero_sse() {
        let x = Array2::from_elem((12, 2), 0.25);
        let scan = scan_k(x.view(), 4, 3, 1).unwrap();
        assert!(scan.sse.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn two_points_two_clusters() {
        let x = array![[0.0], [1.0]];
        let scan = scan_k(x.view(), 2, 5, 3).unwrap();
        assert_eq!(scan.sse[1], 0.0);
        assert_eq!(scan.chosen_k, 2);
    }

    #[test]
    fn scan_parameter_errors() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(scan_k(x.view(), 3, 5, 0), Err(Error::Parameter(_))));
        assert!(matches!(scan_k(x.view(), 1, 5, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn three_blobs_curve_shape_and_choice() {
        let blobs = synth::triangle_blobs(500, 0.1, 6.0, 11);
        let scan = scan_k(blobs.points.view(), 8, DEFAULT_RESTARTS, 5).unwrap();
        assert!(scan.sse[2] < 0.02 * scan.sse[1], "{:?}", scan.sse);
        for k in 3..8 {
            assert!(scan.sse[k] <= scan.sse[2] + 1e-9);
        }
        assert_eq!(scan.chosen_k, 3);
    }

    #[test]
    fn scan_is_deterministic_across_pools() {
        let blobs = synth::triangle_blobs(200, 0.1, 6.0, 2);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| scan_k(blobs.points.view(), 8, 5, 9).unwrap());
        let b = many.install(|| scan_k(blobs.points.view(), 8, 5, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sse_non_increasing_with_restarts() {
        let blobs = synth::gaussian_blobs(4, 2, 300, 1.0, 6.0, 8);
        let scan = scan_k(blobs.points.view(), 8, DEFAULT_RESTARTS, 4).unwrap();
        for w in scan.sse.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", scan.sse);
        }
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant(
            mut curve in prop::collection::vec(0.01f64..100.0, 3..10),
            c in 0.001f64..1000.0,
        ) {
            curve.sort_by(|a, b| b.total_cmp(a));
            let scaled: Vec<f64> = curve.iter().map(|v| v * c).collect();
            let a = select_elbow(&curve);
            let b = select_elbow(&scaled);
            // Scaling shifts every log by the same constant; only rounding can differ.
            if a.k != b.k {
                let logs: Vec<f64> = curve.iter().map(|s| s.ln()).collect();
                let d = |k: usize| logs[k - 2] - 2.0 * logs[k - 1] + logs[k];
                prop_assert!((d(a.k) - d(b.k)).abs() < 1e-9);
            }
        }

        #[test]
        fn sse_permutation_invariant_and_additive(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..3), 1..30),
            rot in 0usize..30,
        ) {
            let n = pts.len();
            let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { pts[i].0 } else { pts[i].1 });
            let labels: Vec<usize> = pts.iter().map(|p| p.2).collect();
            let cents = array![[0.0, 0.0], [1.0, -1.0], [2.0, 3.0]];
            let total = compute_sse(x.view(), &labels, cents.view()).unwrap();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.rotate_left(rot % n);
            let px = x.select(Axis(0), &idx);
            let pl: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let permuted = compute_sse(px.view(), &pl, cents.view()).unwrap();
            prop_assert!((total - permuted).abs() < 1e-9);
            let mut parts = 0.0;
            for c in 0..3 {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                let sub = x.select(Axis(0), &members);
                let ones = vec![0usize; members.len()];
                parts += compute_sse(sub.view(), &ones, cents.slice(ndarray::s![c..c + 1, ..])).unwrap();
            }
            prop_assert!((total - parts).abs() < 1e-9);
        }
    }
}
