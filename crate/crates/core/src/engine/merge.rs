//! Diversity-based merging of touching clusters.

use ndarray::{Array2, ArrayView2};

use super::state::{compact, dist, ClusterState, Points};
use crate::Result;

/// `σ = min(D_min − R_i, D_min − R_j)`; the pair merges when `σ ≤ 0`.
pub fn sigma(d_min: f64, r_i: f64, r_j: f64) -> f64 {
    (d_min - r_i).min(d_min - r_j)
}

/// Closest-member distances and summed pairwise distances between and
/// within clusters, from one pass over all row pairs.
struct PairStats {
    d_min: Vec<Vec<f64>>,
    sums: Vec<Vec<f64>>,
    sizes: Vec<usize>,
}

impl PairStats {
    fn new(pts: &Points, labels: &[usize], k: usize) -> Self {
        let mut d_min = vec![vec![f64::INFINITY; k]; k];
        let mut sums = vec![vec![0.0; k]; k];
        let mut sizes = vec![0; k];
        for &l in labels {
            sizes[l] += 1;
        }
        for a in 0..pts.len() {
            let la = labels[a];
            for b in a + 1..pts.len() {
                let lb = labels[b];
                let d = dist(&pts[a], &pts[b]);
                if la == lb {
                    sums[la][la] += d;
                } else {
                    sums[la][lb] += d;
                    sums[lb][la] += d;
                    if d < d_min[la][lb] {
                        d_min[la][lb] = d;
                        d_min[lb][la] = d;
                    }
                }
            }
        }
        Self { d_min, sums, sizes }
    }

    fn radius(&self, c: usize) -> f64 {
        let n = self.sizes[c];
        if n < 2 {
            0.0
        } else {
            2.0 * self.sums[c][c] / (n * (n - 1)) as f64
        }
    }

    fn absorb(&mut self, into: usize, from: usize, alive: &[bool]) {
        self.sums[into][into] += self.sums[from][from] + self.sums[into][from];
        for l in (0..alive.len()).filter(|&l| alive[l] && l != into && l != from) {
            self.sums[into][l] += self.sums[from][l];
            self.sums[l][into] = self.sums[into][l];
            let d = self.d_min[into][l].min(self.d_min[from][l]);
            self.d_min[into][l] = d;
            self.d_min[l][into] = d;
        }
        self.sizes[into] += self.sizes[from];
        self.sizes[from] = 0;
    }
}

/// Merges clusters until no pair has `σ ≤ 0`, scanning pairs in ascending
/// order and folding the smaller cluster into the larger (the lower id on
/// equal sizes). Centroids become member means and the density recount runs
/// after each round; rounds repeat until neither step changes anything.
/// Returns the number of merges.
pub fn merge_pass(state: &mut ClusterState, pts: &Points, density: f64) -> Result<usize> {
    let mut merges = 0;
    loop {
        let k = state.k_live();
        let mut stats = PairStats::new(pts, &state.assignments, k);
        let mut alive = vec![true; k];
        let mut target: Vec<usize> = (0..k).collect();
        'scan: loop {
            for i in 0..k {
                if !alive[i] {
                    continue;
                }
                for j in i + 1..k {
                    if !alive[j] {
                        continue;
                    }
                    if sigma(stats.d_min[i][j], stats.radius(i), stats.radius(j)) <= 0.0 {
                        let (into, from) = if stats.sizes[j] > stats.sizes[i] { (j, i) } else { (i, j) };
                        stats.absorb(into, from, &alive);
                        alive[from] = false;
                        for t in target.iter_mut().filter(|t| **t == from) {
                            *t = into;
                        }
                        merges += 1;
                        continue 'scan;
                    }
                }
            }
            break;
        }
        let merged_any = alive.iter().any(|a| !a);
        if merged_any {
            for l in &mut state.assignments {
                *l = target[*l];
            }
            let keep = compact(&mut state.assignments, k);
            state.retain(&keep);
        }
        state.set_member_means(pts);
        let before = state.k_live();
        let after = state.recount(pts, density)?;
        if after != before {
            state.set_member_means(pts);
        }
        if !merged_any && after == before {
            return Ok(merges);
        }
    }
}

/// Exhaustive `σ_ij` for every pair of clusters of a labelled partition,
/// computed directly from member distances. Used to check the fixed point.
pub fn sigma_matrix(data: ArrayView2<f64>, labels: &[usize]) -> Array2<f64> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let members: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    let radius: Vec<f64> = members
        .iter()
        .map(|m| {
            if m.is_empty() {
                0.0
            } else {
                crate::metrics::intra_cluster(data.select(ndarray::Axis(0), m).view()).unwrap_or(0.0)
            }
        })
        .collect();
    let mut out = Array2::from_elem((k, k), f64::INFINITY);
    for i in 0..k {
        for j in i + 1..k {
            let mut d_min = f64::INFINITY;
            for &a in &members[i] {
                for &b in &members[j] {
                    let d = data
                        .row(a)
                        .iter()
                        .zip(data.row(b))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt();
                    d_min = d_min.min(d);
                }
            }
            let s = sigma(d_min, radius[i], radius[j]);
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::triangle_blobs;

    fn state_for(labels: Vec<usize>, d: usize) -> ClusterState {
        let k = labels.iter().max().unwrap() + 1;
        ClusterState {
            centroids: vec![vec![0.0; d]; k],
            old_centroids: vec![vec![0.0; d]; k],
            assignments: labels,
            hi: vec![vec![0.0; d]; k],
            intra: vec![0.0; k],
            old_intra: vec![0.0; k],
            inter: vec![0.0; k],
            old_inter: vec![0.0; k],
        }
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(1.0, 0.0, 0.0), 1.0);
        assert_eq!(sigma(0.0, 0.3, 0.1), -0.3);
        assert_eq!(sigma(1.0, 0.2, 0.5), 0.5);
    }

    #[test]
    fn identical_members_merge() {
        let p = vec![vec![0.2], vec![0.4], vec![0.2], vec![0.4]];
        let mut s = state_for(vec![0, 0, 1, 1], 1);
        assert_eq!(merge_pass(&mut s, &p, 0.001).unwrap(), 1);
        assert_eq!(s.k_live(), 1);
        assert!((s.centroids[0][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn distant_singletons_stay() {
        let p = vec![vec![0.0], vec![1.0]];
        let mut s = state_for(vec![0, 1], 1);
        assert_eq!(merge_pass(&mut s, &p, 0.001).unwrap(), 0);
        assert_eq!(s.k_live(), 2);
    }

    #[test]
    fn smaller_folds_into_larger() {
        // Cluster 0 = {0.5}, cluster 1 = {0.0, 0.4, 0.6}: D_min = 0.1, R_1 > 0.1.
        let p = vec![vec![0.5], vec![0.0], vec![0.4], vec![0.6]];
        let mut s = state_for(vec![0, 1, 1, 1], 1);
        s.old_centroids = vec![vec![0.9], vec![0.1]];
        merge_pass(&mut s, &p, 0.001).unwrap();
        assert_eq!(s.old_centroids, vec![vec![0.1]]);
    }

    #[test]
    fn separated_blobs_are_a_fixed_point() {
        let b = triangle_blobs(150, 0.1, 6.0, 7);
        let pts: Vec<Vec<f64>> = b.points.outer_iter().map(|r| r.to_vec()).collect();
        let mut s = state_for(b.labels.clone(), 2);
        assert_eq!(merge_pass(&mut s, &pts, 0.001).unwrap(), 0);
        assert_eq!(s.k_live(), 3);
        let m = sigma_matrix(b.points.view(), &s.assignments);
        assert!(m.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn split_blob_is_rejoined() {
        let b = triangle_blobs(150, 0.1, 6.0, 8);
        let pts: Vec<Vec<f64>> = b.points.outer_iter().map(|r| r.to_vec()).collect();
        // Halve the first blob along x.
        let labels: Vec<usize> = b
            .labels
            .iter()
            .zip(&pts)
            .map(|(&l, p)| if l == 0 && p[0] > 0.0 { 3 } else { l })
            .collect();
        let mut s = state_for(labels, 2);
        merge_pass(&mut s, &pts, 0.001).unwrap();
        assert_eq!(s.k_live(), 3);
        let m = sigma_matrix(b.points.view(), &s.assignments);
        assert!(m.iter().all(|&v| v > 0.0));
    }
}
