//! Cluster state and the per-cluster operators of one evolutionary cycle.

use rand::Rng;

use crate::elbow::{nearest, sq_dist};
use crate::stats;
use crate::{Error, Result};

pub(crate) type Points = [Vec<f64>];

/// Working state of one run, in normalized space.
///
/// Cluster ids are always contiguous `0..k`; removing a cluster compacts
/// every per-cluster vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub centroids: Vec<Vec<f64>>,
    pub old_centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Historical-information vectors of the last mutation.
    pub hi: Vec<Vec<f64>>,
    pub intra: Vec<f64>,
    pub old_intra: Vec<f64>,
    pub inter: Vec<f64>,
    pub old_inter: Vec<f64>,
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn groups(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut g = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        g[l].push(i);
    }
    g
}

pub(crate) fn mean_of(pts: &Points, idx: &[usize]) -> Vec<f64> {
    let d = pts.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for &i in idx {
        for (acc, v) in m.iter_mut().zip(&pts[i]) {
            *acc += v;
        }
    }
    for v in &mut m {
        *v /= idx.len() as f64;
    }
    m
}

/// Mean pairwise member distance; 0 below two members.
pub(crate) fn intra_of(pts: &Points, idx: &[usize]) -> f64 {
    let n = idx.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            sum += dist(&pts[i], &pts[j]);
        }
    }
    2.0 * sum / (n * (n - 1)) as f64
}

/// For every non-empty group, the smallest inter-cluster distance to any
/// other non-empty group. Empty groups, and a lone non-empty group, get 0.
pub(crate) fn min_inter(pts: &Points, groups: &[Vec<usize>]) -> Vec<f64> {
    let k = groups.len();
    let means: Vec<Option<Vec<f64>>> = groups
        .iter()
        .map(|g| (!g.is_empty()).then(|| mean_of(pts, g)))
        .collect();
    let mut out = vec![f64::INFINITY; k];
    for a in 0..k {
        for b in a + 1..k {
            let (Some(va), Some(vb)) = (&means[a], &means[b]) else {
                continue;
            };
            let to_b: f64 = groups[a].iter().map(|&i| dist(&pts[i], vb)).sum();
            let to_a: f64 = groups[b].iter().map(|&i| dist(&pts[i], va)).sum();
            let v = (to_a + to_b) / (groups[a].len() + groups[b].len()) as f64;
            out[a] = out[a].min(v);
            out[b] = out[b].min(v);
        }
    }
    for v in &mut out {
        if v.is_infinite() {
            *v = 0.0;
        }
    }
    out
}

/// Renumbers labels so that used ids become `0..k'` in ascending order of
/// the old id. Returns the kept old ids.
pub(crate) fn compact(labels: &mut [usize], k: usize) -> Vec<usize> {
    let mut used = vec![false; k];
    for &l in labels.iter() {
        used[l] = true;
    }
    let keep: Vec<usize> = (0..k).filter(|&c| used[c]).collect();
    let mut map = vec![usize::MAX; k];
    for (new, &old) in keep.iter().enumerate() {
        map[old] = new;
    }
    for l in labels.iter_mut() {
        *l = map[*l];
    }
    keep
}

pub(crate) fn sse_of(pts: &Points, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    pts.iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum()
}

impl ClusterState {
    pub fn k_live(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k_live()];
        for &l in &self.assignments {
            s[l] += 1;
        }
        s
    }

    pub(crate) fn sse(&self, pts: &Points) -> f64 {
        sse_of(pts, &self.assignments, &self.centroids)
    }

    pub(crate) fn retain(&mut self, keep: &[usize]) {
        let pick = |v: &Vec<Vec<f64>>| keep.iter().map(|&c| v[c].clone()).collect::<Vec<_>>();
        let pick_f = |v: &Vec<f64>| keep.iter().map(|&c| v[c]).collect::<Vec<_>>();
        self.centroids = pick(&self.centroids);
        self.old_centroids = pick(&self.old_centroids);
        self.hi = pick(&self.hi);
        self.intra = pick_f(&self.intra);
        self.old_intra = pick_f(&self.old_intra);
        self.inter = pick_f(&self.inter);
        self.old_inter = pick_f(&self.old_inter);
    }

    pub(crate) fn set_member_means(&mut self, pts: &Points) {
        let g = groups(&self.assignments, self.k_live());
        self.centroids = g.iter().map(|idx| mean_of(pts, idx)).collect();
    }

    /// Recomputes intra/inter for the current partition, and old_intra /
    /// old_inter for the partition induced by the nearest old centroid.
    /// Old clusters that attract no rows get `old_intra = ∞`, `old_inter = 0`.
    pub fn refresh_caches(&mut self, pts: &Points) {
        let k = self.k_live();
        let g = groups(&self.assignments, k);
        self.intra = g.iter().map(|idx| intra_of(pts, idx)).collect();
        self.inter = min_inter(pts, &g);

        let old_labels: Vec<usize> = pts.iter().map(|p| nearest(p, &self.old_centroids)).collect();
        let og = groups(&old_labels, k);
        self.old_intra = og
            .iter()
            .map(|idx| if idx.is_empty() { f64::INFINITY } else { intra_of(pts, idx) })
            .collect();
        self.old_inter = min_inter(pts, &og);
    }

    /// Drops empty clusters and clusters smaller than `⌈density·N⌉`, moving
    /// their rows to the nearest surviving centroid. Returns the new count.
    pub fn recount(&mut self, pts: &Points, density: f64) -> Result<usize> {
        let threshold = (density * pts.len() as f64).ceil() as usize;
        let sizes = self.sizes();
        let keep: Vec<usize> = (0..self.k_live())
            .filter(|&c| sizes[c] > 0 && sizes[c] >= threshold)
            .collect();
        if keep.is_empty() {
            return Err(Error::DegeneratePartition(format!(
                "every cluster is below the density threshold of {threshold} rows"
            )));
        }
        if keep.len() == self.k_live() {
            return Ok(keep.len());
        }
        let mut map = vec![usize::MAX; self.k_live()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        self.retain(&keep);
        for (i, l) in self.assignments.iter_mut().enumerate() {
            *l = match map[*l] {
                usize::MAX => nearest(&pts[i], &self.centroids),
                new => new,
            };
        }
        Ok(keep.len())
    }
}

/// Builds the starting state: row `i` joins cluster `⌊P_i·k/100⌋` (capped at
/// `k−1`) where `P_i` is its mean percentile rank; bins that receive no row
/// are dropped. Centroids are per-dimension interquartile means of the
/// members and old centroids are drawn uniformly from `[Q1, Q3]`.
pub fn initialize<R: Rng + ?Sized>(
    pts: &Points,
    row_percentiles: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<ClusterState> {
    let n = pts.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("initial k must lie in [1, {n}], got {k}")));
    }
    if row_percentiles.len() != n {
        return Err(Error::Structural(format!(
            "{} percentile ranks for {n} rows",
            row_percentiles.len()
        )));
    }
    let mut assignments: Vec<usize> = row_percentiles
        .iter()
        .map(|p| ((p * k as f64 / 100.0).floor().max(0.0) as usize).min(k - 1))
        .collect();
    let k = compact(&mut assignments, k).len();
    let d = pts[0].len();

    let mut centroids = Vec::with_capacity(k);
    let mut old_centroids = Vec::with_capacity(k);
    for idx in groups(&assignments, k) {
        let mut c = Vec::with_capacity(d);
        let mut o = Vec::with_capacity(d);
        for j in 0..d {
            let vals: Vec<f64> = idx.iter().map(|&i| pts[i][j]).collect();
            c.push(stats::interquartile_mean(&vals));
            let (q1, q3) = stats::quartiles(&vals);
            o.push(q1 + rng.random::<f64>() * (q3 - q1));
        }
        centroids.push(c);
        old_centroids.push(o);
    }
    let mut state = ClusterState {
        centroids,
        old_centroids,
        assignments,
        hi: vec![vec![0.0; d]; k],
        intra: Vec::new(),
        old_intra: Vec::new(),
        inter: Vec::new(),
        old_inter: Vec::new(),
    };
    state.refresh_caches(pts);
    Ok(state)
}

/// Keeps `C_i` where its intra-cluster distance is strictly lower than the
/// old one, otherwise `oldC_i`.
pub fn centroid_update(
    centroids: &[Vec<f64>],
    old_centroids: &[Vec<f64>],
    intra: &[f64],
    old_intra: &[f64],
) -> Vec<Vec<f64>> {
    (0..centroids.len())
        .map(|i| {
            if intra[i] < old_intra[i] {
                centroids[i].clone()
            } else {
                old_centroids[i].clone()
            }
        })
        .collect()
}

/// Returns `(HI_i, Mutant_i)`. `HI_i` points from the current centroid to
/// the old one when the current centroid is tighter, and away from it
/// otherwise; the mutant moves along `step ⊙ HI_i` and is clamped to [0, 1].
pub fn mutate(c: &[f64], old_c: &[f64], intra: f64, old_intra: f64, step: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hi: Vec<f64> = if intra < old_intra {
        old_c.iter().zip(c).map(|(o, v)| o - v).collect()
    } else {
        c.iter().zip(old_c).map(|(v, o)| v - o).collect()
    };
    let mutant = c
        .iter()
        .zip(&hi)
        .zip(step)
        .map(|((v, h), s)| {
            let m = v + s * h;
            if m.is_nan() {
                *v
            } else {
                m.clamp(0.0, 1.0)
            }
        })
        .collect();
    (hi, mutant)
}

/// Per coordinate, takes `c` or `old_c` with probability ½ each.
pub fn uniform_crossover<R: Rng + ?Sized>(old_c: &[f64], c: &[f64], rng: &mut R) -> Vec<f64> {
    old_c
        .iter()
        .zip(c)
        .map(|(&o, &v)| if rng.random::<bool>() { v } else { o })
        .collect()
}

/// `MO_i` is the mutant where the old separation exceeds the current one,
/// else the crossover child.
pub fn mutover_select(
    mutants: &[Vec<f64>],
    children: &[Vec<f64>],
    inter: &[f64],
    old_inter: &[f64],
) -> Vec<Vec<f64>> {
    (0..mutants.len())
        .map(|i| {
            if old_inter[i] > inter[i] {
                mutants[i].clone()
            } else {
                children[i].clone()
            }
        })
        .collect()
}
