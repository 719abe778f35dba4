//! The evolutionary clustering loop.
//!
//! A run ranks rows by mean percentile, bins them into `k` starting
//! clusters and then cycles: density recount, centroid acceptance, Lévy
//! mutation along the historical direction, uniform crossover, mut-over
//! selection, and diversity merging. Two modes share the loop: [`Mode::Ieca`]
//! cleans, encodes and picks `k` with the elbow scan; [`Mode::Eca`] is the
//! numeric-only baseline starting from `k = S` social class ranks.

mod levy;
mod merge;
mod state;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use levy::{levy_step, mantegna_sigma};
pub use merge::{merge_pass, sigma, sigma_matrix};
pub use state::{centroid_update, initialize, mutate, mutover_select, uniform_crossover, ClusterState};

use crate::dataset_io::{AttributeKind, DataMatrix};
use crate::elbow::{self, ElbowScan};
use crate::preprocess::{self, CleaningLog, CleaningPolicy, EncodingMap, NormalizationParams};
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::{Error, Result};
use state::{compact, groups, intra_of, mean_of, min_inter, sse_of, Points};

/// Convergence tolerance on the fitness deltas between cycles.
pub const STALL_TOL: f64 = 1e-9;

const ELBOW_STREAM: u64 = 1;
const ENGINE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ieca,
    Eca,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ieca => "ieca",
            Mode::Eca => "eca",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ieca" | "ieca*" => Ok(Mode::Ieca),
            "eca" | "eca*" => Ok(Mode::Eca),
            other => Err(Error::Parameter(format!("unknown mode '{other}' (expected ieca or eca)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KSelection {
    Auto,
    Fixed(usize),
}

impl fmt::Display for KSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSelection::Auto => f.write_str("auto"),
            KSelection::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KSelection::Auto);
        }
        s.parse()
            .map(KSelection::Fixed)
            .map_err(|_| Error::Parameter(format!("k must be 'auto' or a positive integer, got '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crossover {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub k: KSelection,
    /// Starting cluster count of the baseline mode.
    pub social_class_ranks: usize,
    /// Clusters smaller than `⌈density·N⌉` rows are dissolved.
    pub density: f64,
    pub alpha: f64,
    pub crossover: Crossover,
    pub max_iterations: usize,
    pub runs: usize,
    pub seed: u64,
    pub levy_beta: f64,
    /// Upper end of the elbow scan; `None` means `min(10, ⌈√N⌉)`.
    pub k_max: Option<usize>,
    pub elbow_restarts: usize,
    pub cleaning: CleaningPolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Ieca,
            k: KSelection::Auto,
            social_class_ranks: 2,
            density: 0.001,
            alpha: 0.001,
            crossover: Crossover::Uniform,
            max_iterations: 50,
            runs: 30,
            seed: 0,
            levy_beta: 1.5,
            k_max: None,
            elbow_restarts: elbow::DEFAULT_RESTARTS,
            cleaning: CleaningPolicy::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.density > 0.0 && self.density < 1.0) {
            return bad(format!("density must lie in (0, 1), got {}", self.density));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.mode == Mode::Eca && self.social_class_ranks < 2 {
            return bad(format!(
                "social class ranks must be at least 2, got {}",
                self.social_class_ranks
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be finite and non-negative, got {}", self.alpha));
        }
        if !(self.levy_beta > 0.0 && self.levy_beta <= 2.0) {
            return bad(format!("levy beta must lie in (0, 2], got {}", self.levy_beta));
        }
        if self.k == KSelection::Fixed(0) {
            return bad("k must be positive".into());
        }
        if let Some(m) = self.k_max {
            if m < 2 {
                return bad(format!("k_max must be at least 2, got {m}"));
            }
        }
        self.cleaning.validate()
    }
}

/// One row of the fitness trace, recorded at the end of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub sum_intra: f64,
    pub min_inter: f64,
    pub k_live: usize,
    pub sse: f64,
}

pub type FitnessTrace = Vec<TraceEntry>;

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("iter,sum_intra,min_inter,k_live,sse\n");
    for t in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            t.iteration, t.sum_intra, t.min_inter, t.k_live, t.sse
        ));
    }
    out
}

/// Halts at the iteration budget or once both fitness terms stop moving.
pub fn check_termination(trace: &[TraceEntry], max_iterations: usize) -> bool {
    if trace.len() >= max_iterations {
        return true;
    }
    match trace {
        [.., a, b] => {
            (a.sum_intra - b.sum_intra).abs() < STALL_TOL && (a.min_inter - b.min_inter).abs() < STALL_TOL
        }
        _ => false,
    }
}

/// Normalized input to the loop plus everything needed to map back.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Array2<f64>,
    pub params: NormalizationParams,
    pub encoding: EncodingMap,
    pub log: CleaningLog,
    /// Original row index of every prepared row.
    pub rows: Vec<usize>,
}

/// Cleaning (iECA* only), categorical encoding and min-max normalization.
pub fn prepare(m: &DataMatrix, cfg: &EngineConfig) -> Result<Prepared> {
    let (cleaned, log) = match cfg.mode {
        Mode::Ieca => preprocess::clean(m, &cfg.cleaning)?,
        Mode::Eca => {
            if m.schema.count_kind(AttributeKind::Categorical) > 0 {
                return Err(Error::UnsupportedInput(
                    "the ECA* baseline handles numeric attributes only; use iECA* mode for categorical data"
                        .into(),
                ));
            }
            if m.has_missing() {
                return Err(Error::UnsupportedInput(
                    "the ECA* baseline does not impute missing values; use iECA* mode".into(),
                ));
            }
            let log = CleaningLog {
                events: Vec::new(),
                kept_rows: (0..m.n_rows()).collect(),
            };
            (m.clone(), log)
        }
    };
    let (encoded, encoding) = preprocess::encode_categorical(&cleaned)?;
    let (data, params) = preprocess::normalize(encoded.view())?;
    let rows = log.kept_rows.clone();
    Ok(Prepared {
        data,
        params,
        encoding,
        log,
        rows,
    })
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Original row indices covered by `labels` (rows dropped by cleaning
    /// are absent).
    pub rows: Vec<usize>,
    /// Cluster of every kept row; 0 is the largest cluster.
    pub labels: Vec<usize>,
    /// Centroids in the original attribute units.
    pub centroids: Array2<f64>,
    pub normalized_centroids: Array2<f64>,
    pub trace: FitnessTrace,
    pub iterations_used: usize,
    pub seed_used: u64,
    pub k_initial: usize,
    pub elbow: Option<ElbowScan>,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn k(&self) -> usize {
        self.normalized_centroids.nrows()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// `row,label` lines keyed by original row index.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("row,label\n");
        for (r, l) in self.rows.iter().zip(&self.labels) {
            out.push_str(&format!("{r},{l}\n"));
        }
        out
    }
}

/// Runs the configured mode end to end on a raw matrix.
pub fn run(m: &DataMatrix, cfg: &EngineConfig) -> Result<RunResult> {
    cfg.validate()?;
    let prepared = prepare(m, cfg)?;
    run_prepared(&prepared, cfg)
}

/// The baseline mode regardless of `cfg.mode`.
pub fn run_baseline_eca(m: &DataMatrix, cfg: &EngineConfig) -> Result<RunResult> {
    let cfg = EngineConfig {
        mode: Mode::Eca,
        ..cfg.clone()
    };
    run(m, &cfg)
}

/// Runs the loop on already prepared data.
pub fn run_prepared(p: &Prepared, cfg: &EngineConfig) -> Result<RunResult> {
    cfg.validate()?;
    let x = p.data.view();
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Structural("no rows left to cluster".into()));
    }
    let pts: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let mut warnings = Vec::new();

    let identical = pts.iter().all(|r| r == &pts[0]);
    if n == 1 || identical {
        warnings.push(format!(
            "{} identical row(s); returning a single cluster",
            n
        ));
        return finish(p, &pts, vec![0; n], 1, Vec::new(), 0, cfg.seed, None, warnings);
    }

    let mut scan = None;
    let k = match (cfg.mode, cfg.k) {
        (Mode::Eca, _) => cfg.social_class_ranks,
        (Mode::Ieca, KSelection::Fixed(k)) => k,
        (Mode::Ieca, KSelection::Auto) => {
            let k_max = cfg.k_max.unwrap_or_else(|| elbow::default_k_max(n)).min(n);
            let s = elbow::scan_k(x, k_max, cfg.elbow_restarts, derive_seed(cfg.seed, &[ELBOW_STREAM]))?;
            if s.degenerate {
                warnings.push("SSE curve too short or flat for an elbow; using k = 2".into());
            }
            let k = s.chosen_k;
            scan = Some(s);
            k
        }
    };
    if k > n {
        return Err(Error::Parameter(format!("k = {k} exceeds the {n} available rows")));
    }

    let ptable = preprocess::percentile_ranks(x);
    let mut rng = seeded(derive_seed(cfg.seed, &[ENGINE_STREAM]));
    let mut st = initialize(&pts, &ptable.row_means, k, &mut rng)?;
    let k_initial = k;

    let mut trace = Vec::new();
    while !check_termination(&trace, cfg.max_iterations) {
        match cycle(&mut st, &pts, cfg, &mut rng) {
            Ok(()) => {}
            Err(Error::DegeneratePartition(msg)) => {
                warnings.push(format!("{msg}; falling back to a single cluster"));
                st.assignments = vec![0; n];
                st.retain(&[0]);
                st.set_member_means(&pts);
            }
            Err(e) => return Err(e),
        }
        trace.push(entry(&st, &pts, trace.len() + 1));
    }
    let iterations = trace.len();
    let labels = std::mem::take(&mut st.assignments);
    let k = st.k_live();
    finish(p, &pts, labels, k, trace, iterations, cfg.seed, scan, warnings).map(|mut r| {
        r.k_initial = k_initial;
        r
    })
}

fn entry(st: &ClusterState, pts: &Points, iteration: usize) -> TraceEntry {
    let g = groups(&st.assignments, st.k_live());
    let sum_intra = g.iter().map(|idx| intra_of(pts, idx)).sum();
    let min_inter = if g.len() < 2 {
        0.0
    } else {
        min_inter(pts, &g).into_iter().fold(f64::INFINITY, f64::min)
    };
    TraceEntry {
        iteration,
        sum_intra,
        min_inter,
        k_live: st.k_live(),
        sse: st.sse(pts),
    }
}

/// One evolutionary cycle. A candidate partition that raises the SSE is
/// discarded, so the SSE never grows between cycles that keep `k`.
fn cycle(st: &mut ClusterState, pts: &Points, cfg: &EngineConfig, rng: &mut SeededRng) -> Result<()> {
    st.recount(pts, cfg.density)?;
    st.refresh_caches(pts);
    let k = st.k_live();
    let d = pts[0].len();

    let accepted = centroid_update(&st.centroids, &st.old_centroids, &st.intra, &st.old_intra);
    let mut mutants = Vec::with_capacity(k);
    let mut children = Vec::with_capacity(k);
    for i in 0..k {
        let step = levy_step(cfg.alpha, cfg.levy_beta, d, rng)?;
        let (hi, mutant) = mutate(&st.centroids[i], &st.old_centroids[i], st.intra[i], st.old_intra[i], &step);
        st.hi[i] = hi;
        mutants.push(mutant);
        children.push(match cfg.crossover {
            Crossover::Uniform => uniform_crossover(&st.old_centroids[i], &st.centroids[i], rng),
        });
    }
    let mo = mutover_select(&mutants, &children, &st.inter, &st.old_inter);

    let mut labels: Vec<usize> = pts.iter().map(|p| elbow::nearest(p, &mo)).collect();
    let keep = compact(&mut labels, k);
    let centres: Vec<Vec<f64>> = groups(&labels, keep.len()).iter().map(|g| mean_of(pts, g)).collect();
    if sse_of(pts, &labels, &centres) <= st.sse(pts) {
        st.old_centroids = accepted;
        st.retain(&keep);
        st.assignments = labels;
        st.centroids = centres;
    } else {
        st.old_centroids = accepted;
    }
    merge_pass(st, pts, cfg.density)?;
    Ok(())
}

/// Relabels clusters by size (descending, then first row) and maps the
/// centroids back to attribute units.
#[allow(clippy::too_many_arguments)]
fn finish(
    p: &Prepared,
    pts: &Points,
    labels: Vec<usize>,
    k: usize,
    trace: FitnessTrace,
    iterations_used: usize,
    seed: u64,
    elbow: Option<ElbowScan>,
    warnings: Vec<String>,
) -> Result<RunResult> {
    let g = groups(&labels, k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(g[c].len()), g[c][0]));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let labels: Vec<usize> = labels.iter().map(|&l| rank[l]).collect();
    let d = pts[0].len();
    let mut normalized = Array2::zeros((k, d));
    for (new, &old) in order.iter().enumerate() {
        let m = mean_of(pts, &g[old]);
        normalized.row_mut(new).assign(&ndarray::Array1::from(m));
    }
    let centroids = preprocess::denormalize(normalized.view(), &p.params)?;
    Ok(RunResult {
        rows: p.rows.clone(),
        labels,
        centroids,
        normalized_centroids: normalized,
        trace,
        iterations_used,
        seed_used: seed,
        k_initial: k,
        elbow,
        warnings,
    })
}

/// SSE of a result in normalized space, recomputed from labels and centroids.
pub fn result_sse(data: ArrayView2<f64>, r: &RunResult) -> Result<f64> {
    elbow::compute_sse(data, &r.labels, r.normalized_centroids.view())
}
