//! Multi-run benchmarking, algorithm ranking and report output.

pub mod alloc;
mod rank;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rank::{color_band, competition_ranks, rank_algorithms, winner, ColorBand, Metric, RankTable, Winner};
pub use report::{emit_heatmap, emit_report, heatmap_svg, BandRow, BenchmarkReport, DatasetRanking};

use crate::dataset_io::{index_labels, DataMatrix, GroundTruth};
use crate::elbow::member_means;
use crate::engine::{self, EngineConfig, Mode, Prepared, RunResult};
use crate::metrics::{validate, ValidationReport};
use crate::rng::run_seed;
use crate::{Error, Result};

/// One trial of one algorithm on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub run: usize,
    pub seed: Option<u64>,
    /// Wall time on a monotonic clock; absent for externally produced labels.
    pub time_ms: Option<f64>,
    pub peak_bytes: Option<u64>,
    pub k: usize,
    pub metrics: Option<ValidationReport>,
    pub error: Option<String>,
}

/// Means over the records that produced metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRecord {
    pub runs_ok: usize,
    pub time_ms: Option<f64>,
    pub peak_bytes: Option<f64>,
    pub k: Option<f64>,
    pub accuracy: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub nmse: Option<f64>,
    pub dbi: Option<f64>,
}

impl MeanRecord {
    pub fn of(records: &[BenchmarkRecord]) -> Self {
        fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
            let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            (n > 0).then(|| s / n as f64)
        }
        let ok: Vec<&ValidationReport> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let metric = |m: Metric| mean(ok.iter().map(|r| m.of(r)));
        Self {
            runs_ok: ok.len(),
            time_ms: mean(records.iter().filter_map(|r| r.time_ms)),
            peak_bytes: mean(records.iter().filter_map(|r| r.peak_bytes.map(|b| b as f64))),
            k: mean(records.iter().filter(|r| r.error.is_none()).map(|r| r.k as f64)),
            accuracy: metric(Metric::Accuracy),
            nmi: metric(Metric::Nmi),
            ari: metric(Metric::Ari),
            nmse: metric(Metric::Nmse),
            dbi: metric(Metric::Dbi),
        }
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Nmi => self.nmi,
            Metric::Ari => self.ari,
            Metric::Nmse => self.nmse,
            Metric::Dbi => self.dbi,
        }
    }
}

/// Every run of one algorithm on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub dataset: String,
    pub algorithm: String,
    pub runs: Vec<BenchmarkRecord>,
    pub mean: MeanRecord,
}

/// A record together with the run's full output, when it succeeded.
#[derive(Debug, Clone)]
pub struct Trial {
    pub record: BenchmarkRecord,
    pub result: Option<RunResult>,
}

pub fn algorithm_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Ieca => "iECA*",
        Mode::Eca => "ECA*",
    }
}

/// Scores a labelling in the normalized space of `prepared`, using member
/// means as centroids. `labels[i]` belongs to prepared row `i`.
pub fn score<S: AsRef<str>>(prepared: &Prepared, labels: &[usize], truth: &[S]) -> Result<ValidationReport> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let centroids = member_means(prepared.data.view(), labels, k);
    if centroids.iter().any(|v| v.is_nan()) {
        return Err(Error::Structural("label ids must be contiguous".into()));
    }
    let truth: Vec<&str> = truth.iter().map(AsRef::as_ref).collect();
    validate(prepared.data.view(), labels, &truth, centroids.view())
}

/// Runs the engine `runs` times with seeds `seed ⊕ r`, in parallel on the
/// current rayon pool. A failing run is recorded and the batch continues.
/// Results are returned in run order and do not depend on the pool size.
pub fn run_trials(m: &DataMatrix, truth: Option<&GroundTruth>, cfg: &EngineConfig, runs: usize) -> Result<Vec<Trial>> {
    cfg.validate()?;
    if runs == 0 {
        return Err(Error::Parameter("runs must be at least 1".into()));
    }
    if let Some(t) = truth {
        if t.len() != m.n_rows() {
            return Err(Error::Structural(format!(
                "{} truth labels for {} rows",
                t.len(),
                m.n_rows()
            )));
        }
    }
    let prepared = engine::prepare(m, cfg)?;
    Ok((0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = run_seed(cfg.seed, r);
            let run_cfg = EngineConfig { seed, ..cfg.clone() };
            let start = Instant::now();
            let (out, peak) = alloc::measure(|| engine::run(m, &run_cfg));
            let time_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut record = BenchmarkRecord {
                run: r,
                seed: Some(seed),
                time_ms: Some(time_ms),
                peak_bytes: Some(peak),
                k: 0,
                metrics: None,
                error: None,
            };
            match out {
                Ok(res) => {
                    record.k = res.k();
                    if let Some(t) = truth {
                        let kept: Vec<&str> = res.rows.iter().map(|&i| t.labels[i].as_str()).collect();
                        match score(&prepared, &res.labels, &kept) {
                            Ok(rep) => record.metrics = Some(rep),
                            Err(e) => record.error = Some(e.to_string()),
                        }
                    }
                    Trial {
                        record,
                        result: Some(res),
                    }
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    Trial { record, result: None }
                }
            }
        })
        .collect())
}

/// Scores externally produced labels (one labelling, run 0).
pub fn score_external(
    prepared: &Prepared,
    dataset: &str,
    algorithm: &str,
    labels: &[String],
    truth: &GroundTruth,
) -> Result<AlgorithmResult> {
    if labels.len() != prepared.rows.len() {
        return Err(Error::Structural(format!(
            "{algorithm}: {} labels for {} rows",
            labels.len(),
            prepared.rows.len()
        )));
    }
    let ids = index_labels(labels);
    let kept: Vec<&str> = prepared.rows.iter().map(|&i| truth.labels[i].as_str()).collect();
    let mut record = BenchmarkRecord {
        run: 0,
        seed: None,
        time_ms: None,
        peak_bytes: None,
        k: ids.iter().max().map_or(0, |m| m + 1),
        metrics: None,
        error: None,
    };
    match score(prepared, &ids, &kept) {
        Ok(r) => record.metrics = Some(r),
        Err(e) => record.error = Some(e.to_string()),
    }
    let runs = vec![record];
    Ok(AlgorithmResult {
        dataset: dataset.to_string(),
        algorithm: algorithm.to_string(),
        mean: MeanRecord::of(&runs),
        runs,
    })
}

pub fn summarize_trials(dataset: &str, algorithm: &str, trials: &[Trial]) -> AlgorithmResult {
    let runs: Vec<BenchmarkRecord> = trials.iter().map(|t| t.record.clone()).collect();
    AlgorithmResult {
        dataset: dataset.to_string(),
        algorithm: algorithm.to_string(),
        mean: MeanRecord::of(&runs),
        runs,
    }
}

/// Ranks the algorithms of one dataset on their mean metrics.
pub fn rank_results(results: &[AlgorithmResult]) -> Result<RankTable> {
    let algorithms: Vec<String> = results.iter().map(|r| r.algorithm.clone()).collect();
    let scores: Vec<Vec<Option<f64>>> = Metric::ALL
        .iter()
        .map(|&m| results.iter().map(|r| r.mean.metric(m)).collect())
        .collect();
    rank_algorithms(&algorithms, &Metric::ALL, &scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::triangle_blobs;

    #[test]
    fn single_run_mean_equals_record() {
        let b = triangle_blobs(90, 0.1, 6.0, 1);
        let cfg = EngineConfig::default();
        let trials = run_trials(&b.to_matrix(), Some(&b.truth()), &cfg, 1).unwrap();
        assert_eq!(trials.len(), 1);
        let res = summarize_trials("tri", "iECA*", &trials);
        let rep = res.runs[0].metrics.as_ref().unwrap();
        assert_eq!(res.mean.accuracy, Some(rep.accuracy));
        assert_eq!(res.mean.dbi, Some(rep.dbi));
        assert_eq!(res.mean.runs_ok, 1);
    }

    #[test]
    fn labels_do_not_depend_on_pool_size() {
        let b = triangle_blobs(120, 0.1, 6.0, 2);
        let m = b.to_matrix();
        let cfg = EngineConfig { seed: 5, ..Default::default() };
        let go = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&m, None, &cfg, 4).unwrap())
        };
        let a: Vec<_> = go(1).into_iter().map(|t| t.result.unwrap()).collect();
        let b: Vec<_> = go(4).into_iter().map(|t| t.result.unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn external_labels_are_scored() {
        let b = triangle_blobs(60, 0.1, 6.0, 3);
        let m = b.to_matrix();
        let p = engine::prepare(&m, &EngineConfig::default()).unwrap();
        let truth = b.truth();
        let r = score_external(&p, "tri", "oracle", &truth.labels, &truth).unwrap();
        assert_eq!(r.mean.ari, Some(1.0));
        let short = &truth.labels[..10];
        assert!(score_external(&p, "tri", "bad", short, &truth).is_err());
    }

    #[test]
    fn ranking_means() {
        let b = triangle_blobs(60, 0.1, 6.0, 4);
        let m = b.to_matrix();
        let p = engine::prepare(&m, &EngineConfig::default()).unwrap();
        let truth = b.truth();
        let good = score_external(&p, "tri", "good", &truth.labels, &truth).unwrap();
        let mut shuffled = truth.labels.clone();
        shuffled.rotate_left(7);
        let bad = score_external(&p, "tri", "bad", &shuffled, &truth).unwrap();
        let t = rank_results(&[bad, good]).unwrap();
        assert_eq!(t.averages, vec![Some(2.0), Some(1.0)]);
    }
}
