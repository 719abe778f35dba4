use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use ieca::bench::{
    self, color_band, emit_heatmap, emit_report, rank_algorithms, BenchmarkReport, DatasetRanking, Metric,
    RankTable,
};
use ieca::dataset_io::{load_csv, load_labels, DataMatrix, GroundTruth, LoadOptions};
use ieca::elbow::{default_k_max, scan_k};
use ieca::engine::{self, EngineConfig, KSelection, Mode};
use ieca::metrics::{validate as score_partition, ValidationReport};
use ieca::preprocess::CleaningPolicy;
use ieca::{Error, Result};
use ndarray::Array2;
use serde::Serialize;

use crate::provenance::{write_with_header, Provenance};
use crate::{BenchArgs, ClusterArgs, ElbowArgs, EngineArgs, InputArgs, RankArgs, ValidateArgs};

fn delimiter(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Parameter(format!("delimiter must be a single ASCII character, got '{c}'")))
}

fn load_options(delim: char, no_header: bool) -> Result<LoadOptions> {
    Ok(LoadOptions {
        delimiter: delimiter(delim)?,
        has_header: !no_header,
        comment: Some(b'#'),
        ..LoadOptions::default()
    })
}

fn load(a: &InputArgs) -> Result<(DataMatrix, Option<GroundTruth>)> {
    let m = load_csv(&a.input, &load_options(a.delimiter, a.no_header)?)?;
    match &a.target {
        Some(t) => {
            let (m, truth) = m.split_target(t)?;
            Ok((m, Some(truth)))
        }
        None => Ok((m, None)),
    }
}

fn engine_config(e: &EngineArgs) -> Result<EngineConfig> {
    let cfg = EngineConfig {
        mode: e.mode.parse::<Mode>()?,
        k: e.k.parse::<KSelection>()?,
        social_class_ranks: e.ranks,
        density: e.density,
        alpha: e.alpha,
        max_iterations: e.iters,
        seed: e.seed,
        levy_beta: e.beta,
        k_max: e.kmax,
        ..EngineConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn config_json(cfg: &EngineConfig) -> Result<String> {
    Ok(serde_json::to_string(cfg)?)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn cluster(a: ClusterArgs) -> Result<()> {
    let cfg = engine_config(&a.engine)?;
    let (m, _) = load(&a.input)?;
    let r = engine::run(&m, &cfg)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }

    let mut prov = Provenance::new("cluster");
    prov.input("input", &a.input.input)?;
    prov.set("seed", cfg.seed);
    prov.set("config", config_json(&cfg)?);
    if let Some(t) = &a.input.target {
        prov.set("target", t);
    }
    prov.set("k", r.k());

    write_with_header(&a.out, &prov, &r.labels_csv())?;
    let trace = a.trace.clone().unwrap_or_else(|| {
        a.out
            .parent()
            .map_or_else(|| PathBuf::from("trace.csv"), |d| d.join("trace.csv"))
    });
    write_with_header(&trace, &prov, &engine::trace_csv(&r.trace))?;
    if let Some(path) = &a.centroids {
        let names: Vec<&str> = m.schema.columns.iter().map(|c| c.name.as_str()).collect();
        let mut body = names.join(",") + "\n";
        for row in r.centroids.outer_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        write_with_header(path, &prov, &body)?;
    }
    if let Some(path) = &a.log {
        let p = engine::prepare(&m, &cfg)?;
        fs::write(path, p.log.to_json_lines()?).map_err(io_err(path))?;
    }
    println!(
        "k={} initial_k={} iterations={} labels={} trace={}",
        r.k(),
        r.k_initial,
        r.iterations_used,
        a.out.display(),
        trace.display()
    );
    Ok(())
}

pub fn elbow(a: ElbowArgs) -> Result<()> {
    let (m, _) = load(&a.input)?;
    let prepared = engine::prepare(&m, &EngineConfig::default())?;
    let n = prepared.data.nrows();
    let k_max = a.kmax.unwrap_or_else(|| default_k_max(n));
    let scan = scan_k(prepared.data.view(), k_max, a.restarts, a.seed)?;
    for (k, s) in scan.k_values.iter().zip(&scan.sse) {
        println!("k={k} sse={s}");
    }
    if scan.degenerate {
        eprintln!("warning: SSE curve too short or flat for an elbow");
    }
    println!("chosen_k={}", scan.chosen_k);
    if let Some(out) = &a.out {
        let mut prov = Provenance::new("elbow");
        prov.input("input", &a.input.input)?;
        prov.set("seed", a.seed);
        prov.set("kmax", k_max);
        prov.set("restarts", a.restarts);
        prov.set("chosen_k", scan.chosen_k);
        write_with_header(out, &prov, &scan.to_csv())?;
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let m = load_csv(path, &load_options(',', false)?)?;
    let d = m.n_cols();
    let mut out = Array2::zeros((m.n_rows(), d));
    for (i, row) in m.rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            out[[i, j]] = c
                .as_number()
                .ok_or_else(|| Error::Structural(format!("{}: non-numeric cell at row {i}", path.display())))?;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct ValidationOutput {
    #[serde(flatten)]
    report: ValidationReport,
    provenance: BTreeMap<String, String>,
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    let m = load_csv(&a.data, &load_options(a.delimiter, a.no_header)?)?;
    let m = match &a.target {
        Some(t) => m.split_target(t)?.0,
        None => m,
    };
    let pred = load_labels(&a.labels)?;
    let truth: HashMap<usize, String> = load_labels(&a.truth)?.into_iter().collect();
    let rows: Vec<usize> = pred.iter().map(|p| p.0).collect();
    let sub = m.select_rows(&rows)?;
    let truth: Vec<&str> = rows
        .iter()
        .map(|r| {
            truth
                .get(r)
                .map(String::as_str)
                .ok_or_else(|| Error::Structural(format!("no true label for row {r}")))
        })
        .collect::<Result<_>>()?;
    let cfg = EngineConfig {
        cleaning: CleaningPolicy {
            row_drop_threshold: 1.0,
            ..CleaningPolicy::default()
        },
        ..EngineConfig::default()
    };
    let prepared = engine::prepare(&sub, &cfg)?;
    let labels: Vec<String> = pred.into_iter().map(|p| p.1).collect();

    let report = match &a.centroids {
        Some(path) => {
            let ids = labels
                .iter()
                .map(|l| {
                    l.parse::<usize>()
                        .map_err(|_| Error::Structural(format!("label '{l}' is not a centroid index")))
                })
                .collect::<Result<Vec<_>>>()?;
            let raw = read_matrix(path)?;
            let c = prepared.params.apply(raw.view())?;
            if let Some(&bad) = ids.iter().find(|&&l| l >= c.nrows()) {
                return Err(Error::Structural(format!("label {bad} has no centroid row")));
            }
            score_partition(prepared.data.view(), &ids, &truth, c.view())?
        }
        None => bench::score(&prepared, &ieca::dataset_io::index_labels(&labels), &truth)?,
    };

    let mut prov = Provenance::new("validate");
    prov.input("labels", &a.labels)?;
    prov.input("truth", &a.truth)?;
    prov.input("data", &a.data)?;
    if let Some(c) = &a.centroids {
        prov.input("centroids", c)?;
    }
    let out = ValidationOutput {
        report,
        provenance: prov.into_map(),
    };
    let json = serde_json::to_string_pretty(&out)? + "\n";
    match &a.out {
        Some(path) => fs::write(path, json).map_err(io_err(path))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn ordered_truth(pairs: Vec<(usize, String)>, n: usize) -> Result<GroundTruth> {
    let mut labels = vec![None; n];
    for (r, l) in pairs {
        *labels
            .get_mut(r)
            .ok_or_else(|| Error::Structural(format!("truth row {r} out of range")))? = Some(l);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Structural(format!("no true label for row {i}"))))
        .collect::<Result<Vec<_>>>()
        .map(GroundTruth::new)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    if let Some(t) = a.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Parameter(format!("cannot size the thread pool: {e}")))?;
    }
    let mut cfg = engine_config(&a.engine)?;
    cfg.runs = a.runs;
    cfg.validate()?;
    let (m, target_truth) = load(&a.input)?;
    let truth = match (target_truth, &a.truth) {
        (Some(t), _) => Some(t),
        (None, Some(path)) => Some(ordered_truth(load_labels(path)?, m.n_rows())?),
        (None, None) => None,
    };
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.input
            .input
            .file_stem()
            .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
    });

    let mut prov = Provenance::new("bench");
    prov.input("input", &a.input.input)?;
    if let Some(t) = &a.truth {
        prov.input("truth", t)?;
    }
    prov.set("seed", cfg.seed);
    prov.set("runs", a.runs);
    prov.set("config", config_json(&cfg)?);
    prov.set("run_seeds", "seed xor run index");

    let mut configs = vec![cfg.clone()];
    if a.baseline {
        configs.push(EngineConfig {
            mode: if cfg.mode == Mode::Ieca { Mode::Eca } else { Mode::Ieca },
            ..cfg.clone()
        });
    }
    let mut results = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let name = bench::algorithm_name(c.mode);
        let trials = match bench::run_trials(&m, truth.as_ref(), c, a.runs) {
            Ok(t) => t,
            Err(e @ Error::UnsupportedInput(_)) if i > 0 => {
                eprintln!("warning: skipping {name}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(dir) = &a.labels_dir {
            for t in &trials {
                if let Some(r) = &t.result {
                    let mut p = prov.clone();
                    p.set("algorithm", name);
                    p.set("run", t.record.run);
                    p.set("run_seed", r.seed_used);
                    let path = dir.join(format!("{}_run{:02}.csv", slug(name), t.record.run));
                    write_with_header(&path, &p, &r.labels_csv())?;
                    let path = dir.join(format!("{}_run{:02}_trace.csv", slug(name), t.record.run));
                    write_with_header(&path, &p, &engine::trace_csv(&r.trace))?;
                }
            }
        }
        results.push(bench::summarize_trials(&dataset, name, &trials));
    }
    if !a.external.is_empty() {
        let truth = truth
            .as_ref()
            .ok_or_else(|| Error::Parameter("--external needs --target or --truth".into()))?;
        let prepared = engine::prepare(&m, &cfg)?;
        for spec in &a.external {
            let (name, path) = spec
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("--external expects NAME=PATH, got '{spec}'")))?;
            let path = Path::new(path);
            prov.input(&format!("external_{}", slug(name)), path)?;
            let by_row: HashMap<usize, String> = load_labels(path)?.into_iter().collect();
            let labels = prepared
                .rows
                .iter()
                .map(|r| {
                    by_row
                        .get(r)
                        .cloned()
                        .ok_or_else(|| Error::Structural(format!("{name}: no label for row {r}")))
                })
                .collect::<Result<Vec<_>>>()?;
            results.push(bench::score_external(&prepared, &dataset, name, &labels, truth)?);
        }
    }

    let mut report = BenchmarkReport {
        provenance: prov.into_map(),
        results,
        rankings: Vec::new(),
    };
    if report.results.len() >= 2 && truth.is_some() {
        let table = bench::rank_results(&report.results)?;
        report.rankings.push(DatasetRanking {
            dataset: dataset.clone(),
            table,
        });
    }
    emit_report(&a.out_dir, &report)?;
    if let Some(r) = report.rankings.first() {
        if let Some(avgs) = r.table.averages.iter().copied().collect::<Option<Vec<f64>>>() {
            emit_heatmap(
                &a.out_dir.join("heatmap.svg"),
                std::slice::from_ref(&dataset),
                &r.table.algorithms,
                &[avgs],
            )?;
        }
    }

    for r in &report.results {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{} {}: ok={}/{} time_ms={} peak_bytes={} accuracy={} nmi={} ari={} nmse={} dbi={}",
            r.dataset,
            r.algorithm,
            r.mean.runs_ok,
            r.runs.len(),
            fmt(r.mean.time_ms),
            r.mean.peak_bytes.map_or_else(|| "-".to_string(), |b| format!("{b:.0}")),
            fmt(r.mean.accuracy),
            fmt(r.mean.nmi),
            fmt(r.mean.ari),
            fmt(r.mean.nmse),
            fmt(r.mean.dbi),
        );
    }
    println!("report={}", a.out_dir.join("benchmark.json").display());
    Ok(())
}

struct Grid {
    metrics: Vec<String>,
    algorithms: Vec<String>,
    cells: Vec<Vec<String>>,
}

fn read_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let algorithms: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut metrics = Vec::new();
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or_default();
        if name.eq_ignore_ascii_case("average") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Structural(format!(
                "{}: row '{name}' has {} fields, header has {}",
                path.display(),
                rec.len(),
                header.len()
            )));
        }
        metrics.push(name.to_string());
        cells.push(rec.iter().skip(1).map(str::to_string).collect());
    }
    Ok(Grid {
        metrics,
        algorithms,
        cells,
    })
}

fn table_from_file(path: &Path, scores: bool) -> Result<RankTable> {
    let g = read_grid(path)?;
    let bad = |v: &str| Error::Structural(format!("{}: cannot parse '{v}'", path.display()));
    if scores {
        let metrics = g.metrics.iter().map(|m| Metric::parse(m)).collect::<Result<Vec<_>>>()?;
        let values = g
            .cells
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| if v.is_empty() { Ok(None) } else { v.parse().map(Some).map_err(|_| bad(v)) })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        rank_algorithms(&g.algorithms, &metrics, &values)
    } else {
        let ranks = g
            .cells
            .iter()
            .map(|row| row.iter().map(|v| v.parse().map_err(|_| bad(v))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        RankTable::from_ranks(g.metrics, g.algorithms, ranks)
    }
}

pub fn rank(a: RankArgs) -> Result<()> {
    let (files, scores) = if a.scores.is_empty() { (&a.ranks, false) } else { (&a.scores, true) };
    if files.is_empty() {
        return Err(Error::Parameter("give at least one --scores or --ranks table".into()));
    }
    let mut prov = Provenance::new("rank");
    let mut datasets = Vec::new();
    let mut tables = Vec::new();
    for (i, f) in files.iter().enumerate() {
        prov.input(&format!("table_{i}"), f)?;
        datasets.push(f.file_stem().map_or_else(|| format!("table{i}"), |s| s.to_string_lossy().into_owned()));
        tables.push(table_from_file(f, scores)?);
    }
    let algorithms = tables[0].algorithms.clone();
    if tables.iter().any(|t| t.algorithms != algorithms) {
        return Err(Error::Structural("all tables must list the same algorithms in the same order".into()));
    }

    let mut rows = datasets.clone();
    let mut grid: Vec<Vec<f64>> = Vec::new();
    for (d, t) in datasets.iter().zip(&tables) {
        grid.push(
            t.averages
                .iter()
                .map(|v| v.ok_or_else(|| Error::Domain(format!("{d}: an algorithm has no ranks"))))
                .collect::<Result<_>>()?,
        );
    }
    if tables.len() > 1 {
        let avg = (0..algorithms.len())
            .map(|j| grid.iter().map(|r| r[j]).sum::<f64>() / grid.len() as f64)
            .collect();
        grid.push(avg);
        rows.push("Average".into());
    }

    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    let mut ranks_csv = String::from("# ties: competition ranking (tied scores share the smaller rank)\n");
    for (d, t) in datasets.iter().zip(&tables) {
        ranks_csv.push_str(&format!("# dataset: {d}\n"));
        ranks_csv.push_str(&t.to_csv());
    }
    write_with_header(&a.out_dir.join("ranks.csv"), &prov, &ranks_csv)?;

    let mut bands = String::from("dataset,algorithm,average,band\n");
    for (name, row) in rows.iter().zip(&grid) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("{name}: {}", cells.join(" "));
        for (alg, &v) in algorithms.iter().zip(row) {
            bands.push_str(&format!("{name},{alg},{v:.3},{}\n", color_band(v)?));
        }
    }
    write_with_header(&a.out_dir.join("bands.csv"), &prov, &bands)?;
    emit_heatmap(&a.out_dir.join("heatmap.svg"), &rows, &algorithms, &grid)?;
    println!("heatmap={}", a.out_dir.join("heatmap.svg").display());
    Ok(())
}
