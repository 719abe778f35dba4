use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::rank::{color_band, ColorBand, RankTable};
use super::AlgorithmResult;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRanking {
    pub dataset: String,
    pub table: RankTable,
}

/// Everything written to `benchmark.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub provenance: BTreeMap<String, String>,
    pub results: Vec<AlgorithmResult>,
    pub rankings: Vec<DatasetRanking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub dataset: String,
    pub algorithm: String,
    pub average: f64,
    pub band: ColorBand,
}

impl BenchmarkReport {
    pub fn bands(&self) -> Result<Vec<BandRow>> {
        let mut rows = Vec::new();
        for r in &self.rankings {
            for (a, avg) in r.table.algorithms.iter().zip(&r.table.averages) {
                if let Some(avg) = *avg {
                    rows.push(BandRow {
                        dataset: r.dataset.clone(),
                        algorithm: a.clone(),
                        average: avg,
                        band: color_band(avg)?,
                    });
                }
            }
        }
        Ok(rows)
    }
}

fn comment_block(provenance: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in provenance {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `benchmark.json`, `ranks.csv` and `bands.csv` into `dir`.
pub fn emit_report(dir: &Path, report: &BenchmarkReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let json = serde_json::to_string_pretty(report)?;
    written.push(write(dir.join("benchmark.json"), &(json + "\n"))?);

    let header = comment_block(&report.provenance);
    let mut ranks = header.clone();
    ranks.push_str("# ties: competition ranking (tied scores share the smaller rank)\n");
    for r in &report.rankings {
        if report.rankings.len() > 1 {
            let _ = writeln!(ranks, "# dataset: {}", r.dataset);
        }
        ranks.push_str(&r.table.to_csv());
    }
    written.push(write(dir.join("ranks.csv"), &ranks)?);

    let mut bands = header;
    bands.push_str("dataset,algorithm,average,band\n");
    for b in report.bands()? {
        let _ = writeln!(bands, "{},{},{:.3},{}", b.dataset, b.algorithm, b.average, b.band);
    }
    written.push(write(dir.join("bands.csv"), &bands)?);
    Ok(written)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const CELL_W: usize = 96;
const CELL_H: usize = 34;
const LABEL_W: usize = 210;
const HEADER_H: usize = 44;
const LEGEND_H: usize = 40;

/// Grid of average ranks coloured by band, with a three-entry legend.
/// `values[r][c]` belongs to `rows[r]` and `cols[c]`.
pub fn heatmap_svg(rows: &[String], cols: &[String], values: &[Vec<f64>]) -> Result<String> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Structural("heatmap needs at least one row and one column".into()));
    }
    if values.len() != rows.len() || values.iter().any(|v| v.len() != cols.len()) {
        return Err(Error::Structural("heatmap values do not match the labels".into()));
    }
    let width = LABEL_W + CELL_W * cols.len() + 10;
    let height = HEADER_H + CELL_H * rows.len() + LEGEND_H + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="13">"#
    );
    for (c, name) in cols.iter().enumerate() {
        let x = LABEL_W + c * CELL_W + CELL_W / 2;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle" font-weight="bold">{}</text>"#,
            HEADER_H - 14,
            escape(name)
        );
    }
    for (r, name) in rows.iter().enumerate() {
        let y = HEADER_H + r * CELL_H;
        let _ = writeln!(s, r#"<text x="8" y="{}">{}</text>"#, y + CELL_H / 2 + 5, escape(name));
        for (c, &v) in values[r].iter().enumerate() {
            let band = color_band(v)?;
            let x = LABEL_W + c * CELL_W;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="white"/>"#,
                band.fill()
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#,
                x + CELL_W / 2,
                y + CELL_H / 2 + 5
            );
        }
    }
    let ly = HEADER_H + rows.len() * CELL_H + 14;
    let legend = [
        (ColorBand::Green, "1.000–3.332"),
        (ColorBand::Yellow, "3.333–5.665"),
        (ColorBand::Red, "5.666–8.000"),
    ];
    for (i, (band, range)) in legend.iter().enumerate() {
        let x = LABEL_W + i * 150;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{ly}" width="16" height="16" fill="{}"/>"#,
            band.fill()
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{band} {range}</text>"#, x + 22, ly + 13);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_heatmap(path: &Path, rows: &[String], cols: &[String], values: &[Vec<f64>]) -> Result<()> {
    let svg = heatmap_svg(rows, cols, values)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
