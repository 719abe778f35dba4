//! Pre- and post-processing: cleaning, categorical coding, min-max scaling
//! and percentile ranks.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset_io::{AttributeKind, AttributeSchema, Cell, Column, DataMatrix};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericImputation {
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoricalImputation {
    Mode,
}

/// How missing and noisy cells are handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleaningPolicy {
    pub missing_numeric: NumericImputation,
    pub missing_categorical: CategoricalImputation,
    /// Multiplier `f` of the IQR fences `[Q1 − f·IQR, Q3 + f·IQR]`.
    pub winsor_factor: f64,
    /// Rows whose missing fraction exceeds this value are dropped.
    pub row_drop_threshold: f64,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        Self {
            missing_numeric: NumericImputation::Median,
            missing_categorical: CategoricalImputation::Mode,
            winsor_factor: 1.5,
            row_drop_threshold: 0.5,
        }
    }
}

impl CleaningPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.row_drop_threshold > 0.0 && self.row_drop_threshold <= 1.0) {
            return Err(Error::Parameter(format!(
                "row_drop_threshold must be in (0, 1], got {}",
                self.row_drop_threshold
            )));
        }
        if !self.winsor_factor.is_finite() || self.winsor_factor <= 0.0 {
            return Err(Error::Parameter(format!(
                "winsor_factor must be positive, got {}",
                self.winsor_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleaningAction {
    Imputed,
    Clamped,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogValue {
    Number(f64),
    Text(String),
}

/// One cleaning event. `row` is the index in the matrix passed to [`clean`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningEvent {
    pub row: usize,
    pub col: Option<usize>,
    pub action: CleaningAction,
    pub before: Option<LogValue>,
    pub after: Option<LogValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningLog {
    pub events: Vec<CleaningEvent>,
    /// Input row index of every surviving row, in output order.
    pub kept_rows: Vec<usize>,
}

impl CleaningLog {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// JSON-lines rendering, one event per line.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn cell_log_value(cell: &Cell) -> Option<LogValue> {
    match cell {
        Cell::Number(v) => Some(LogValue::Number(*v)),
        Cell::Category(s) => Some(LogValue::Text(s.clone())),
        Cell::Missing => None,
    }
}

/// Drops mostly-missing rows, imputes the rest and winsorizes numeric
/// outliers. Idempotent for a fixed policy.
pub fn clean(m: &DataMatrix, policy: &CleaningPolicy) -> Result<(DataMatrix, CleaningLog)> {
    policy.validate()?;
    if m.n_rows() == 0 {
        return Err(Error::Structural("cannot clean an empty matrix".into()));
    }
    let d = m.n_cols();
    let mut log = CleaningLog::default();

    let mut rows = Vec::with_capacity(m.n_rows());
    for (i, row) in m.rows.iter().enumerate() {
        let missing = row.iter().filter(|c| c.is_missing()).count();
        if missing as f64 / d as f64 > policy.row_drop_threshold {
            log.events.push(CleaningEvent {
                row: i,
                col: None,
                action: CleaningAction::Dropped,
                before: None,
                after: None,
            });
        } else {
            rows.push(row.clone());
            log.kept_rows.push(i);
        }
    }

    for (j, col) in m.schema.columns.iter().enumerate() {
        let present: Vec<&Cell> = rows.iter().map(|r| &r[j]).filter(|c| !c.is_missing()).collect();
        if present.is_empty() {
            return Err(Error::UnrecoverableColumn {
                column: col.name.clone(),
            });
        }
        let fill = match col.kind {
            AttributeKind::Categorical => Cell::Category(mode(present.iter().filter_map(|c| match c {
                Cell::Category(s) => Some(s.as_str()),
                _ => None,
            }))),
            _ => {
                let values: Vec<f64> = present.iter().filter_map(|c| c.as_number()).collect();
                Cell::Number(stats::median(&values))
            }
        };
        for (r, row) in rows.iter_mut().enumerate() {
            if row[j].is_missing() {
                row[j] = fill.clone();
                log.events.push(CleaningEvent {
                    row: log.kept_rows[r],
                    col: Some(j),
                    action: CleaningAction::Imputed,
                    before: None,
                    after: cell_log_value(&fill),
                });
            }
        }

        if col.kind.is_numeric() {
            let values: Vec<f64> = rows.iter().filter_map(|r| r[j].as_number()).collect();
            let (q1, q3) = stats::order_stat_quartiles(&values);
            let iqr = q3 - q1;
            let lo = q1 - policy.winsor_factor * iqr;
            let hi = q3 + policy.winsor_factor * iqr;
            for (r, row) in rows.iter_mut().enumerate() {
                let v = row[j].as_number().expect("numeric after imputation");
                let clamped = v.clamp(lo, hi);
                if clamped != v {
                    row[j] = Cell::Number(clamped);
                    log.events.push(CleaningEvent {
                        row: log.kept_rows[r],
                        col: Some(j),
                        action: CleaningAction::Clamped,
                        before: Some(LogValue::Number(v)),
                        after: Some(LogValue::Number(clamped)),
                    });
                }
            }
        }
    }

    let cleaned = DataMatrix::new(m.schema.clone(), rows)?;
    Ok((cleaned, log))
}

/// Most frequent token; ties go to the token seen first.
fn mode<'a>(tokens: impl Iterator<Item = &'a str>) -> String {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, t) in tokens.enumerate() {
        counts.entry(t).or_insert((0, pos)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(t, _)| t.to_string())
        .unwrap_or_default()
}

/// Per-column bijection between category tokens and codes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub columns: Vec<Column>,
    /// `categories[j]` lists the tokens of column `j` in code order; empty
    /// for numeric columns.
    pub categories: Vec<Vec<String>>,
    pub missing_tokens: BTreeSet<String>,
}

impl EncodingMap {
    pub fn is_empty(&self) -> bool {
        self.categories.iter().all(Vec::is_empty)
    }

    pub fn code_of(&self, col: usize, token: &str) -> Option<usize> {
        self.categories[col].iter().position(|t| t == token).map(|p| p + 1)
    }

    pub fn token_of(&self, col: usize, code: f64) -> Option<&str> {
        if code.fract() != 0.0 || code < 1.0 {
            return None;
        }
        self.categories[col].get(code as usize - 1).map(String::as_str)
    }

    fn schema(&self) -> Result<AttributeSchema> {
        AttributeSchema::new(self.columns.clone(), self.missing_tokens.clone())
    }
}

/// Replaces categorical cells by integer codes `1..=n` following the sorted
/// order of the column's distinct tokens; numeric columns pass through.
pub fn encode_categorical(m: &DataMatrix) -> Result<(Array2<f64>, EncodingMap)> {
    let (n, d) = (m.n_rows(), m.n_cols());
    let mut out = Array2::zeros((n, d));
    let mut categories = vec![Vec::new(); d];
    for (j, col) in m.schema.columns.iter().enumerate() {
        let levels: BTreeSet<&str> = m
            .column(j)
            .filter_map(|c| match c {
                Cell::Category(s) => Some(s.as_str()),
                _ => None,
            })
            .collect();
        let codes: HashMap<&str, usize> = levels.iter().enumerate().map(|(i, &t)| (t, i + 1)).collect();
        categories[j] = levels.iter().map(|t| t.to_string()).collect();
        for (i, cell) in m.column(j).enumerate() {
            out[[i, j]] = match cell {
                Cell::Number(v) => *v,
                Cell::Category(s) => codes[s.as_str()] as f64,
                Cell::Missing => {
                    return Err(Error::Structural(format!(
                        "missing cell at ({i}, {j}) in column '{}'; clean first",
                        col.name
                    )))
                }
            };
        }
    }
    let map = EncodingMap {
        columns: m.schema.columns.clone(),
        categories,
        missing_tokens: m.schema.missing_tokens.clone(),
    };
    Ok((out, map))
}

/// Exact inverse of [`encode_categorical`].
pub fn decode_categorical(x: ArrayView2<f64>, map: &EncodingMap) -> Result<DataMatrix> {
    if x.ncols() != map.columns.len() {
        return Err(Error::Structural(format!(
            "matrix has {} columns, map has {}",
            x.ncols(),
            map.columns.len()
        )));
    }
    let rows = x
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| match map.columns[j].kind {
                    AttributeKind::Categorical => map
                        .token_of(j, v)
                        .map(|t| Cell::Category(t.to_string()))
                        .ok_or_else(|| Error::Decode {
                            column: map.columns[j].name.clone(),
                            value: v,
                        }),
                    _ => Ok(Cell::Number(v)),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    DataMatrix::new(map.schema()?, rows)
}

/// Per-column minimum and maximum recorded by [`normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationParams {
    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// Maps raw-space rows into `[0, 1]` with the recorded ranges.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_cols(x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            col.mapv_inplace(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 });
        }
        Ok(out)
    }

    fn check_cols(&self, cols: usize) -> Result<()> {
        if cols != self.len() {
            return Err(Error::Structural(format!(
                "matrix has {cols} columns, parameters cover {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Min-max scales every column into `[0, 1]`; constant columns map to 0.5.
pub fn normalize(x: ArrayView2<f64>) -> Result<(Array2<f64>, NormalizationParams)> {
    if let Some(((i, j), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite value {v} at ({i}, {j})")));
    }
    let d = x.ncols();
    let mut params = NormalizationParams {
        min: vec![0.0; d],
        max: vec![0.0; d],
    };
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        params.min[j] = col.iter().copied().fold(f64::INFINITY, f64::min);
        params.max[j] = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if col.is_empty() {
            params.min[j] = 0.0;
            params.max[j] = 0.0;
        }
    }
    let scaled = params.apply(x)?;
    Ok((scaled, params))
}

/// `x·(max − min) + min` per column.
pub fn denormalize(x: ArrayView2<f64>, params: &NormalizationParams) -> Result<Array2<f64>> {
    params.check_cols(x.ncols())?;
    let mut out = x.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let (lo, hi) = (params.min[j], params.max[j]);
        col.mapv_inplace(|v| v * (hi - lo) + lo);
    }
    Ok(out)
}

/// Mid-rank percentile of every cell within its column, plus row averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileTable {
    pub ranks: Array2<f64>,
    pub row_means: Vec<f64>,
}

pub fn percentile_ranks(x: ArrayView2<f64>) -> PercentileTable {
    let (n, d) = x.dim();
    let mut ranks = Array2::zeros((n, d));
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && col[order[end]] == col[order[start]] {
                end += 1;
            }
            let below = start as f64;
            let equal = (end - start) as f64;
            let p = 100.0 * (below + 0.5 * equal) / n as f64;
            for &i in &order[start..end] {
                ranks[[i, j]] = p;
            }
            start = end;
        }
    }
    let row_means = ranks
        .outer_iter()
        .map(|r| if d == 0 { 0.0 } else { r.sum() / d as f64 })
        .collect();
    PercentileTable { ranks, row_means }
}
