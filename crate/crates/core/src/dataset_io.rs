//! Delimited-text ingestion with schema inference.
//!
//! Files are read as UTF-8 text, one record per line. Every column gets
//! exactly one [`AttributeKind`]: integer when all present cells parse as
//! integers, real when they all parse as finite numbers, categorical
//! otherwise. Cells equal to one of the configured missing tokens become
//! [`Cell::Missing`] and do not take part in inference.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: [&str; 5] = ["", "?", "NA", "NaN", "na"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Real,
    Integer,
    Categorical,
}

impl AttributeKind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, AttributeKind::Categorical)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub columns: Vec<Column>,
    pub missing_tokens: BTreeSet<String>,
}

impl AttributeSchema {
    pub fn new(columns: Vec<Column>, missing_tokens: BTreeSet<String>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Structural("schema has no columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Structural(format!("duplicate column name '{}'", c.name)));
            }
        }
        Ok(Self {
            columns,
            missing_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn count_kind(&self, kind: AttributeKind) -> usize {
        self.columns.iter().filter(|c| c.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Category(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }
}

/// N×D table of mixed cells together with its schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    pub schema: AttributeSchema,
    pub rows: Vec<Vec<Cell>>,
}

impl DataMatrix {
    pub fn new(schema: AttributeSchema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let d = schema.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Structural(format!(
                    "row {i} has {} cells, expected {d}",
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                let ok = match (cell, schema.columns[j].kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Number(v), k) => k.is_numeric() && v.is_finite(),
                    (Cell::Category(_), k) => k == AttributeKind::Categorical,
                };
                if !ok {
                    return Err(Error::Structural(format!(
                        "cell ({i}, {j}) is inconsistent with column '{}' of kind {:?}",
                        schema.columns[j].name, schema.columns[j].kind
                    )));
                }
            }
        }
        Ok(Self { schema, rows })
    }

    /// Builds an all-real matrix from numeric rows with synthesized names.
    pub fn from_numeric(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let columns = (0..d)
            .map(|j| Column {
                name: format!("c{j}"),
                kind: AttributeKind::Real,
            })
            .collect();
        let schema = AttributeSchema::new(columns, default_missing_tokens())?;
        let cells = rows
            .iter()
            .map(|r| r.iter().map(|&v| Cell::Number(v)).collect())
            .collect();
        Self::new(schema, cells)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Cell::is_missing)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r[j])
    }

    /// Removes column `name`, returning it as ground-truth labels.
    pub fn split_target(&self, name: &str) -> Result<(DataMatrix, GroundTruth)> {
        let j = self
            .schema
            .position(name)
            .ok_or_else(|| Error::Structural(format!("no column named '{name}'")))?;
        let mut columns = self.schema.columns.clone();
        columns.remove(j);
        let schema = AttributeSchema::new(columns, self.schema.missing_tokens.clone())?;
        let mut labels = Vec::with_capacity(self.n_rows());
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                let cell = r.remove(j);
                labels.push(cell_text(&cell, self.schema.columns[j].kind, ""));
                r
            })
            .collect();
        Ok((DataMatrix { schema, rows }, GroundTruth::new(labels)))
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataMatrix> {
        let picked = rows
            .iter()
            .map(|&i| {
                self.rows
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Structural(format!("row {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DataMatrix {
            schema: self.schema.clone(),
            rows: picked,
        })
    }
}

/// Class labels paired with a data matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<String>,
}

impl GroundTruth {
    pub fn new(labels: Vec<String>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().collect::<HashSet<_>>().len()
    }

    pub fn select(&self, rows: &[usize]) -> Result<GroundTruth> {
        rows.iter()
            .map(|&i| {
                self.labels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Structural(format!("truth row {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()
            .map(GroundTruth::new)
    }
}

pub fn default_missing_tokens() -> BTreeSet<String> {
    DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub missing_tokens: BTreeSet<String>,
    /// Lines starting with this byte are skipped (provenance headers).
    pub comment: Option<u8>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            missing_tokens: default_missing_tokens(),
            comment: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

/// Parses delimited text from any reader. Ragged rows are reported with
/// their zero-based record index.
pub fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .comment(options.comment)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let mut names: Option<Vec<String>> = None;
    if options.has_header {
        match records.next() {
            Some(rec) => names = Some(rec?.iter().map(str::to_string).collect()),
            None => return Err(Error::Structural("missing header row".into())),
        }
    }

    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        let expected = names.as_ref().map(Vec::len).or_else(|| raw.first().map(Vec::len));
        if let Some(expected) = expected {
            if fields.len() != expected {
                return Err(Error::Structural(format!(
                    "row {i} has {} fields, expected {expected}",
                    fields.len()
                )));
            }
        }
        raw.push(fields);
    }

    let names = match names {
        Some(n) => n,
        None => {
            let d = raw.first().map_or(0, Vec::len);
            (0..d).map(|j| format!("c{j}")).collect()
        }
    };
    let schema = infer_schema(&names, &raw, &options.missing_tokens)?;
    let rows = raw
        .into_iter()
        .map(|fields| {
            fields
                .into_iter()
                .zip(&schema.columns)
                .map(|(text, col)| parse_cell(text, col.kind, &schema.missing_tokens))
                .collect()
        })
        .collect();
    DataMatrix::new(schema, rows)
}

fn parse_cell(text: String, kind: AttributeKind, missing: &BTreeSet<String>) -> Cell {
    if missing.contains(&text) {
        return Cell::Missing;
    }
    match kind {
        AttributeKind::Categorical => Cell::Category(text),
        // Inference guarantees these parse.
        _ => Cell::Number(text.parse::<f64>().expect("numeric cell")),
    }
}

/// Infers one kind per column from raw text cells.
pub fn infer_schema(
    names: &[String],
    raw: &[Vec<String>],
    missing_tokens: &BTreeSet<String>,
) -> Result<AttributeSchema> {
    if names.is_empty() {
        return Err(Error::Structural("input has zero columns".into()));
    }
    let columns = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let cells = raw
                .iter()
                .map(|r| r[j].as_str())
                .filter(|c| !missing_tokens.contains(*c));
            Column {
                name: name.clone(),
                kind: infer_kind(cells),
            }
        })
        .collect();
    AttributeSchema::new(columns, missing_tokens.clone())
}

fn infer_kind<'a>(cells: impl Iterator<Item = &'a str>) -> AttributeKind {
    let mut kind = AttributeKind::Integer;
    for c in cells {
        if kind == AttributeKind::Integer && c.parse::<i64>().is_ok() {
            continue;
        }
        match c.parse::<f64>() {
            Ok(v) if v.is_finite() => kind = AttributeKind::Real,
            _ => return AttributeKind::Categorical,
        }
    }
    kind
}

fn cell_text(cell: &Cell, kind: AttributeKind, missing: &str) -> String {
    match cell {
        Cell::Missing => missing.to_string(),
        Cell::Category(s) => s.clone(),
        Cell::Number(v) if kind == AttributeKind::Integer && v.fract() == 0.0 => {
            format!("{}", *v as i64)
        }
        Cell::Number(v) => format!("{v}"),
    }
}

/// Writes the matrix back as delimited text with a header row.
pub fn write_csv<W: Write>(m: &DataMatrix, writer: W, delimiter: u8, missing: &str) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    w.write_record(m.schema.columns.iter().map(|c| c.name.as_str()))?;
    for row in &m.rows {
        w.write_record(
            row.iter()
                .zip(&m.schema.columns)
                .map(|(cell, col)| cell_text(cell, col.kind, missing)),
        )?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Table-3 style description of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub instances: usize,
    pub attributes: usize,
    pub real: usize,
    pub integer: usize,
    pub categorical: usize,
    pub missing: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classes: Option<usize>,
}

pub fn summarize(m: &DataMatrix, truth: Option<&GroundTruth>) -> DatasetSummary {
    DatasetSummary {
        instances: m.n_rows(),
        attributes: m.n_cols(),
        real: m.schema.count_kind(AttributeKind::Real),
        integer: m.schema.count_kind(AttributeKind::Integer),
        categorical: m.schema.count_kind(AttributeKind::Categorical),
        missing: m.has_missing(),
        classes: truth.map(GroundTruth::n_classes),
    }
}

/// Reads a label file: either `row,label` pairs or a single label column.
/// Lines starting with `#` are ignored. Returns `(row, label)` pairs in file
/// order; for single-column files the row is the line position.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(usize, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec?;
        match rec.len() {
            1 => {
                let label = rec[0].to_string();
                if !header_seen && out.is_empty() && label.eq_ignore_ascii_case("label") {
                    header_seen = true;
                    continue;
                }
                out.push((out.len(), label));
            }
            2 => match rec[0].parse::<usize>() {
                Ok(row) => out.push((row, rec[1].to_string())),
                Err(_) if !header_seen && out.is_empty() => header_seen = true,
                Err(_) => {
                    return Err(Error::Structural(format!("bad row index '{}'", &rec[0])));
                }
            },
            n => return Err(Error::Structural(format!("label line has {n} fields"))),
        }
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<(usize, String)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file)
}

/// Maps opaque label tokens to dense indices in first-occurrence order.
pub fn index_labels<S: AsRef<str>>(labels: &[S]) -> Vec<usize> {
    let mut map: BTreeMap<&str, usize> = BTreeMap::new();
    let mut next = 0;
    labels
        .iter()
        .map(|l| {
            *map.entry(l.as_ref()).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(s: &str) -> Result<DataMatrix> {
        read_csv(s.as_bytes(), &LoadOptions::default())
    }

    const TABLE_1: &str = "x1,x2,x3\na,E,x\nb,D,x\nc,E,x\nd,D,x\ne,E,x\nf,D,x\n";

    #[test]
    fn loads_categorical_sample_table() {
        let m = load_str(TABLE_1).unwrap();
        assert_eq!(m.n_rows(), 6);
        assert_eq!(m.n_cols(), 3);
        assert!(m
            .schema
            .columns
            .iter()
            .all(|c| c.kind == AttributeKind::Categorical));
    }

    #[test]
    fn header_only_file_is_empty_matrix() {
        let m = load_str("a,b,c\n").unwrap();
        assert_eq!(m.n_rows(), 0);
        assert_eq!(m.n_cols(), 3);
    }

    #[test]
    fn question_mark_is_missing_and_column_stays_integer() {
        let m = load_str("a,b\n1,x\n?,y\n3,x\n").unwrap();
        assert_eq!(m.schema.columns[0].kind, AttributeKind::Integer);
        assert_eq!(m.schema.columns[1].kind, AttributeKind::Categorical);
        let expected = [Cell::Number(1.0), Cell::Missing, Cell::Number(3.0)];
        for (cell, want) in m.column(0).zip(expected.iter()) {
            assert_eq!(cell, want);
        }
        for row in &m.rows {
            assert_eq!(row.len(), m.schema.len());
        }
    }

    #[test]
    fn ragged_rows_report_index() {
        let err = load_str("a,b\n1,2\n3\n").unwrap_err();
        match err {
            Error::Structural(msg) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_csv("/definitely/not/here.csv", &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn no_header_synthesizes_names() {
        let opts = LoadOptions {
            has_header: false,
            ..LoadOptions::default()
        };
        let m = read_csv("1,2\n3,4\n".as_bytes(), &opts).unwrap();
        assert_eq!(m.schema.columns[0].name, "c0");
        assert_eq!(m.schema.columns[1].name, "c1");
        assert_eq!(m.n_rows(), 2);
    }

    #[test]
    fn inference_rules() {
        let tokens = default_missing_tokens();
        let kind = |col: &[&str]| {
            let raw: Vec<Vec<String>> = col.iter().map(|c| vec![c.to_string()]).collect();
            infer_schema(&["c".to_string()], &raw, &tokens).unwrap().columns[0].kind
        };
        assert_eq!(kind(&["1", "2", "3"]), AttributeKind::Integer);
        assert_eq!(kind(&["1.5", "2", "3"]), AttributeKind::Real);
        assert_eq!(kind(&["a", "b", "a"]), AttributeKind::Categorical);
        assert_eq!(kind(&["1", "inf"]), AttributeKind::Categorical);
        assert!(infer_schema(&[], &[], &tokens).is_err());
    }

    #[test]
    fn summary_flags() {
        let m = load_str("a,b\n1,x\n2,y\n").unwrap();
        let s = summarize(&m, None);
        assert_eq!((s.instances, s.attributes, s.missing), (2, 2, false));
        let m = load_str("a,b\n1,x\nNA,y\n").unwrap();
        assert!(summarize(&m, None).missing);
        let empty = load_str("a\n").unwrap();
        let s = summarize(&empty, None);
        assert_eq!((s.instances, s.missing), (0, false));
        let truth = GroundTruth::new(vec!["p".into(), "q".into(), "p".into()]);
        assert_eq!(summarize(&m, Some(&truth)).classes, Some(2));
    }

    #[test]
    fn categorical_text_survives_write_back() {
        let m = load_str("k,v\n\"a b\",1\nc,NA\n").unwrap();
        let mut out = Vec::new();
        write_csv(&m, &mut out, b',', "NA").unwrap();
        let back = read_csv(out.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn split_target_moves_column_to_truth() {
        let m = load_str("a,cls\n1,yes\n2,no\n").unwrap();
        let (x, t) = m.split_target("cls").unwrap();
        assert_eq!(x.n_cols(), 1);
        assert_eq!(t.labels, vec!["yes", "no"]);
    }

    #[test]
    fn label_files() {
        let pairs = read_labels("row,label\n0,a\n2,b\n".as_bytes()).unwrap();
        assert_eq!(pairs, vec![(0, "a".to_string()), (2, "b".to_string())]);
        let single = read_labels("x\ny\n".as_bytes()).unwrap();
        assert_eq!(single, vec![(0, "x".to_string()), (1, "y".to_string())]);
        assert_eq!(index_labels(&["b", "a", "b"]), vec![0, 1, 0]);
    }
}
