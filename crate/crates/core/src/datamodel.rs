//! Mixed continuous/ordinal datasets.
//!
//! Values are held column-major. Ordinal cells are stored as integer-valued
//! reals in `1..=levels`; the matching thresholded latent-Gaussian model lives
//! in [`crate::bivariate`].

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Ordinal { levels: u32 },
}

impl ColumnKind {
    pub fn is_ordinal(self) -> bool {
        matches!(self, ColumnKind::Ordinal { .. })
    }

    pub fn levels(self) -> Option<u32> {
        match self {
            ColumnKind::Ordinal { levels } => Some(levels),
            ColumnKind::Continuous => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Continuous }
    }

    pub fn ordinal(name: impl Into<String>, levels: u32) -> Self {
        Self { name: name.into(), kind: ColumnKind::Ordinal { levels } }
    }
}

/// Validated N×M observation matrix with per-column metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    metas: Vec<ColumnMeta>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset from column-major values, checking every invariant.
    pub fn new(columns: Vec<Vec<f64>>, metas: Vec<ColumnMeta>) -> Result<Self> {
        if columns.len() != metas.len() {
            return Err(Error::Schema(format!(
                "{} columns of data but {} column descriptions",
                columns.len(),
                metas.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if n_rows == 0 {
            return Err(Error::EmptyData);
        }
        let mut seen = HashSet::new();
        for (col, meta) in columns.iter().zip(&metas) {
            if !seen.insert(meta.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", meta.name)));
            }
            if col.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column '{}' has {} rows, expected {n_rows}",
                    meta.name,
                    col.len()
                )));
            }
            validate_column(col, meta)?;
        }
        Ok(Self { columns, metas, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn metas(&self) -> &[ColumnMeta] {
        &self.metas
    }

    pub fn meta(&self, j: usize) -> &ColumnMeta {
        &self.metas[j]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Level codes of an ordinal column. Panics on a continuous column.
    pub fn codes(&self, j: usize) -> Vec<u32> {
        assert!(self.metas[j].kind.is_ordinal(), "column {j} is not ordinal");
        self.columns[j].iter().map(|&v| v as u32).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.metas.iter().position(|m| m.name == name)
    }

    /// Resolves a list of column names to indices.
    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown column '{}'", n.as_ref())))
            })
            .collect()
    }

    pub fn all_continuous(&self) -> bool {
        self.metas.iter().all(|m| !m.kind.is_ordinal())
    }

    /// Keeps the listed columns in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut cols = Vec::with_capacity(indices.len());
        let mut metas = Vec::with_capacity(indices.len());
        for &j in indices {
            if j >= self.n_cols() {
                return Err(Error::InvalidArgument(format!("column index {j} out of range")));
            }
            cols.push(self.columns[j].clone());
            metas.push(self.metas[j].clone());
        }
        Dataset::new(cols, metas)
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Dataset {
        assert_eq!(order.len(), self.n_rows);
        let columns = self
            .columns
            .iter()
            .map(|c| order.iter().map(|&i| c[i]).collect())
            .collect();
        Dataset { columns, metas: self.metas.clone(), n_rows: self.n_rows }
    }

    /// Same cells with every column declared continuous (ordinal codes read as numbers).
    pub fn as_continuous(&self) -> Dataset {
        let metas = self.metas.iter().map(|m| ColumnMeta::continuous(m.name.clone())).collect();
        Dataset { columns: self.columns.clone(), metas, n_rows: self.n_rows }
    }
}

fn validate_column(col: &[f64], meta: &ColumnMeta) -> Result<()> {
    match meta.kind {
        ColumnKind::Continuous => {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(cell_error(row, &meta.name, "non-finite value"));
            }
        }
        ColumnKind::Ordinal { levels } => {
            if levels < 2 {
                return Err(Error::Schema(format!(
                    "ordinal column '{}' declares {levels} levels, need at least 2",
                    meta.name
                )));
            }
            let mut seen = vec![false; levels as usize + 1];
            for (row, &v) in col.iter().enumerate() {
                if v.fract() != 0.0 || !v.is_finite() {
                    return Err(cell_error(row, &meta.name, "non-integer ordinal cell"));
                }
                if v < 1.0 || v > levels as f64 {
                    return Err(cell_error(row, &meta.name, &format!("level out of range 1..={levels}")));
                }
                seen[v as usize] = true;
            }
            check_observed_levels(&seen[1..], &meta.name)?;
        }
    }
    Ok(())
}

// Levels must be contiguous between the lowest and highest observed one.
fn check_observed_levels(seen: &[bool], name: &str) -> Result<()> {
    let lo = seen.iter().position(|&s| s);
    let hi = seen.iter().rposition(|&s| s);
    match (lo, hi) {
        (Some(lo), Some(hi)) if hi > lo => {
            if let Some(gap) = (lo..=hi).find(|&t| !seen[t]) {
                return Err(Error::Schema(format!(
                    "ordinal column '{name}' skips level {} (levels must be contiguous)",
                    gap + 1
                )));
            }
            Ok(())
        }
        _ => Err(Error::Schema(format!(
            "ordinal column '{name}' must attain at least 2 distinct levels"
        ))),
    }
}

fn cell_error(row: usize, column: &str, message: &str) -> Error {
    Error::Cell { row: row + 1, column: column.to_string(), message: message.to_string() }
}

/// Ordered X and Y index lists for a rank hypothesis. X and Y may overlap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSet {
    x: Vec<usize>,
    y: Vec<usize>,
}

impl VariableSet {
    pub fn new(x: Vec<usize>, y: Vec<usize>, n_cols: usize) -> Result<Self> {
        for (label, list) in [("X", &x), ("Y", &y)] {
            if list.is_empty() {
                return Err(Error::InvalidArgument(format!("{label} set is empty")));
            }
            let mut seen = HashSet::new();
            for &j in list {
                if j >= n_cols {
                    return Err(Error::InvalidArgument(format!("{label} index {j} out of range")));
                }
                if !seen.insert(j) {
                    return Err(Error::InvalidArgument(format!("{label} index {j} repeated")));
                }
            }
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[usize] {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn q(&self) -> usize {
        self.y.len()
    }

    /// K = min(P, Q).
    pub fn max_rank(&self) -> usize {
        self.p().min(self.q())
    }

    /// Sorted distinct indices of X ∪ Y.
    pub fn union(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self.x.iter().chain(&self.y).copied().collect();
        u.sort_unstable();
        u.dedup();
        u
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SchemaFile {
    columns: Vec<SchemaColumn>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SchemaColumn {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<u32>,
}

fn parse_schema(schema: SchemaFile) -> Result<Vec<ColumnMeta>> {
    schema
        .columns
        .into_iter()
        .map(|c| match (c.kind.as_str(), c.levels) {
            ("continuous", None) => Ok(ColumnMeta::continuous(c.name)),
            ("continuous", Some(_)) => {
                Err(Error::Schema(format!("continuous column '{}' must not declare levels", c.name)))
            }
            ("ordinal", Some(levels)) => Ok(ColumnMeta::ordinal(c.name, levels)),
            ("ordinal", None) => Err(Error::Schema(format!("ordinal column '{}' needs levels", c.name))),
            (other, _) => Err(Error::Schema(format!("column '{}': unknown kind '{other}'", c.name))),
        })
        .collect()
}

/// Reads a header-bearing CSV plus its JSON schema sidecar.
pub fn load_dataset(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema: SchemaFile = serde_json::from_reader(BufReader::new(File::open(schema_path)?))?;
    let declared = parse_schema(schema)?;
    let reader = csv::ReaderBuilder::new().has_headers(true).from_path(csv_path)?;
    read_csv(reader, &declared)
}

fn read_csv<R: std::io::Read>(mut reader: csv::Reader<R>, declared: &[ColumnMeta]) -> Result<Dataset> {
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() != declared.len() {
        return Err(Error::Schema(format!(
            "CSV has {} columns but schema declares {}",
            header.len(),
            declared.len()
        )));
    }
    let metas: Vec<ColumnMeta> = header
        .iter()
        .map(|h| {
            declared
                .iter()
                .find(|m| &m.name == h)
                .cloned()
                .ok_or_else(|| Error::Schema(format!("CSV column '{h}' is not declared in the schema")))
        })
        .collect::<Result<_>>()?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); metas.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != metas.len() {
            return Err(Error::Cell {
                row: row + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", metas.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            let meta = &metas[j];
            if field.is_empty() {
                return Err(cell_error(row, &meta.name, "missing value"));
            }
            let v = match meta.kind {
                ColumnKind::Continuous => field
                    .parse::<f64>()
                    .map_err(|_| cell_error(row, &meta.name, &format!("not a number: '{field}'")))?,
                ColumnKind::Ordinal { levels } => {
                    let level = field
                        .parse::<i64>()
                        .map_err(|_| cell_error(row, &meta.name, &format!("non-integer ordinal cell '{field}'")))?;
                    if level < 1 || level > levels as i64 {
                        return Err(cell_error(row, &meta.name, &format!("level out of range 1..={levels}")));
                    }
                    level as f64
                }
            };
            columns[j].push(v);
        }
    }
    Dataset::new(columns, metas)
}

/// Writes `d` as CSV plus schema; `load_dataset` reproduces it bit-exactly.
pub fn save_dataset(d: &Dataset, csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<()> {
    let schema = SchemaFile {
        columns: d
            .metas
            .iter()
            .map(|m| SchemaColumn {
                name: m.name.clone(),
                kind: if m.kind.is_ordinal() { "ordinal" } else { "continuous" }.to_string(),
                levels: m.kind.levels(),
            })
            .collect(),
    };
    let mut f = File::create(schema_path)?;
    serde_json::to_writer_pretty(&mut f, &schema)?;
    f.write_all(b"\n")?;

    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(d.metas.iter().map(|m| m.name.as_str()))?;
    let mut record = Vec::with_capacity(d.n_cols());
    for i in 0..d.n_rows {
        record.clear();
        for (col, meta) in d.columns.iter().zip(&d.metas) {
            // `{}` on f64 prints the shortest string that parses back to the same bits.
            record.push(match meta.kind {
                ColumnKind::Ordinal { .. } => format!("{}", col[i] as i64),
                ColumnKind::Continuous => format!("{}", col[i]),
            });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Centers and scales continuous columns to sample mean 0 and sample variance 1.
pub fn standardize(d: &Dataset) -> Result<Dataset> {
    if d.n_rows < 2 {
        return Err(Error::InsufficientData("standardization needs N >= 2".into()));
    }
    let mut out = d.clone();
    for (col, meta) in out.columns.iter_mut().zip(&out.metas) {
        if meta.kind.is_ordinal() {
            continue;
        }
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance(meta.name.clone()));
        }
        col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    Ok(out)
}

/// Maps each value to level `t` such that `T_t < value <= T_{t+1}`, where
/// `thresholds` holds the finite interior cut points and `T_1 = -inf`,
/// `T_{C+1} = +inf`. Output levels are 1-based.
pub fn discretize_column(values: &[f64], thresholds: &[f64]) -> Result<Vec<u32>> {
    if thresholds.is_empty()
        || thresholds.iter().any(|t| !t.is_finite())
        || thresholds.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::NonAscendingThresholds);
    }
    Ok(values
        .iter()
        .map(|&v| 1 + thresholds.partition_point(|&t| t < v) as u32)
        .collect())
}
