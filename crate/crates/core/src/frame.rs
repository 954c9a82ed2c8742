//! Mixed numeric/categorical feature tables, dummy encoding and CSV I/O.
//!
//! Files use a header row. A column named `y` is the response; every other
//! column is a feature. A feature column is categorical when any of its cells
//! fails to parse as a number.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SmleError};
use crate::glm::GroupMap;

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl FeatureColumn {
    pub fn len(&self) -> usize {
        match self {
            FeatureColumn::Numeric(v) => v.len(),
            FeatureColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, i: usize) -> String {
        match self {
            FeatureColumn::Numeric(v) => v[i].to_string(),
            FeatureColumn::Categorical(v) => v[i].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    names: Vec<String>,
    columns: Vec<FeatureColumn>,
}

/// Dummy-encoded design. `levels[j]` holds the sorted levels of feature `j`
/// when it is categorical; the first level is the dropped reference.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub x: DMatrix<f64>,
    pub groups: GroupMap,
    pub column_names: Vec<String>,
    pub levels: Vec<Option<Vec<String>>>,
}

impl FeatureFrame {
    /// Frame with default names `x1..xp`.
    pub fn new(columns: Vec<FeatureColumn>) -> Result<Self> {
        let names = (1..=columns.len()).map(|j| format!("x{j}")).collect();
        Self::with_names(names, columns)
    }

    pub fn with_names(names: Vec<String>, columns: Vec<FeatureColumn>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(SmleError::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(SmleError::DimensionMismatch(
                    "feature columns differ in length".into(),
                ));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn from_matrix(x: &DMatrix<f64>) -> Self {
        let columns = x
            .column_iter()
            .map(|c| FeatureColumn::Numeric(c.iter().copied().collect()))
            .collect();
        Self::new(columns).expect("matrix columns share a length")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, FeatureColumn::len)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn has_categorical(&self) -> bool {
        self.columns
            .iter()
            .any(|c| matches!(c, FeatureColumn::Categorical(_)))
    }

    /// Encodes with levels taken from the data.
    pub fn encode(&self) -> Result<Encoded> {
        let levels: Vec<Option<Vec<String>>> = self
            .columns
            .iter()
            .map(|c| match c {
                FeatureColumn::Numeric(_) => None,
                FeatureColumn::Categorical(v) => {
                    let set: BTreeSet<&String> = v.iter().collect();
                    Some(set.into_iter().cloned().collect())
                }
            })
            .collect();
        self.encode_with_levels(&levels)
    }

    /// Encodes against fixed levels, e.g. those of a training frame.
    pub fn encode_with_levels(&self, levels: &[Option<Vec<String>>]) -> Result<Encoded> {
        if levels.len() != self.columns.len() {
            return Err(SmleError::DimensionMismatch(format!(
                "level table covers {} features, frame has {}",
                levels.len(),
                self.columns.len()
            )));
        }
        let n = self.n_rows();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut group_of = Vec::new();
        let mut column_names = Vec::new();
        for (j, (col, lv)) in self.columns.iter().zip(levels).enumerate() {
            match (col, lv) {
                (FeatureColumn::Numeric(v), None) => {
                    cols.push(v.clone());
                    group_of.push(j);
                    column_names.push(self.names[j].clone());
                }
                (FeatureColumn::Categorical(v), Some(lv)) => {
                    if lv.len() < 2 {
                        return Err(SmleError::Data(format!(
                            "categorical feature '{}' has fewer than two levels",
                            self.names[j]
                        )));
                    }
                    if let Some(bad) = v.iter().find(|s| !lv.contains(s)) {
                        return Err(SmleError::Data(format!(
                            "unknown level '{bad}' in feature '{}'",
                            self.names[j]
                        )));
                    }
                    for level in &lv[1..] {
                        cols.push(v.iter().map(|s| f64::from(u8::from(s == level))).collect());
                        group_of.push(j);
                        column_names.push(format!("{}:{level}", self.names[j]));
                    }
                }
                _ => {
                    return Err(SmleError::Data(format!(
                        "feature '{}' changes type between frames",
                        self.names[j]
                    )))
                }
            }
        }
        let x = DMatrix::from_fn(n, cols.len(), |i, c| cols[c][i]);
        Ok(Encoded {
            x,
            groups: GroupMap::new(group_of)?,
            column_names,
            levels: levels.to_vec(),
        })
    }
}

/// Parsed CSV table.
#[derive(Clone, Debug)]
pub struct Table {
    pub y: Option<DVector<f64>>,
    pub frame: FeatureFrame,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SmleError {
    SmleError::Data(format!("{}: {e}", path.display()))
}

fn open_err(path: &Path, e: csv::Error) -> SmleError {
    SmleError::Io(format!("{}: {e}", path.display()))
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| open_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        if rec.len() != header.len() {
            return Err(io_err(
                path,
                format!(
                    "row {} has {} fields, expected {}",
                    line + 2,
                    rec.len(),
                    header.len()
                ),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            raw[c].push(cell.trim().to_string());
        }
    }
    if raw.first().is_none_or(|c| c.is_empty()) {
        return Err(io_err(path, "no data rows"));
    }

    let mut y = None;
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for (name, cells) in header.into_iter().zip(raw) {
        let parsed: Option<Vec<f64>> = cells.iter().map(|s| s.parse::<f64>().ok()).collect();
        if name == "y" {
            let v = parsed.ok_or_else(|| io_err(path, "response column 'y' is not numeric"))?;
            y = Some(DVector::from_vec(v));
            continue;
        }
        if cells.iter().any(String::is_empty) {
            return Err(io_err(path, format!("missing value in column '{name}'")));
        }
        columns.push(match parsed {
            Some(v) => FeatureColumn::Numeric(v),
            None => FeatureColumn::Categorical(cells),
        });
        names.push(name);
    }
    if columns.is_empty() {
        return Err(io_err(path, "no feature columns"));
    }
    Ok(Table {
        y,
        frame: FeatureFrame::with_names(names, columns)?,
    })
}

pub fn write_table(path: &Path, y: Option<&DVector<f64>>, frame: &FeatureFrame) -> Result<()> {
    if let Some(y) = y {
        if y.len() != frame.n_rows() {
            return Err(SmleError::DimensionMismatch(format!(
                "response has length {}, frame has {} rows",
                y.len(),
                frame.n_rows()
            )));
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| open_err(path, e))?;
    let mut header: Vec<&str> = Vec::new();
    if y.is_some() {
        header.push("y");
    }
    header.extend(frame.names().iter().map(String::as_str));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..frame.n_rows() {
        row.clear();
        if let Some(y) = y {
            row.push(y[i].to_string());
        }
        row.extend(frame.columns().iter().map(|c| c.cell(i)));
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
