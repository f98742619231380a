use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Column names and kinds plus the binary outcome columns whose joint class
/// distribution is preserved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSchema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub outcomes: Vec<String>,
}

impl TabularSchema {
    pub fn new(columns: Vec<ColumnSpec>, outcomes: Vec<String>) -> Result<Self> {
        let schema = TabularSchema { columns, outcomes };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Config("schema has no columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Config(format!("duplicate column {:?}", c.name)));
            }
        }
        for o in &self.outcomes {
            match self.columns.iter().find(|c| &c.name == o) {
                None => return Err(Error::Config(format!("outcome {o:?} is not a column"))),
                Some(c) if c.kind != ColumnKind::Binary => {
                    return Err(Error::Config(format!("outcome {o:?} must be binary")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: TabularSchema = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        schema.validate().map_err(|e| Error::format(path, e))?;
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn outcome_indices(&self) -> Vec<usize> {
        self.outcomes.iter().filter_map(|o| self.index_of(o)).collect()
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.columns[j].kind == ColumnKind::Binary
    }
}

/// Column-major table of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!("{} names for {} columns", names.len(), columns.len())));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some((j, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != rows) {
            return Err(Error::Shape(format!("column {:?} has {} rows, expected {rows}", names[j], columns[j].len())));
        }
        if let Some(j) = columns.iter().position(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric(format!("column {:?} contains non-finite values", names[j])));
        }
        Ok(Table { names, columns })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let width = names.len();
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Shape(format!("row {i} has {} fields, expected {width}", rows[i].len())));
        }
        let columns = (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Table::new(names, columns)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|j| self.columns[j].as_slice())
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Rows `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Table {
        let columns = self.columns.iter().map(|c| indices.iter().map(|&i| c[i]).collect()).collect();
        Table { names: self.names.clone(), columns }
    }

    /// Checks column names and order against `schema` and that binary columns
    /// hold only 0 and 1.
    pub fn check_schema(&self, schema: &TabularSchema) -> Result<()> {
        schema.validate()?;
        if self.names.iter().map(String::as_str).ne(schema.names()) {
            return Err(Error::Contract(format!(
                "table columns {:?} do not match schema {:?}",
                self.names,
                schema.names()
            )));
        }
        for (j, c) in schema.columns.iter().enumerate() {
            if c.kind == ColumnKind::Binary && self.columns[j].iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Contract(format!("binary column {:?} holds values other than 0 and 1", c.name)));
            }
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Table::from_reader(file, path)
    }

    /// Parses CSV from any reader; `origin` only labels errors.
    pub fn from_reader(reader: impl std::io::Read, origin: &Path) -> Result<Table> {
        let path = origin;
        let mut r = csv::Reader::from_reader(reader);
        let names: Vec<String> = r.headers().map_err(|e| Error::format(path, e))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e))?;
            let row = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(path, format!("row {}: {e}", line + 1)))?;
            rows.push(row);
        }
        Table::from_rows(names, &rows).map_err(|e| Error::format(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        w.write_record(&self.names).map_err(|e| Error::format(path, e))?;
        for i in 0..self.n_rows() {
            let row: Vec<String> = self.columns.iter().map(|c| c[i].to_string()).collect();
            w.write_record(&row).map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
