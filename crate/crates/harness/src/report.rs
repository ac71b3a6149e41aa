//! Report files.
//!
//! JSON reports carry the resolved parameters, a table of per-trial rows and
//! an aggregate map. CSV reports carry only the table, with a header row.
//! Both are byte-stable for identical content: maps are ordered, floats use
//! the shortest round-trip representation, and non-finite floats are written
//! as the strings `"inf"`, `"-inf"` and `"nan"`. Elapsed wall-clock time goes
//! to a `<report>.timing.json` sidecar so the report itself stays reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Format;
use crate::error::HarnessError;

/// JSON schema version of [`Report`].
pub const SCHEMA_VERSION: u32 = 1;

/// One table cell or aggregate value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Null,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Cell::Bool(b) => Some(b),
            _ => None,
        }
    }

    fn csv_text(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => float_text(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }
}

fn float_text(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

macro_rules! cell_from_int {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(v: $t) -> Self {
                Cell::Int(v as i64)
            }
        }
    )*};
}
cell_from_int!(i32, i64, u32, u64, usize);

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Float(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Float(x) => s.serialize_str(&float_text(*x)),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Null => s.serialize_unit(),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CellVisitor;

        impl Visitor<'_> for CellVisitor {
            type Value = Cell;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, boolean, string or null")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cell, E> {
                Ok(Cell::Int(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cell, E> {
                i64::try_from(v).map(Cell::Int).map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Cell, E> {
                Ok(Cell::Float(v))
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<Cell, E> {
                Ok(Cell::Bool(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Cell, E> {
                Ok(match v {
                    "inf" => Cell::Float(f64::INFINITY),
                    "-inf" => Cell::Float(f64::NEG_INFINITY),
                    "nan" => Cell::Float(f64::NAN),
                    _ => Cell::Text(v.into()),
                })
            }

            fn visit_unit<E: de::Error>(self) -> Result<Cell, E> {
                Ok(Cell::Null)
            }

            fn visit_none<E: de::Error>(self) -> Result<Cell, E> {
                Ok(Cell::Null)
            }
        }

        d.deserialize_any(CellVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub library_version: String,
    pub experiment: String,
    pub seed: u64,
    /// The parameters actually used, after presets and overrides.
    pub params: BTreeMap<String, Cell>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub aggregate: BTreeMap<String, Cell>,
    /// Outcome of the experiment's own acceptance thresholds, if it has any.
    pub passed: Option<bool>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, columns: &[&str]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").into(),
            experiment: experiment.into(),
            seed,
            params: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            aggregate: BTreeMap::new(),
            passed: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.aggregate.insert(key.into(), value.into());
        self
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the columns");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.aggregate.get(key)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Serialize(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Serialize(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| HarnessError::Serialize(e.to_string());
        w.write_record(&self.columns).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_text)).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Serialize(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn render(&self, format: Format) -> Result<String, HarnessError> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Path of the timing sidecar for a report at `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".timing.json");
    path.with_file_name(name)
}

/// Writes the report and its timing sidecar.
pub fn write_report(report: &Report, format: Format, path: &Path, elapsed_secs: f64) -> Result<(), HarnessError> {
    std::fs::write(path, report.render(format)?)?;
    let timing = serde_json::json!({ "experiment": report.experiment, "wall_clock_seconds": elapsed_secs });
    std::fs::write(sidecar_path(path), format!("{timing}\n"))?;
    Ok(())
}
