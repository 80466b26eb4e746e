//! Tabular output shared by every command: CSV with 17 significant digits,
//! or JSON with a `meta` object and an array of records.

use std::io::{Read, Write};
use std::path::Path;

use serde_json::{Map, Value as Json};

use super::{AppError, Format};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Text(_) => None,
        }
    }

    /// Bitwise equality for floats (any NaN matches any NaN; `0.0 != -0.0`).
    pub fn same_bits(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            _ => self == other,
        }
    }

    fn to_field(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Text(s) => s.clone(),
        }
    }

    fn parse_field(s: &str) -> Value {
        let numeric_int = !s.is_empty() && s.trim_start_matches('-').bytes().all(|b| b.is_ascii_digit());
        if numeric_int {
            if let Ok(i) = s.parse() {
                return Value::Int(i);
            }
        }
        match s.parse::<f64>() {
            Ok(f) => Value::Float(f),
            Err(_) => Value::Text(s.to_string()),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Int(i) => Json::from(*i),
            Value::Float(f) => serde_json::Number::from_f64(*f).map_or(Json::Null, Json::Number),
            Value::Text(s) => Json::from(s.as_str()),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Text(v.to_string())
    }
}

/// Scientific notation with 17 significant digits; parses back to the same
/// bits.
pub fn format_float(f: f64) -> String {
    format!("{f:.16e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(&self.columns)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(Value::to_field))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> csv::Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let columns = rd.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            rows.push(rec?.iter().map(Value::parse_field).collect());
        }
        Ok(Self { columns, rows })
    }

    pub fn records_json(&self) -> Json {
        Json::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Json> =
                        self.columns.iter().cloned().zip(row.iter().map(Value::to_json)).collect();
                    Json::Object(obj)
                })
                .collect(),
        )
    }

    pub fn to_json(&self, meta: &Json) -> Json {
        let mut obj = Map::new();
        obj.insert("meta".into(), meta.clone());
        obj.insert("records".into(), self.records_json());
        Json::Object(obj)
    }

    /// Same column set and bit-identical cells.
    pub fn same_bits(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_bits(y)))
    }
}

/// Renders `table` in `format`. CSV output carries no metadata.
pub fn render(table: &Table, meta: &Json, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv_string(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&table.to_json(meta)).expect("serializable");
            s.push('\n');
            s
        }
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, contents: &str) -> Result<(), AppError> {
    match path {
        Some(p) => std::fs::write(p, contents).map_err(|e| AppError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| AppError::io(Path::new("<stdout>"), e))
        }
    }
}

pub fn read_table(path: &Path) -> Result<Table, AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    Table::read_csv(file).map_err(|e| AppError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}
