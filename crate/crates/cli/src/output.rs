use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Human,
}

/// One table cell. Missing values are empty in CSV and `null` in JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Num(f64),
    Int(i128),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl From<$t> for Cell {
            fn from(v: $t) -> Self {
                Cell::Int(v as i128)
            }
        }
    )*};
}
int_cell!(u32, u64, u128, i64, usize);

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => match i64::try_from(*v) {
                Ok(i) => Value::from(i),
                Err(_) => Value::String(v.to_string()),
            },
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Rows with a fixed header, rendered in any output format.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    for (h, c) in self.headers.iter().zip(row) {
                        m.insert(h.clone(), c.json());
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }

    /// Left-aligned columns separated by two spaces.
    pub fn to_human(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::text).collect())
            .collect();
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|i| {
                cells
                    .iter()
                    .map(|r| r[i].len())
                    .chain([self.headers[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let mut line = |fields: &[String]| {
            let s: Vec<String> = fields
                .iter()
                .zip(&widths)
                .map(|(f, w)| format!("{f:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", s.join("  ").trim_end());
        };
        line(&self.headers);
        for r in &cells {
            line(r);
        }
        out
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => json_text(&self.to_json_value()),
            Format::Human => Ok(self.to_human()),
        }
    }
}

pub fn json_text<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `path`, or to standard output.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(["name", "value", "note"]);
        t.push(vec!["a".into(), 1.5.into(), Cell::Empty]);
        t.push(vec!["b,c".into(), Cell::Int(3), true.into()]);
        t
    }

    #[test]
    fn csv_quotes_and_leaves_missing_empty() {
        assert_eq!(
            sample().to_csv().unwrap(),
            "name,value,note\na,1.5,\n\"b,c\",3,true\n"
        );
    }

    #[test]
    fn json_keeps_column_order_and_nulls() {
        let v = sample().to_json_value();
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"[{"name":"a","value":1.5,"note":null},{"name":"b,c","value":3,"note":true}]"#
        );
    }

    #[test]
    fn human_aligns_columns() {
        let h = sample().to_human();
        let lines: Vec<&str> = h.lines().collect();
        assert_eq!(lines[0], "name  value  note");
        assert_eq!(lines[1], "a     1.5");
        assert_eq!(lines[2], "b,c   3      true");
    }

    #[test]
    fn nan_becomes_null() {
        let mut t = Table::new(["x"]);
        t.push(vec![f64::NAN.into()]);
        assert_eq!(
            serde_json::to_string(&t.to_json_value()).unwrap(),
            r#"[{"x":null}]"#
        );
    }
}
