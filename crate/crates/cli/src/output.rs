//! Result tables: versioned CSV or JSON lines, plus a metadata side file.

use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::Path;
use tree_entropy::entropy::fmt17;
use tree_entropy::graph::LogValue;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Log(LogValue),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt17(*x),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Log(v) => v.render(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // strings keep the 17-digit rendering and allow -inf
            Cell::Num(x) => Value::String(fmt17(*x)),
            Cell::Int(x) => json!(x),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Log(v) => Value::String(v.render()),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}
impl From<LogValue> for Cell {
    fn from(x: LogValue) -> Self {
        Cell::Log(x)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Two-column `quantity,value` convenience.
    pub fn kv(&mut self, key: &str, value: impl Into<Cell>) {
        self.push(vec![key.into(), value.into()]);
    }

    pub fn render(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Csv => {
                s.push_str(&format!("# schema={SCHEMA}\n{}\n", self.columns.join(",")));
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
            }
            Format::Jsonl => {
                for row in &self.rows {
                    let mut obj = Map::new();
                    obj.insert("schema".into(), json!(SCHEMA));
                    for (c, v) in self.columns.iter().zip(row) {
                        obj.insert((*c).into(), v.json());
                    }
                    s.push_str(&Value::Object(obj).to_string());
                    s.push('\n');
                }
            }
        }
        s
    }
}

/// Writes the table to `out` (plus `out.meta`) or to stdout.
pub fn emit(table: &Table, format: Format, out: Option<&Path>, argv: &[String], threads: usize) -> std::io::Result<()> {
    let body = table.render(format);
    match out {
        None => std::io::stdout().write_all(body.as_bytes()),
        Some(path) => {
            std::fs::write(path, body)?;
            let stamp = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let meta = json!({
                "schema": SCHEMA,
                "version": env!("CARGO_PKG_VERSION"),
                "argv": argv,
                "threads": threads,
                "unix_time": stamp,
            });
            let mut meta_path = path.as_os_str().to_owned();
            meta_path.push(".meta");
            std::fs::write(meta_path, format!("{meta}\n"))
        }
    }
}
