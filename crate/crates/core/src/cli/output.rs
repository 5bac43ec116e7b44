use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Column-labelled rows, kept in grid order.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Reasons for omitted rows.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    /// Appends a row, or a note instead when some value is not finite.
    pub fn push(&mut self, row: Vec<Cell>, label: &str) {
        if row
            .iter()
            .any(|c| matches!(c, Cell::Real(v) if !v.is_finite()))
        {
            self.notes
                .push(format!("{label}: omitted, a value is not finite"));
        } else {
            self.rows.push(row);
        }
    }
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Where and how to write a result.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    /// `None` for standard output.
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl Target {
    /// `-` or absent writes CSV to stdout; `csv`/`json` select a format on
    /// stdout; anything else is a file path whose `.json` extension selects
    /// JSON. An explicit `format` overrides the inferred one.
    pub fn resolve(out: Option<&str>, format: Option<Format>) -> Self {
        let (path, inferred) = match out {
            None | Some("-") | Some("csv") => (None, Format::Csv),
            Some("json") => (None, Format::Json),
            Some(p) => {
                let path = PathBuf::from(p);
                let f = if path.extension().is_some_and(|e| e == "json") {
                    Format::Json
                } else {
                    Format::Csv
                };
                (Some(path), f)
            }
        };
        Self {
            path,
            format: format.unwrap_or(inferred),
        }
    }
}

/// Formats a real with 12 significant digits, without trailing zeros.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Real(v) => fmt12(*v),
        Cell::Text(s) => s.clone(),
    }
}

fn cell_json(c: &Cell) -> serde_json::Value {
    match c {
        Cell::Int(v) => serde_json::Value::from(*v),
        Cell::Real(v) => {
            let rounded: f64 = fmt12(*v).parse().unwrap_or(*v);
            serde_json::Value::from(rounded)
        }
        Cell::Text(s) => serde_json::Value::from(s.clone()),
    }
}

/// Stable digest of a configuration: SHA-256 of its JSON with sorted keys,
/// first 16 hex digits.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    let text = serde_json::to_string(&value).unwrap_or_default();
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// First line of every artifact.
pub fn header(hash: &str) -> String {
    format!("vlc-limits {} config {hash}", env!("CARGO_PKG_VERSION"))
}

/// Renders a table in the requested format.
pub fn render_table(table: &Table, format: Format, hash: &str) -> String {
    match format {
        Format::Csv => {
            let mut s = format!("# {}\n{}\n", header(hash), table.columns.join(","));
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(cell_text).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: serde_json::Map<String, serde_json::Value> = table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), cell_json(v)))
                        .collect();
                    serde_json::Value::Object(obj)
                })
                .collect();
            let doc = serde_json::json!({
                "header": header(hash),
                "columns": table.columns,
                "rows": rows,
            });
            let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
            s.push('\n');
            s
        }
    }
}

/// Renders a JSON report with the header embedded.
pub fn render_report<T: Serialize>(report: &T, hash: &str) -> String {
    let doc = serde_json::json!({ "header": header(hash), "report": report });
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes `text` to the target; notes go to a `.notes.txt` sidecar next to a
/// file target, or to `err` for stdout.
pub fn emit(
    target: &Target,
    text: &str,
    notes: &[String],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write output: {e}"));
    match &target.path {
        None => {
            out.write_all(text.as_bytes()).map_err(io)?;
            for n in notes {
                writeln!(err, "note: {n}").map_err(io)?;
            }
        }
        Some(path) => {
            write_file(path, text)?;
            if !notes.is_empty() {
                let mut side = path.as_os_str().to_owned();
                side.push(".notes.txt");
                write_file(Path::new(&side), &(notes.join("\n") + "\n"))?;
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}
