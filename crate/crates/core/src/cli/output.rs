//! Deterministic text outputs.
//!
//! Field files hold one nodal value per line in vertex order of the mesh
//! named in the header:
//!
//! ```text
//! fieldfmt 1
//! mesh macro_n32
//! values 1089
//! 1.0000000000000000e0
//! ...
//! ```
//!
//! Floats are written with 17 significant digits so that reading a file
//! reproduces the values bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    /// Name of the mesh whose vertex order the values follow.
    pub mesh: String,
    pub values: Vec<f64>,
}

pub fn format_field(mesh: &str, values: &[f64]) -> String {
    let mut out = String::with_capacity(32 * values.len() + 64);
    out.push_str("fieldfmt 1\n");
    let _ = writeln!(out, "mesh {mesh}");
    let _ = writeln!(out, "values {}", values.len());
    for v in values {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn parse_field(text: &str) -> Result<FieldFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of field file, expected {what}"),
        })
    };
    let (line, header) = next("header")?;
    if header != "fieldfmt 1" {
        return Err(Error::Parse {
            line,
            message: format!("expected `fieldfmt 1`, found `{header}`"),
        });
    }
    let (line, mesh) = next("mesh name")?;
    let mesh = mesh
        .strip_prefix("mesh ")
        .ok_or_else(|| Error::Parse {
            line,
            message: "expected `mesh <name>`".into(),
        })?
        .trim()
        .to_string();
    let (line, count) = next("value count")?;
    let count: usize = count
        .strip_prefix("values ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: "expected `values <count>`".into(),
        })?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, v) = next("value")?;
        values.push(v.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid value `{v}`"),
        })?);
    }
    if let Some((line, extra)) = lines.next() {
        return Err(Error::Parse {
            line,
            message: format!("trailing content `{extra}`"),
        });
    }
    Ok(FieldFile { mesh, values })
}

pub fn write_field(mesh: &str, values: &[f64], path: &Path) -> Result<()> {
    write_text(path, &format_field(mesh, values))
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field(&text).map_err(|e| Error::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

/// Tabular output rendered either as CSV or as a whitespace-separated
/// `.dat` table with a `#` header, as read by gnuplot.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_dat(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    write_text(path, &table.to_csv())
}

pub fn write_dat(table: &Table, path: &Path) -> Result<()> {
    write_text(path, &table.to_dat())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Time label used in output file names: fixed six decimals with trailing
/// zeros removed, so `0.25 → "0.25"` and `0 → "0"`.
pub fn time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}
