use std::fmt::Write as _;
use std::path::Path;

use super::{atomic_write, FORMAT_VERSION};
use crate::error::Result;

/// Comment lines opening every plot-data file.
#[derive(Debug, Clone, Default)]
pub struct PlotHeader {
    pub title: String,
    pub config_hash: String,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl PlotHeader {
    pub fn new(title: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        PlotHeader { title: title.into(), config_hash: config_hash.into(), seed, notes: Vec::new() }
    }

    pub fn note(mut self, line: impl Into<String>) -> Self {
        self.notes.push(line.into());
        self
    }

    fn render(&self, out: &mut String) {
        let _ = writeln!(out, "# {}", self.title);
        let _ = writeln!(out, "# format_version = {FORMAT_VERSION}");
        let _ = writeln!(out, "# config_hash = {}", self.config_hash);
        let _ = writeln!(out, "# seed = {}", self.seed);
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
    }
}

/// 17 significant digits; missing values print as `nan`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Whitespace-separated columns under a `# name name ...` line.
pub fn write_columns(path: &Path, header: &PlotHeader, names: &[&str], columns: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    header.render(&mut out);
    let _ = writeln!(out, "# {}", names.join(" "));
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| format_number(c.get(r).copied().unwrap_or(f64::NAN))).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    atomic_write(path, out.as_bytes())
}

/// Gnuplot "nonuniform matrix" layout: the first row holds the column count and
/// column axis, every further row its row-axis value followed by the entries.
pub fn write_matrix(
    path: &Path,
    header: &PlotHeader,
    row_axis: (&str, &[f64]),
    col_axis: (&str, &[f64]),
    values: &[Vec<Option<f64>>],
) -> Result<()> {
    let mut out = String::new();
    header.render(&mut out);
    let _ = writeln!(out, "# rows: {}; columns: {}; missing entries are nan", row_axis.0, col_axis.0);
    let mut first = vec![format_number(col_axis.1.len() as f64)];
    first.extend(col_axis.1.iter().map(|&x| format_number(x)));
    let _ = writeln!(out, "{}", first.join(" "));
    for (y, row) in row_axis.1.iter().zip(values) {
        let mut line = vec![format_number(*y)];
        line.extend(row.iter().map(|v| format_number(v.unwrap_or(f64::NAN))));
        let _ = writeln!(out, "{}", line.join(" "));
    }
    atomic_write(path, out.as_bytes())
}
