//! Plain CSV tables, JSON files and empirical CDF grids.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Probability levels of every CDF table: `0, 0.01, …, 1`.
pub const CDF_LEVELS: usize = 101;

/// Empirical quantiles at [`CDF_LEVELS`] evenly spaced probabilities, using
/// the lower order statistic. Empty input gives an empty grid.
pub fn cdf_grid(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (0..CDF_LEVELS)
        .map(|i| {
            let q = i as f64 / (CDF_LEVELS - 1) as f64;
            sorted[((q * n as f64).ceil() as usize).clamp(1, n) - 1]
        })
        .collect()
}

/// A CDF table with one column per named series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfTable {
    pub columns: Vec<String>,
    /// `grid[series][level]`.
    pub grid: Vec<Vec<f64>>,
}

impl CdfTable {
    pub fn new() -> Self {
        Self { columns: Vec::new(), grid: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, values: &[f64]) {
        self.columns.push(name.into());
        self.grid.push(cdf_grid(values));
    }

    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(std::iter::once("cdf".to_string()).chain(self.columns.iter().cloned()));
        for i in 0..CDF_LEVELS {
            let mut row = vec![fmt_f64(i as f64 / (CDF_LEVELS - 1) as f64)];
            row.extend(self.grid.iter().map(|g| g.get(i).map_or(String::new(), |v| fmt_f64(*v))));
            table.row(row);
        }
        table.finish()
    }
}

impl Default for CdfTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Shortest round-trip representation, so files are stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Minimal CSV builder; fields never contain separators.
pub struct CsvTable {
    text: String,
    width: usize,
}

impl CsvTable {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(header: I) -> Self {
        let cols: Vec<String> = header.into_iter().map(|s| s.as_ref().to_string()).collect();
        let mut text = cols.join(",");
        text.push('\n');
        Self { text, width: cols.len() }
    }

    pub fn row<I: IntoIterator<Item = S>, S: AsRef<str>>(&mut self, fields: I) {
        let fields: Vec<String> = fields.into_iter().map(|s| s.as_ref().to_string()).collect();
        debug_assert_eq!(fields.len(), self.width);
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_text(dir, name, &text)
}
