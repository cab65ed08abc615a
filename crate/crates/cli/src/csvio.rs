//! Minimal CSV emission for plot-ready curve and table data.

use std::fmt::Write as _;
use std::path::Path;

pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> CsvTable {
        CsvTable { header: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = String::new();
        writeln!(text, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(text, "{}", row.join(","))?;
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

/// Two-column curve file (t/lag, value).
pub fn write_curve(path: &Path, x_name: &str, xs: &[f64], y_name: &str, ys: &[f64]) -> anyhow::Result<()> {
    let mut table = CsvTable::new(&[x_name, y_name]);
    for (x, y) in xs.iter().zip(ys.iter()) {
        table.push(vec![fmt(*x), fmt(*y)]);
    }
    table.write(path)
}
