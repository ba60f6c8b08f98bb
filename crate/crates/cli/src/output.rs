//! Result files: one JSON report per run, CSV tables, gnuplot `.dat` files and,
//! on request, plot scripts.

use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type WriteResult<T> = std::result::Result<T, WriteError>;

/// A pass/fail assertion of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit: Some(limit),
            passed: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit: Some(limit),
            passed: value >= limit,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: f64::from(u8::from(ok)),
            limit: None,
            passed: ok,
        }
    }
}

/// Plot of two columns of a table.
#[derive(Debug, Clone)]
pub struct Plot {
    pub x: usize,
    pub y: usize,
    pub style: &'static str,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub stem: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub plot: Option<Plot>,
}

impl Table {
    pub fn new(stem: impl Into<String>, columns: &[&'static str]) -> Self {
        Table {
            stem: stem.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn plotted(mut self, x: usize, y: usize, style: &'static str) -> Self {
        self.plot = Some(Plot { x, y, style });
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// What an experiment produced.
#[derive(Debug, Clone)]
pub struct Report {
    pub result: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct Writer {
    pub dir: PathBuf,
    pub gnuplot: bool,
}

impl Writer {
    pub fn new(dir: &Path, gnuplot: bool) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            gnuplot,
        })
    }

    pub fn json(&self, file: &str, value: &impl Serialize) -> WriteResult<PathBuf> {
        let path = self.dir.join(file);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn table(&self, table: &Table) -> WriteResult<()> {
        let mut csv = csv::Writer::from_path(self.dir.join(format!("{}.csv", table.stem)))?;
        csv.write_record(&table.columns)?;
        for row in &table.rows {
            csv.write_record(row.iter().map(|v| v.to_string()))?;
        }
        csv.flush()?;

        let dat = self.dir.join(format!("{}.dat", table.stem));
        let mut f = fs::File::create(&dat)?;
        writeln!(f, "# {}", table.columns.join(" "))?;
        for row in &table.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(f, "{}", line.join(" "))?;
        }

        if let (true, Some(plot)) = (self.gnuplot, &table.plot) {
            let mut gp = fs::File::create(self.dir.join(format!("{}.gp", table.stem)))?;
            writeln!(gp, "set terminal pngcairo size 900,700")?;
            writeln!(gp, "set output '{}.png'", table.stem)?;
            writeln!(gp, "set xlabel '{}'", table.columns[plot.x])?;
            writeln!(gp, "set ylabel '{}'", table.columns[plot.y])?;
            writeln!(
                gp,
                "plot '{}.dat' using {}:{} with {} title '{}'",
                table.stem,
                plot.x + 1,
                plot.y + 1,
                plot.style,
                table.stem
            )?;
        }
        Ok(())
    }
}
