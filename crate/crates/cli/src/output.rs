//! CSV, JSON manifests and gnuplot scripts.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub versions: String,
    pub outputs: Vec<String>,
    pub residual_summary: BTreeMap<String, f64>,
    pub wall_time: f64,
}

pub fn versions() -> String {
    format!("dsine {}", env!("CARGO_PKG_VERSION"))
}

/// A float with 17 significant digits; `None` becomes an empty field.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Collects output files and writes them under one directory.
pub struct Sink {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Self {
        Sink {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.display().to_string());
        Ok(path)
    }

    /// A CSV with a header row; refuses to create a file without data rows.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        if rows.is_empty() {
            bail!("no rows for {name}");
        }
        let mut out = header.join(",");
        out.push('\n');
        for r in rows {
            if r.len() != header.len() {
                bail!(
                    "row of width {} in {name}, expected {}",
                    r.len(),
                    header.len()
                );
            }
            out.push_str(&r.join(","));
            out.push('\n');
        }
        self.write(name, &out)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, &(text + "\n"))
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, text)
    }
}

/// Scatter heatmaps of the named columns over the `(s, y)` plane.
pub fn heatmap_script(csv: &str, columns: &[(usize, &str)], png: &str) -> String {
    let mut g = String::new();
    let _ = writeln!(g, "set datafile separator ','");
    let _ = writeln!(g, "set terminal pngcairo size {},480", 520 * columns.len());
    let _ = writeln!(g, "set output '{png}'");
    let _ = writeln!(g, "set multiplot layout 1,{}", columns.len());
    let _ = writeln!(
        g,
        "set xlabel 's'\nset ylabel 'y'\nset cblabel 'log10 |residual|'"
    );
    for (col, title) in columns {
        let _ = writeln!(g, "set title '{title}'");
        let _ = writeln!(
            g,
            "plot '{csv}' every ::1 using 2:1:(valid(${col}) ? log10(abs(${col})) : NaN) with points pt 5 ps 0.6 palette notitle"
        );
    }
    let _ = writeln!(g, "unset multiplot");
    format!("valid(x) = (x == x && x != 0)\n{g}")
}

/// Curves of columns against column 1, on a log scale when `log_y`.
pub fn curve_script(
    csv: &str,
    columns: &[(usize, &str)],
    png: &str,
    xlabel: &str,
    log_y: bool,
) -> String {
    let mut g = String::new();
    let _ = writeln!(g, "set datafile separator ','");
    let _ = writeln!(g, "set key autotitle columnhead");
    let _ = writeln!(g, "set terminal pngcairo size 800,480");
    let _ = writeln!(g, "set output '{png}'");
    let _ = writeln!(g, "set xlabel '{xlabel}'");
    if log_y {
        let _ = writeln!(g, "set logscale y");
    }
    let plots: Vec<String> = columns
        .iter()
        .map(|(c, t)| format!("'{csv}' using 1:(abs(${c})) with lines title '{t}'"))
        .collect();
    let _ = writeln!(g, "plot {}", plots.join(", \\\n     "));
    g
}
