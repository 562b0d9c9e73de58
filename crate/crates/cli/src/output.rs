//! CSV tables and optional SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Column of a table: a header like `t[s]` and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub header: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: &str, unit: &str, values: Vec<f64>) -> Column {
        Column { header: format!("{name}[{unit}]"), values }
    }
}

/// Twelve significant digits, scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn render_csv(columns: &[Column]) -> String {
    let rows = columns.iter().map(|c| c.values.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into memory cannot fail.
    w.write_record(columns.iter().map(|c| c.header.as_str())).expect("in-memory write");
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| c.values.get(r).map_or_else(String::new, |v| format_value(*v))))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of ASCII fields")
}

/// Writes tables under one directory.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub svg: bool,
    written: Vec<PathBuf>,
    notes: Vec<String>,
}

impl Output {
    pub fn new(dir: PathBuf, svg: bool) -> Output {
        Output { dir, svg, written: Vec::new(), notes: Vec::new() }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Summary lines for the terminal, kept even when a check fails later.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.dir).map_err(|source| CliError::Io { path: self.dir.clone(), source })?;
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    /// `<stem>.csv`, plus `<stem>.svg` plotting every later column against
    /// the first when plots are enabled and `plot` is set.
    pub fn table(&mut self, stem: &str, columns: &[Column], plot: bool) -> Result<(), CliError> {
        self.write(&format!("{stem}.csv"), &render_csv(columns))?;
        if self.svg && plot && columns.len() > 1 {
            self.write(&format!("{stem}.svg"), &render_svg(stem, columns))?;
        }
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, text)
    }
}

/// Output directory: the flag, then `ATOMFLUX_OUT`, then the scenario's.
pub fn resolve_dir(flag: Option<&Path>, env: Option<&str>, scenario: &Path) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|e| !e.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| scenario.to_path_buf())
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn render_svg(title: &str, columns: &[Column]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let x = &columns[0].values;
    let finite = |v: &&f64| v.is_finite();
    let (x_lo, x_hi) = bounds(x.iter().filter(finite));
    let (y_lo, y_hi) = bounds(columns[1..].iter().flat_map(|c| c.values.iter()).filter(finite));
    let sx = |v: f64| pad + (v - x_lo) / (x_hi - x_lo) * (w - 2.0 * pad);
    let sy = |v: f64| h - pad - (v - y_lo) / (y_hi - y_lo) * (h - 2.0 * pad);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    let _ = writeln!(out, r#"<text x="{pad}" y="20">{title}</text>"#);
    let _ = writeln!(out, r#"<text x="{pad}" y="{}">{} .. {} {}</text>"#, h - 15.0, short(x_lo), short(x_hi), columns[0].header);
    let _ = writeln!(out, r#"<text x="5" y="{}">{}</text><text x="5" y="{}">{}</text>"#, h - pad, short(y_lo), pad + 10.0, short(y_hi));
    for (i, c) in columns[1..].iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = x
            .iter()
            .zip(&c.values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.1},{:.1}", sx(a), sy(b)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#, points.join(" "));
        let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, w - pad - 150.0, pad + 14.0 * (i as f64 + 1.0), c.header);
    }
    out.push_str("</svg>\n");
    out
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn short(v: f64) -> String {
    format!("{v:.3e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_value(0.611881972794), "6.11881972794e-1");
        assert_eq!(format_value(-2.5e-5), "-2.50000000000e-5");
    }

    #[test]
    fn header_and_ragged_rows() {
        let csv = render_csv(&[Column::new("t", "s", vec![0.0, 1.0]), Column::new("J", "1/s", vec![2.0])]);
        assert_eq!(csv, "t[s],J[1/s]\n0.00000000000e0,2.00000000000e0\n1.00000000000e0,\n");
    }

    #[test]
    fn flag_beats_environment_beats_config() {
        let cfg = Path::new("cfg");
        assert_eq!(resolve_dir(Some(Path::new("flag")), Some("env"), cfg), PathBuf::from("flag"));
        assert_eq!(resolve_dir(None, Some("env"), cfg), PathBuf::from("env"));
        assert_eq!(resolve_dir(None, Some(""), cfg), PathBuf::from("cfg"));
        assert_eq!(resolve_dir(None, None, cfg), PathBuf::from("cfg"));
    }
}
