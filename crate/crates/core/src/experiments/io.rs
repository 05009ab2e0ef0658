//! CSV and SVG emission. CSV is the contract: header row, period decimal
//! separator, 17-significant-digit floats so values round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Round-trippable float formatting (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        CsvWriter {
            buf: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn row_floats(&mut self, cells: &[f64]) {
        let cells: Vec<String> = cells.iter().map(|&x| fmt_float(x)).collect();
        self.row(&cells);
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.buf.as_bytes())
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Minimal polyline chart. Plots are a convenience; CSV carries the data.
pub fn write_svg_polyline(path: &Path, title: &str, series: &[(f64, f64)]) -> Result<()> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const PAD: f64 = 50.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        title
    ));
    svg.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    ));
    if series.len() >= 2 {
        let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in series {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if x_hi <= x_lo {
            x_hi = x_lo + 1.0;
        }
        if y_hi <= y_lo {
            y_hi = y_lo + 1.0;
        }
        let pts: Vec<String> = series
            .iter()
            .map(|&(x, y)| {
                let px = PAD + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
                let py = H - PAD - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * PAD);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{PAD}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">x: [{:.6}, {:.6}]  y: [{:.6}, {:.6}]</text>\n",
            H - PAD / 3.0,
            x_lo, x_hi, y_lo, y_hi
        ));
    }
    svg.push_str("</svg>\n");
    write_bytes(path, svg.as_bytes())
}
