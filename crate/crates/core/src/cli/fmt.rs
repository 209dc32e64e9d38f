//! Numeric output formatting: every number the CLI writes carries twelve
//! significant digits, and parsing a formatted value and formatting it
//! again reproduces the same text.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Twelve-significant-digit rendering. Exact integers of moderate size
/// print plainly; everything else uses scientific notation, which any CSV
/// consumer parses.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    if x == x.trunc() && x.abs() < 1e12 {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

/// The nearest f64 to the twelve-digit rendering of `x`. Applied to
/// JSON-bound values so serialized documents carry the same precision as
/// the CSVs.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    fmt_sig(x).parse().expect("fmt_sig output parses back")
}

/// Quantize every number inside a JSON value, in place.
pub fn quantize_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if n.is_f64() {
                    if let Some(q) = serde_json::Number::from_f64(quantize(x)) {
                        *n = q;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(quantize_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(quantize_json),
        _ => {}
    }
}

/// Serialize to pretty JSON with quantized numbers and a trailing newline.
pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut doc = serde_json::to_value(value)
        .map_err(|e| Error::invalid(format!("serializing {}: {e}", path.display())))?;
    quantize_json(&mut doc);
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::invalid(format!("serializing {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write CSV rows with a header; all cells already rendered as strings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = std::io::BufWriter::new(file);
    writer
        .write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}
