//! Deterministic CSV and JSON emission.
//!
//! Floats are printed with nine significant digits in scientific notation.
//! Files are written to a temporary sibling and renamed into place, so a failed
//! run never leaves a partial file behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0.00000000e0".
        return format!("{:.8e}", 0.0);
    }
    format!("{x:.8e}")
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    let res = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

/// Renders metadata comment lines, a header row and numeric rows.
pub fn render_csv(metadata: &[(String, String)], columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format_float(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, metadata: &[(String, String)], columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, render_csv(metadata, columns, rows).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Validation(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Parses a CSV written by [`write_csv`] back into its header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| crate::Error::Validation(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(format_float(1.7e-3), "1.70000000e-3");
        assert_eq!(format_float(-0.0), "0.00000000e0");
        assert_eq!(format_float(123456789.0), "1.23456789e8");
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let meta = vec![("q".to_string(), "1".to_string())];
        write_csv(&path, &meta, &["a", "b"], &[vec![1.0, 2.5e-7], vec![-3.0, 0.0]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# q: 1\na,b\n"));
        assert!(!temp_path(&path).exists());
        let (h, rows) = read_csv(&path).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec![1.0, 2.5e-7], vec![-3.0, 0.0]]);
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("s.csv");
        assert!(write_csv(&path, &[], &["a"], &[]).is_err());
        assert!(!path.exists());
    }
}
