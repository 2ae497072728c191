//! CSV and JSON output with atomic writes, and plain number-list input.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Fixed format with 17 significant digits, so equal bits give equal text.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table built in memory with a fixed header.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    columns: usize,
    text: String,
}

/// One cell of a [`Csv`] row.
pub enum Cell<'a> {
    F(f64),
    I(usize),
    U(u64),
    B(bool),
    S(&'a str),
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut text = String::new();
        let names: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        text.push_str(&names.join(","));
        text.push('\n');
        Csv {
            columns: header.len(),
            text,
        }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(v) => self.text.push_str(&fmt_float(*v)),
                Cell::I(v) => write!(self.text, "{v}").expect("write to string"),
                Cell::U(v) => write!(self.text, "{v}").expect("write to string"),
                Cell::B(v) => self.text.push_str(if *v { "true" } else { "false" }),
                Cell::S(v) => self.text.push_str(v),
            }
        }
        self.text.push('\n');
    }

    pub fn rows(&self) -> usize {
        self.text.lines().count() - 1
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads numbers separated by whitespace or commas; `#` starts a comment.
pub fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("{}: not a number: {tok}", path.display())))?,
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.1), "-1.0000000000000001e-1");
    }

    #[test]
    fn csv_rows_and_atomic_roundtrip() {
        let mut c = Csv::new(&["n", "x", "ok"]);
        c.row(&[Cell::I(1), Cell::F(0.5), Cell::B(true)]);
        assert_eq!(c.rows(), 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        write_atomic(&p, c.as_str().as_bytes()).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "n,x,ok\n1,5.0000000000000000e-1,true\n");
    }

    #[test]
    fn reads_number_lists() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.txt");
        std::fs::write(&p, "1, 2.5\n# comment\n3e-1 4\n").unwrap();
        assert_eq!(read_numbers(&p).unwrap(), vec![1.0, 2.5, 0.3, 4.0]);
        std::fs::write(&p, "1 x").unwrap();
        assert!(read_numbers(&p).is_err());
    }
}
