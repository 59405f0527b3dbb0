//! Comma-delimited text tables with an optional header line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One data row with its 1-based line number.
#[derive(Debug, Clone)]
pub struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub header: Option<Vec<String>>,
    pub rows: Vec<Row>,
}

impl Table {
    /// Reads a table. Blank lines and lines starting with `#` are skipped. The
    /// first remaining line is a header when its first field is not an integer.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(path, &text))
    }

    pub fn parse(path: &Path, text: &str) -> Self {
        let mut header = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            if header.is_none() && rows.is_empty() && fields[0].parse::<i64>().is_err() {
                header = Some(fields);
                continue;
            }
            rows.push(Row { line: i + 1, fields });
        }
        Self {
            path: path.to_path_buf(),
            header,
            rows,
        }
    }

    pub fn parse_error(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    pub fn usize_field(&self, row: &Row, col: usize) -> Result<usize> {
        let f = row
            .fields
            .get(col)
            .ok_or_else(|| self.parse_error(row.line, format!("missing column {col}")))?;
        f.parse()
            .map_err(|_| self.parse_error(row.line, format!("`{f}` is not a non-negative integer")))
    }

    /// Parses columns `from..` as finite reals.
    pub fn real_fields(&self, row: &Row, from: usize) -> Result<Vec<f64>> {
        row.fields[from.min(row.fields.len())..]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.parse_error(row.line, format!("`{f}` is not a finite number"))),
            })
            .collect()
    }
}

/// Writes `header` and `rows` as comma-separated lines.
pub fn write_table<I, R>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<str>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r.as_ref());
        out.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip decimal form of each value, comma-joined.
pub fn join_reals(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{v:?}"));
    }
    s
}
