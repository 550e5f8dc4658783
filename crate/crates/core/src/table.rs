//! Minimal named-column CSV tables.
//!
//! Values are plain comma-separated fields without quoting; numbers are
//! written with 17 significant digits so they round-trip bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Source line of each row (1-based), kept for error messages.
    lines: Vec<usize>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new(), lines: Vec::new() }
    }

    /// Builds a table of numeric columns of equal length.
    pub fn from_columns(columns: &[(&str, &[f64])]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::validation("table", "columns differ in length"));
        }
        let mut t = Table::new(columns.iter().map(|c| c.0));
        for i in 0..n {
            t.push_row(columns.iter().map(|c| format_f64(c.1[i])))?;
        }
        Ok(t)
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) -> Result<()> {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        if row.len() != self.header.len() {
            return Err(Error::validation(
                "table",
                format!("row has {} fields, header has {}", row.len(), self.header.len()),
            ));
        }
        self.lines.push(self.rows.len() + 2);
        self.rows.push(row);
        Ok(())
    }

    pub fn push_f64_row(&mut self, row: &[f64]) -> Result<()> {
        self.push_row(row.iter().map(|&x| format_f64(x)))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column `{name}`") })
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    /// Parses a column as floats; non-finite values are rejected.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(r, &line)| {
                let v: f64 = r[j]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("column `{name}`: `{}` is not a number", r[j]) })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line, msg: format!("column `{name}`: non-finite value") });
                }
                Ok(v)
            })
            .collect()
    }

    /// Like [`Table::column_f64`] but returns `None` when the column is absent.
    pub fn optional_column_f64(&self, name: &str) -> Result<Option<Vec<f64>>> {
        if self.has_column(name) {
            self.column_f64(name).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Parses a column in which empty cells mean "not available".
    pub fn column_opt_f64(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .zip(&self.lines)
            .map(|(r, &line)| {
                let cell = r[j].trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(Error::Parse { line, msg: format!("column `{name}`: `{cell}` is not a finite number") }),
                }
            })
            .collect()
    }

    /// Parses CSV text. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut table = Table { header, rows: Vec::new(), lines: Vec::new() };
        for (line, l) in lines {
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != table.header.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", table.header.len(), row.len()),
                });
            }
            table.rows.push(row);
            table.lines.push(line);
        }
        Ok(table)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}
