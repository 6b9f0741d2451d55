use std::path::Path;

use crate::error::{Error, Result};

/// Data rows of a tab-separated file with their 1-based line numbers.
pub(crate) struct Rows {
    pub source: String,
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Rows {
    pub fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Ingest {
            path: self.source.clone(),
            line,
            message: message.into(),
        }
    }

    /// Fails unless the header is exactly `expected`.
    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(self.error(
                1,
                format!("expected header `{}`, found `{}`", expected.join("\t"), self.header.join("\t")),
            ));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| self.error(1, format!("missing column `{name}`")))
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn is_separator(cell: &str) -> bool {
    cell.trim_start().starts_with("---")
}

/// Splits `text` into a header and data rows.
///
/// Skips `#` comments, blank lines and `---` lines, and stops at a trailing
/// block whose first cell reads `Notes` (exporter footnotes). Short rows
/// after a `---` line are footnote text and are dropped too.
pub(crate) fn split(text: &str, source: &str) -> Result<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut footnotes = false;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest {
            path: source.to_string(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        if is_separator(&cells[0]) {
            footnotes = header.is_some();
            continue;
        }
        if header.is_none() {
            header = Some(cells);
            continue;
        }
        if cells[0] == "Notes" && cells.iter().skip(1).all(|c| c.is_empty()) {
            break;
        }
        if footnotes && cells.len() < header.as_ref().map_or(0, Vec::len) {
            continue;
        }
        rows.push((line, cells));
    }
    let header = header.ok_or_else(|| Error::Ingest {
        path: source.to_string(),
        line: 0,
        message: "file has no header row".into(),
    })?;
    Ok(Rows {
        source: source.to_string(),
        header,
        rows,
    })
}

pub(crate) fn cell<'a>(rows: &Rows, line: usize, cells: &'a [String], index: usize, name: &str) -> Result<&'a str> {
    cells
        .get(index)
        .map(String::as_str)
        .ok_or_else(|| rows.error(line, format!("row has no `{name}` cell")))
}

pub(crate) fn parse_num<T: std::str::FromStr>(rows: &Rows, line: usize, text: &str, name: &str) -> Result<T> {
    text.parse()
        .map_err(|_| rows.error(line, format!("cannot read `{text}` as {name}")))
}
