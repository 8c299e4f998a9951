//! CSV tables: header row plus rectangular string rows. Numbers are formatted
//! by the caller with Rust's locale-free `Display`, so `.` is always the
//! decimal separator.

use crate::error::{Error, Result};

pub fn emit_table<S: AsRef<str>>(columns: &[S], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let fmt_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(columns.iter().map(|c| c.as_ref())).map_err(fmt_err)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(Error::Format(format!("row {i} has {} fields, header has {}", row.len(), columns.len())));
        }
        w.write_record(row).map_err(fmt_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Inverse of [`emit_table`]. Lines starting with `#` are comments.
pub fn parse_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let columns: Vec<String> = r.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((columns, rows))
}
