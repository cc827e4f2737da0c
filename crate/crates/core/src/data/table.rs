use std::path::Path;

use super::{sha256_hex, DataKind, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            delimiter: b',',
        }
    }
}

/// Parses a rectangular numeric table into a real-valued dataset.
pub fn parse_csv(bytes: &[u8], opts: CsvOptions, source: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header_rows = usize::from(opts.has_header);
    let mut width = None;
    let mut samples = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1 + header_rows;
        let record = record.map_err(|e| Error::Parse {
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row,
                    col: record.len().min(w) + 1,
                    msg: format!("ragged row: {} fields, expected {w}", record.len()),
                })
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("not a number: `{cell}`"),
            })?;
            samples.push(x);
        }
    }
    let width = width.ok_or_else(|| Error::Parse {
        row: 1,
        col: 1,
        msg: "no data rows".into(),
    })?;
    Dataset::with_hash(samples, width, DataKind::Real, source.to_string(), sha256_hex(bytes))
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    load_csv_with(
        path,
        CsvOptions {
            has_header,
            ..Default::default()
        },
    )
}

pub fn load_csv_with(path: &Path, opts: CsvOptions) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    parse_csv(&bytes, opts, &path.display().to_string())
}
