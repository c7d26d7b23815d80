use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::timing::TimingRecord;
use super::BerRecord;
use crate::error::{Error, Result};

/// Column order of the results file.
pub const RESULTS_HEADER: [&str; 10] = [
    "detector",
    "modulation",
    "n_symbols",
    "n_dims",
    "snr_db",
    "realizations",
    "bits_total",
    "bit_errors",
    "ber",
    "mean_detect_time_s",
];

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {expected_len} columns, found {len}"),
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Writes the results CSV. An empty slice yields a header-only file.
pub fn write_results(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    if records.is_empty() {
        w.write_record(RESULTS_HEADER).map_err(|e| csv_error(path, e))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a results CSV written by [`write_results`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<BerRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header, expected {}", RESULTS_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in rdr.deserialize::<BerRecord>() {
        let record = row.map_err(|e| csv_error(path, e))?;
        records.push(record);
    }
    Ok(records)
}

/// Writes per-detector `(snr_db, ber)` series. Each series starts with a
/// `# <detector>` comment and a `snr_db,ber` header; series are separated by
/// a blank line and appear in first-occurrence order.
pub fn emit_plot_data(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::Config("no records to plot".into()));
    }
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.detector.as_str()) {
            names.push(&r.detector);
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for (i, name) in names.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            writeln!(out, "# {name}")?;
            writeln!(out, "snr_db,ber")?;
            for r in records.iter().filter(|r| r.detector == *name) {
                writeln!(out, "{},{}", r.snr_db, r.ber)?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Writes timing records as CSV.
pub fn write_timing(records: &[TimingRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
