//! JSON-lines metrics and traces, CSV summaries.
//!
//! Metrics files hold one [`EpochRecord`] per line, trace files one
//! [`OdTraceRecord`] per line. Field order is fixed by the struct
//! definitions, so equal runs give byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

use super::train::SummaryRow;

pub const SUMMARY_HEADER: &str = "strategy,noise_ratio,assumed,mean_acc,std_acc,repeats";

pub fn write_jsonl<'a, T: Serialize + 'a, W: Write>(
    out: W,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_jsonl_file<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    write_jsonl(File::create(path)?, records)
}

/// Parses one record per non-empty line; any mismatch is reported with its
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Schema(format!("line {}: {e}", i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    read_jsonl(File::open(path)?).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SUMMARY_HEADER.split(','))
        .map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != SUMMARY_HEADER {
        return Err(Error::Schema(format!("summary header must be `{SUMMARY_HEADER}`")));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Schema(format!("summary row {}: {e}", i + 2))))
        .collect()
}
