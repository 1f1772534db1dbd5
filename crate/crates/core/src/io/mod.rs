//! Reading and writing event logs (XES, CSV) and DFG edge lists.

mod csv;
mod dfg;
mod xes;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub use self::csv::{parse_csv, write_csv, CsvSchema};
pub use self::dfg::{parse_dfg, write_dfg};
pub use self::xes::{parse_xes, parse_xes_with, write_xes, XesOptions};

use crate::error::Result;
use crate::log::EventLog;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogFormat {
    Xes(XesOptions),
    Csv(CsvSchema),
}

impl LogFormat {
    /// Picks XES or CSV from the file extension (`.xes`, `.xes.gz`, `.csv`).
    pub fn guess(path: &Path, schema: CsvSchema) -> LogFormat {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if name.ends_with(".csv") || name.ends_with(".csv.gz") {
            LogFormat::Csv(schema)
        } else {
            LogFormat::Xes(XesOptions::default())
        }
    }
}

/// Opens a file for reading; the error names the path.
pub fn open(path: &Path) -> Result<File> {
    File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Opens a file, transparently unwrapping a gzip layer.
pub fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let mut file = BufReader::new(open(path)?);
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let head = std::io::Cursor::new(magic[..n].to_vec());
    let chained = head.chain(file);
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(flate2::read::GzDecoder::new(chained)))
    } else {
        Ok(Box::new(chained))
    }
}

pub fn read_log(path: &Path, format: &LogFormat) -> Result<EventLog> {
    let reader = open_maybe_gz(path)?;
    match format {
        LogFormat::Xes(opts) => parse_xes_with(reader, opts),
        LogFormat::Csv(schema) => parse_csv(reader, schema),
    }
}

pub fn write_log(path: &Path, log: &EventLog, format: &LogFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        LogFormat::Xes(_) => write_xes(log, &mut w)?,
        LogFormat::Csv(schema) => write_csv(log, schema, &mut w)?,
    }
    w.flush()?;
    Ok(())
}
