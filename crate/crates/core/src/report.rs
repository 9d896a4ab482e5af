//! Output helpers: CSV files with a commented header that echoes the run
//! configuration, and pretty JSON summaries. Nothing written here depends on
//! wall-clock time, so identical runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Bumped whenever a column or summary key changes meaning.
pub const SCHEMA_VERSION: &str = "magfrac/1";

/// Writes `# schema: ...` and `# config: <json>` before the CSV rows.
pub fn write_csv<T: Serialize, C: Serialize>(path: &Path, config: &C, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# schema: {SCHEMA_VERSION}")?;
    writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
