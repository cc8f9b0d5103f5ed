//! Canonical serialization and atomic report files.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

/// Pretty JSON with keys sorted at every level and floats in shortest
/// round-trip form, terminated by a newline. Identical values give
/// identical bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    // `Value` objects are ordered maps, so the round trip sorts every key
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// CSV text with a header row.
pub fn csv_string<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
