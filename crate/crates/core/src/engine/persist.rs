//! CSV period logs and JSON summaries.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::metrics::{RunSummary, VehicleRecord};
use crate::error::{Error, Result};

const LOG_HEADER: [&str; 11] = [
    "period",
    "vehicle_id",
    "policy",
    "bs_id",
    "psi_rad",
    "layer",
    "rate_bps",
    "regret",
    "regret1",
    "regret2",
    "synced",
];

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Serializes the log to CSV text; an empty log yields the header alone.
pub fn log_to_csv(records: &[VehicleRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(LOG_HEADER)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

pub fn write_log(path: impl AsRef<Path>, records: &[VehicleRecord]) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    fs::write(path, log_to_csv(records)?).map_err(|e| Error::io(path, e))
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<VehicleRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(bytes.as_slice()).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `<stem>.csv` (when `log` is given) and `<stem>.json`.
pub fn persist(log: Option<&[VehicleRecord]>, summary: &RunSummary, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    if let Some(log) = log {
        let name = format!("{stem}.csv");
        write_log(dir.join(&name), log)?;
        written.push(name);
    }
    let name = format!("{stem}.json");
    write_json(dir.join(&name), summary)?;
    written.push(name);
    Ok(written)
}
