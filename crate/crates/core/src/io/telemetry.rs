use std::collections::HashSet;

use super::{format_timestamp, CsvTable, ParseError, ParseErrorKind};
use crate::model::{GroundWindow, PassKey};

pub const TELEMETRY_HEADER: &str = "cycle,ron,first_frame_utc,last_frame_utc";
const COLUMNS: [&str; 4] = ["cycle", "ron", "first_frame_utc", "last_frame_utc"];

/// First and last telemetry frame of a pass; `frames` is `None` when either
/// timestamp was not recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TelemetryEntry {
    pub key: PassKey,
    pub frames: Option<GroundWindow>,
}

pub fn parse_telemetry_csv(text: &str) -> Result<Vec<TelemetryEntry>, ParseError> {
    let table = CsvTable::read(text, &COLUMNS)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in table.rows() {
        let key = PassKey { cycle: row.u32("cycle")?, relative_orbit: row.u32("ron")? };
        let first = row.opt_timestamp("first_frame_utc")?;
        let last = row.opt_timestamp("last_frame_utc")?;
        let frames = match (first, last) {
            (Some(f), Some(l)) => {
                Some(GroundWindow::new(f, l).map_err(|e| row.err(ParseErrorKind::Invalid(e.to_string())))?)
            }
            _ => None,
        };
        if !seen.insert(key) {
            return Err(row.err(ParseErrorKind::DuplicateKey { cycle: key.cycle, relative_orbit: key.relative_orbit }));
        }
        out.push(TelemetryEntry { key, frames });
    }
    Ok(out)
}

/// Unrecorded entries are written with blank frame fields.
pub fn emit_telemetry_csv(entries: &[TelemetryEntry]) -> String {
    let mut out = String::from(TELEMETRY_HEADER);
    out.push('\n');
    for e in entries {
        let (first, last) = match e.frames {
            Some(w) => (format_timestamp(w.lock_start()), format_timestamp(w.lock_end())),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!("{},{},{first},{last}\n", e.key.cycle, e.key.relative_orbit));
    }
    out
}
