use std::collections::HashSet;

use super::{format_timestamp, CsvTable, ParseError, ParseErrorKind};
use crate::model::PassEvents;

pub const EVENTS_HEADER: &str = "cycle,ron,aos0,aosm,aos5,los0,losm,los5";
const COLUMNS: [&str; 8] = ["cycle", "ron", "aos0", "aosm", "aos5", "los0", "losm", "los5"];

/// Flight-dynamics event table. Rows violating the event ordering (no usable
/// window, masking before horizon rise, ...) are rejected.
pub fn parse_events_csv(text: &str) -> Result<Vec<PassEvents>, ParseError> {
    let table = CsvTable::read(text, &COLUMNS)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in table.rows() {
        let events = PassEvents {
            cycle: row.u32("cycle")?,
            relative_orbit: row.u32("ron")?,
            aos0: row.timestamp("aos0")?,
            aosm: row.timestamp("aosm")?,
            aos5: row.timestamp("aos5")?,
            los0: row.timestamp("los0")?,
            losm: row.timestamp("losm")?,
            los5: row.timestamp("los5")?,
        };
        events.validate().map_err(|e| row.err(ParseErrorKind::Invalid(e.to_string())))?;
        if !seen.insert(events.key()) {
            return Err(
                row.err(ParseErrorKind::DuplicateKey { cycle: events.cycle, relative_orbit: events.relative_orbit })
            );
        }
        out.push(events);
    }
    Ok(out)
}

pub fn emit_events_csv(events: &[PassEvents]) -> String {
    let mut out = String::from(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let times = [e.aos0, e.aosm, e.aos5, e.los0, e.losm, e.los5].map(format_timestamp);
        out.push_str(&format!("{},{},{}\n", e.cycle, e.relative_orbit, times.join(",")));
    }
    out
}
