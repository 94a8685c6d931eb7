//! File formats and synthetic dataset generation.
//!
//! CSV headers are fixed:
//!
//! ```text
//! telemetry: cycle,ron,first_frame_utc,last_frame_utc
//! events:    cycle,ron,aos0,aosm,aos5,los0,losm,los5
//! trace:     ron,cycle_step,aos_offset_s,los_offset_s,reward
//! ```
//!
//! Timestamps are ISO-8601 UTC with millisecond precision, e.g.
//! `2021-02-03T04:05:06.789Z`.

mod config;
mod dataset;
mod events;
mod generator;
mod metrics;
mod schedule;
mod snapshot;
mod telemetry;
mod trace;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Timelike};
use thiserror::Error;

use crate::model::Timestamp;

pub use config::{ConfigError, MissionConfig};
pub use dataset::{merge_dataset, DatasetError, MissionDataset};
pub use events::{emit_events_csv, parse_events_csv, EVENTS_HEADER};
pub use generator::{
    calibrate_seed, generate_dataset, CorruptionModel, GeneratorConfig, VisibilityModel, CALIBRATED_SEED,
};
pub use metrics::{emit_metrics, parse_metrics, MetricsRecord};
pub use schedule::{emit_schedule, parse_schedule};
pub use snapshot::{emit_snapshot, parse_snapshot, SnapshotError};
pub use telemetry::{emit_telemetry_csv, parse_telemetry_csv, TelemetryEntry, TELEMETRY_HEADER};
pub use trace::{emit_trace_csv, parse_trace_csv, trace_rows, TraceRow, TRACE_HEADER};

pub const EVENTS_FILE: &str = "events.csv";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const CONFIG_FILE: &str = "mission.toml";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Dataset(#[from] DatasetError),
}

fn read_file(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })
}

/// Reads a mission config plus its event and telemetry tables, and fills in
/// baseline outcomes from the config's baseline offsets.
pub fn load_mission(
    config_path: &Path,
    events_path: &Path,
    telemetry_path: &Path,
) -> Result<(MissionConfig, MissionDataset), LoadError> {
    let config = MissionConfig::parse(&read_file(config_path)?)
        .map_err(|source| LoadError::Config { path: config_path.to_path_buf(), source })?;
    let parse_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| LoadError::Parse { path, source }
    };
    let events = parse_events_csv(&read_file(events_path)?).map_err(parse_err(events_path))?;
    let telemetry = parse_telemetry_csv(&read_file(telemetry_path)?).map_err(parse_err(telemetry_path))?;
    let baseline = config.baseline().expect("validated config");
    let dataset = merge_dataset(&config.mission_id, config.orbits_per_cycle, &events, &telemetry)?
        .with_baseline(baseline, config.dump_duration());
    Ok((config, dataset))
}

/// [`load_mission`] on the standard file names inside `dir`.
pub fn load_mission_dir(dir: &Path) -> Result<(MissionConfig, MissionDataset), LoadError> {
    load_mission(&dir.join(CONFIG_FILE), &dir.join(EVENTS_FILE), &dir.join(TELEMETRY_FILE))
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: u64,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MissingHeader,
    UnknownColumn(String),
    MissingColumn(&'static str),
    BadTimestamp(String),
    BadNumber { column: &'static str, value: String },
    DuplicateKey { cycle: u32, relative_orbit: u32 },
    Invalid(String),
    Malformed(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::MissingHeader => write!(f, "missing header row"),
            ParseErrorKind::UnknownColumn(c) => write!(f, "unknown column {c:?}"),
            ParseErrorKind::MissingColumn(c) => write!(f, "missing column {c:?}"),
            ParseErrorKind::BadTimestamp(v) => write!(f, "malformed timestamp {v:?}"),
            ParseErrorKind::BadNumber { column, value } => write!(f, "column {column}: malformed number {value:?}"),
            ParseErrorKind::DuplicateKey { cycle, relative_orbit } => {
                write!(f, "duplicate key (cycle {cycle}, ron {relative_orbit})")
            }
            ParseErrorKind::Invalid(m) => write!(f, "{m}"),
            ParseErrorKind::Malformed(m) => write!(f, "{m}"),
        }
    }
}

impl ParseError {
    pub(crate) fn new(line: u64, kind: ParseErrorKind) -> Self {
        ParseError { line, kind }
    }
}

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

pub fn format_timestamp(t: Timestamp) -> String {
    DateTime::from_timestamp_millis(t.epoch_millis())
        .expect("timestamp within chrono range")
        .format(TIME_FORMAT)
        .to_string()
}

/// Accepts `YYYY-MM-DDTHH:MM:SS[.fff]Z`; rejects sub-millisecond digits.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.fZ").ok()?;
    if naive.nanosecond() % 1_000_000 != 0 {
        return None;
    }
    Timestamp::from_millis(naive.and_utc().timestamp_millis()).ok()
}

/// Header-checked CSV reader shared by the parsers.
pub(crate) struct CsvTable {
    columns: HashMap<String, usize>,
    records: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    pub(crate) fn read(text: &str, expected: &[&'static str]) -> Result<Self, ParseError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut rows = reader.records();
        let header = match rows.next() {
            None => return Err(ParseError::new(1, ParseErrorKind::MissingHeader)),
            Some(r) => r.map_err(csv_error)?,
        };
        let mut columns = HashMap::new();
        for (idx, name) in header.iter().enumerate() {
            let name = name.trim();
            if !expected.contains(&name) {
                return Err(ParseError::new(1, ParseErrorKind::UnknownColumn(name.to_string())));
            }
            if columns.insert(name.to_string(), idx).is_some() {
                return Err(ParseError::new(1, ParseErrorKind::Malformed(format!("repeated column {name:?}"))));
            }
        }
        if let Some(missing) = expected.iter().find(|c| !columns.contains_key(**c)) {
            return Err(ParseError::new(1, ParseErrorKind::MissingColumn(missing)));
        }
        let mut records = Vec::new();
        for row in rows {
            let row = row.map_err(csv_error)?;
            let line = row.position().map_or(0, |p| p.line());
            records.push((line, row));
        }
        Ok(CsvTable { columns, records })
    }

    pub(crate) fn rows(&self) -> impl Iterator<Item = CsvRow<'_>> {
        self.records.iter().map(move |(line, record)| CsvRow { table: self, line: *line, record })
    }
}

pub(crate) struct CsvRow<'a> {
    table: &'a CsvTable,
    pub line: u64,
    record: &'a csv::StringRecord,
}

impl CsvRow<'_> {
    pub(crate) fn field(&self, column: &'static str) -> &str {
        self.record.get(self.table.columns[column]).unwrap_or("").trim()
    }

    pub(crate) fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError::new(self.line, kind)
    }

    pub(crate) fn u32(&self, column: &'static str) -> Result<u32, ParseError> {
        let v = self.field(column);
        v.parse().map_err(|_| self.err(ParseErrorKind::BadNumber { column, value: v.to_string() }))
    }

    pub(crate) fn i64(&self, column: &'static str) -> Result<i64, ParseError> {
        let v = self.field(column);
        v.parse().map_err(|_| self.err(ParseErrorKind::BadNumber { column, value: v.to_string() }))
    }

    pub(crate) fn timestamp(&self, column: &'static str) -> Result<Timestamp, ParseError> {
        let v = self.field(column);
        parse_timestamp(v).ok_or_else(|| self.err(ParseErrorKind::BadTimestamp(v.to_string())))
    }

    /// Blank means absent.
    pub(crate) fn opt_timestamp(&self, column: &'static str) -> Result<Option<Timestamp>, ParseError> {
        if self.field(column).is_empty() {
            Ok(None)
        } else {
            self.timestamp(column).map(Some)
        }
    }
}

fn csv_error(e: csv::Error) -> ParseError {
    let line = e.position().map_or(0, |p| p.line());
    ParseError::new(line, ParseErrorKind::Malformed(e.to_string()))
}

/// Renders milliseconds as decimal seconds without trailing zeros
/// (`30000 -> "30"`, `30250 -> "30.25"`).
pub(crate) fn format_secs(millis: i64) -> String {
    let sign = if millis < 0 { "-" } else { "" };
    let (whole, frac) = (millis.abs() / 1000, millis.abs() % 1000);
    if frac == 0 {
        format!("{sign}{whole}")
    } else {
        let digits = format!("{frac:03}");
        format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

/// Inverse of [`format_secs`]; at most three decimals.
pub(crate) fn parse_secs(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 3 {
        return None;
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) || (body.contains('.') && frac.is_empty()) {
        return None;
    }
    let frac_ms: i64 = if frac.is_empty() { 0 } else { format!("{frac:0<3}").parse().ok()? };
    let ms = whole.parse::<i64>().ok()?.checked_mul(1000)?.checked_add(frac_ms)?;
    Some(if neg { -ms } else { ms })
}
