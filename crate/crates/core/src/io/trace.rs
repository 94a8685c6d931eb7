//! Per-orbit offset traces for plotting.
//!
//! One row per cycle step. The offsets are those in force after the learner
//! has absorbed that step's feedback, i.e. what will be commanded on the next
//! pass; `reward` is what the offsets commanded on this pass earned. Steps
//! without recorded telemetry have blank offset and reward fields.

use super::{format_secs, parse_secs, CsvTable, ParseError, ParseErrorKind};
use crate::eval::{RunRecord, StepOutcome};
use crate::model::{Duration, OffsetPair};

pub const TRACE_HEADER: &str = "ron,cycle_step,aos_offset_s,los_offset_s,reward";
const COLUMNS: [&str; 5] = ["ron", "cycle_step", "aos_offset_s", "los_offset_s", "reward"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub relative_orbit: u32,
    /// 1-based position of the pass within the orbit's run.
    pub cycle_step: u32,
    /// `None` for a skipped (unrecorded) step.
    pub offsets: Option<OffsetPair>,
    pub reward: Option<bool>,
}

/// Trace rows for one run, in step order.
pub fn trace_rows(run: &RunRecord) -> Vec<TraceRow> {
    run.steps
        .iter()
        .enumerate()
        .map(|(k, step)| {
            let (offsets, reward) = match &step.outcome {
                StepOutcome::Skipped => (None, None),
                StepOutcome::Played { reward, .. } => (Some(step.next_action), Some(*reward)),
            };
            TraceRow { relative_orbit: run.relative_orbit, cycle_step: k as u32 + 1, offsets, reward }
        })
        .collect()
}

pub fn emit_trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let (a, l) = match r.offsets {
            Some(p) => (format_secs(p.aos_offset.millis()), format_secs(p.los_offset.millis())),
            None => (String::new(), String::new()),
        };
        let reward = r.reward.map_or(String::new(), |b| u8::from(b).to_string());
        out.push_str(&format!("{},{},{a},{l},{reward}\n", r.relative_orbit, r.cycle_step));
    }
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, ParseError> {
    let table = CsvTable::read(text, &COLUMNS)?;
    let mut out = Vec::new();
    for row in table.rows() {
        let secs = |column: &'static str| -> Result<Option<Duration>, ParseError> {
            let v = row.field(column);
            if v.is_empty() {
                return Ok(None);
            }
            parse_secs(v)
                .filter(|&ms| ms >= 0)
                .map(|ms| Some(Duration::from_millis(ms)))
                .ok_or_else(|| row.err(ParseErrorKind::BadNumber { column, value: v.to_string() }))
        };
        let offsets = match (secs("aos_offset_s")?, secs("los_offset_s")?) {
            (Some(a), Some(l)) => Some(OffsetPair { aos_offset: a, los_offset: l }),
            (None, None) => None,
            _ => return Err(row.err(ParseErrorKind::Invalid("only one offset given".into()))),
        };
        let reward = match row.field("reward") {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            v => return Err(row.err(ParseErrorKind::BadNumber { column: "reward", value: v.to_string() })),
        };
        out.push(TraceRow { relative_orbit: row.u32("ron")?, cycle_step: row.u32("cycle_step")?, offsets, reward });
    }
    Ok(out)
}
