//! Dump schedule document.
//!
//! ```text
//! #mission_id=S6-SYNTH
//! cycle,ron,start_utc,stop_utc,aos_offset_ms,los_offset_ms
//! 6,1,2020-12-...Z,2020-12-...Z,30000,10000
//! ```

use super::{format_timestamp, CsvTable, ParseError, ParseErrorKind};
use crate::model::{Duration, OffsetPair};
use crate::scheduler::{DumpCommand, Schedule};

const MISSION_PREFIX: &str = "#mission_id=";
const HEADER: &str = "cycle,ron,start_utc,stop_utc,aos_offset_ms,los_offset_ms";
const COLUMNS: [&str; 6] = ["cycle", "ron", "start_utc", "stop_utc", "aos_offset_ms", "los_offset_ms"];

pub fn emit_schedule(schedule: &Schedule) -> String {
    let mut out = format!("{MISSION_PREFIX}{}\n{HEADER}\n", schedule.mission_id());
    for c in schedule.commands() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.cycle,
            c.relative_orbit,
            format_timestamp(c.start),
            format_timestamp(c.stop),
            c.action.aos_offset.millis(),
            c.action.los_offset.millis(),
        ));
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<Schedule, ParseError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let mission_id = first
        .trim_end_matches('\r')
        .strip_prefix(MISSION_PREFIX)
        .ok_or_else(|| ParseError::new(1, ParseErrorKind::Malformed(format!("expected {MISSION_PREFIX}<id>"))))?;
    let table = CsvTable::read(rest, &COLUMNS).map_err(|e| ParseError { line: e.line + 1, ..e })?;
    let mut commands = Vec::new();
    for row in table.rows() {
        let line = row.line + 1;
        let at_line = |e: ParseError| ParseError { line, ..e };
        let action = OffsetPair::new(
            Duration::from_millis(row.i64("aos_offset_ms").map_err(at_line)?),
            Duration::from_millis(row.i64("los_offset_ms").map_err(at_line)?),
        )
        .map_err(|e| ParseError::new(line, ParseErrorKind::Invalid(e.to_string())))?;
        commands.push(DumpCommand {
            cycle: row.u32("cycle").map_err(at_line)?,
            relative_orbit: row.u32("ron").map_err(at_line)?,
            start: row.timestamp("start_utc").map_err(at_line)?,
            stop: row.timestamp("stop_utc").map_err(at_line)?,
            action,
        });
    }
    Schedule::new(mission_id, commands).map_err(|e| ParseError::new(0, ParseErrorKind::Invalid(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timestamp;
    use proptest::prelude::*;

    #[test]
    fn empty_schedule_is_header_only() {
        let s = Schedule::new("S6", vec![]).unwrap();
        let text = emit_schedule(&s);
        assert_eq!(text, "#mission_id=S6\ncycle,ron,start_utc,stop_utc,aos_offset_ms,los_offset_ms\n");
        assert_eq!(parse_schedule(&text).unwrap(), s);
    }

    #[test]
    fn one_command_bit_exact() {
        let c = DumpCommand {
            cycle: 6,
            relative_orbit: 125,
            start: Timestamp::from_millis(1_612_345_678_901).unwrap(),
            stop: Timestamp::from_millis(1_612_346_500_002).unwrap(),
            action: OffsetPair::secs(30, 13),
        };
        let s = Schedule::new("S6", vec![c]).unwrap();
        let text = emit_schedule(&s);
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with("6,125,2021-02-03T09:47:58.901Z,2021-02-03T10:01:40.002Z,30000,13000\n"));
        assert_eq!(parse_schedule(&text).unwrap(), s);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_schedule("cycle,ron\n").unwrap_err().line, 1);
        let bad = "#mission_id=S6\ncycle,ron,start_utc,stop_utc,aos_offset_ms,los_offset_ms\n6,1,nope,2021-02-03T10:01:40.002Z,0,0\n";
        let e = parse_schedule(bad).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, ParseErrorKind::BadTimestamp(_)));
    }

    proptest! {
        #[test]
        fn roundtrip(cmds in prop::collection::btree_map(
            (1u32..20, 1u32..128),
            (0i64..2_000_000_000_000, 1i64..2_000_000, 0i64..200_000, 0i64..200_000),
            0..40,
        )) {
            let commands: Vec<DumpCommand> = cmds.into_iter().map(|((cycle, ron), (start, len, a, l))| DumpCommand {
                cycle,
                relative_orbit: ron,
                start: Timestamp::from_millis(start).unwrap(),
                stop: Timestamp::from_millis(start + len).unwrap(),
                action: OffsetPair::new(Duration::from_millis(a), Duration::from_millis(l)).unwrap(),
            }).collect();
            let s = Schedule::new("mission-x", commands).unwrap();
            prop_assert_eq!(parse_schedule(&emit_schedule(&s)).unwrap(), s);
        }
    }
}
