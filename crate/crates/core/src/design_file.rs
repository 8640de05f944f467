//! JSON design files.
//!
//! ```json
//! {"weeks": 2,
//!  "plans": [{"patient_id": "P1", "sessions_per_week": 3,
//!             "weeks": [["H","A","H"], ["A","H","A"]]}]}
//! ```
//!
//! Day labels are implied by `sessions_per_week`. A plan may carry an
//! optional `days` array, which must then equal the canonical labels.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{Day, Design, PatientPlan, Schedule, Treatment, WeekSequence};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    weeks: usize,
    plans: Vec<RawPlan>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    patient_id: String,
    sessions_per_week: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    days: Option<Vec<String>>,
    weeks: Vec<Vec<String>>,
}

pub fn design_from_json(text: &str) -> Result<Design> {
    let raw: RawDesign = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let plans = raw
        .plans
        .into_iter()
        .enumerate()
        .map(|(pi, plan)| convert_plan(pi, plan))
        .collect::<Result<Vec<_>>>()?;
    Ok(Design::new(raw.weeks, plans))
}

fn convert_plan(pi: usize, raw: RawPlan) -> Result<PatientPlan> {
    let schedule = Schedule::from_sessions(raw.sessions_per_week).ok_or_else(|| {
        Error::Schema(format!(
            "plans[{pi}].sessions_per_week = {}; only 2 or 3 are supported",
            raw.sessions_per_week
        ))
    })?;

    if let Some(days) = &raw.days {
        for (di, label) in days.iter().enumerate() {
            if Day::from_label(label).is_none() {
                return Err(Error::Schema(format!(
                    "plans[{pi}].days[{di}]: unknown day label `{label}` (expected Mon, Wed or Fri)"
                )));
            }
        }
        let expected: Vec<&str> = schedule.days().iter().map(|d| d.label()).collect();
        if days.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Schema(format!(
                "plans[{pi}].days = {days:?} does not match the {}-session schedule {expected:?}",
                raw.sessions_per_week
            )));
        }
    }

    let mut weeks = Vec::with_capacity(raw.weeks.len());
    for (wi, week) in raw.weeks.iter().enumerate() {
        let treatments = week
            .iter()
            .enumerate()
            .map(|(si, label)| {
                Treatment::from_label(label).ok_or_else(|| {
                    Error::Schema(format!(
                        "plans[{pi}].weeks[{wi}][{si}]: unknown treatment `{label}` (expected H or A)"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = WeekSequence::new(schedule, treatments).map_err(|_| {
            Error::Schema(format!(
                "plans[{pi}].weeks[{wi}] has {} entries, schedule needs {}",
                week.len(),
                schedule.sessions_per_week()
            ))
        })?;
        weeks.push(seq);
    }
    PatientPlan::new(raw.patient_id, schedule, weeks)
}

pub fn design_to_json(design: &Design) -> String {
    let raw = RawDesign {
        weeks: design.weeks(),
        plans: design
            .plans()
            .iter()
            .map(|p| RawPlan {
                patient_id: p.patient_id().to_string(),
                sessions_per_week: p.schedule().sessions_per_week(),
                days: None,
                weeks: p
                    .weeks()
                    .iter()
                    .map(|w| w.treatments().iter().map(|t| t.to_string()).collect())
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("design serializes");
    text.push('\n');
    text
}

pub fn read_design(path: impl AsRef<Path>) -> Result<Design> {
    design_from_json(&fs::read_to_string(path)?)
}

pub fn write_design(design: &Design, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, design_to_json(design))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_day_label_is_schema_error() {
        let text = r#"{"weeks": 1, "plans": [
            {"patient_id": "1", "sessions_per_week": 3, "days": ["Tue", "Thu", "Sat"],
             "weeks": [["H", "A", "H"]]}]}"#;
        match design_from_json(text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("Tue"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn explicit_canonical_days_accepted() {
        let text = r#"{"weeks": 1, "plans": [
            {"patient_id": "1", "sessions_per_week": 2, "days": ["Mon", "Fri"],
             "weeks": [["H", "A"]]}]}"#;
        let design = design_from_json(text).unwrap();
        assert_eq!(design.n2(), 1);
    }

    #[test]
    fn bad_treatment_names_field() {
        let text = r#"{"weeks": 1, "plans": [
            {"patient_id": "1", "sessions_per_week": 3, "weeks": [["H", "X", "H"]]}]}"#;
        match design_from_json(text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("plans[0].weeks[0][1]"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = "{\n  \"weeks\": 1,\n  \"plans\": [\n    {\"patient_id\": 1,,}\n  ]\n}";
        match design_from_json(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_session_count() {
        let text = r#"{"weeks": 1, "plans": [
            {"patient_id": "1", "sessions_per_week": 1, "weeks": [["H"]]}]}"#;
        assert!(matches!(design_from_json(text), Err(Error::Schema(_))));
    }
}
