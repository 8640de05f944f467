//! Schedules, weekly treatment sequences and complete crossover designs.
//!
//! Treatments are coded `H = +1`, `A = -1`. A patient attends either three
//! times a week (Mon/Wed/Fri) or twice a week (Mon/Fri); any other attendance
//! pattern (e.g. Tue/Thu/Sat) is treated as equivalent and relabelled onto
//! these two before it reaches this crate.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Treatment {
    /// Heparin, coded +1.
    H,
    /// Alteplase, coded -1.
    A,
}

impl Treatment {
    pub fn signed(self) -> i64 {
        match self {
            Treatment::H => 1,
            Treatment::A => -1,
        }
    }

    pub fn dual(self) -> Treatment {
        match self {
            Treatment::H => Treatment::A,
            Treatment::A => Treatment::H,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Treatment::H => 'H',
            Treatment::A => 'A',
        }
    }

    pub fn from_label(label: &str) -> Option<Treatment> {
        match label {
            "H" => Some(Treatment::H),
            "A" => Some(Treatment::A),
            _ => None,
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Day {
    Mon,
    Wed,
    Fri,
}

impl Day {
    pub fn label(self) -> &'static str {
        match self {
            Day::Mon => "Mon",
            Day::Wed => "Wed",
            Day::Fri => "Fri",
        }
    }

    pub fn from_label(label: &str) -> Option<Day> {
        match label {
            "Mon" => Some(Day::Mon),
            "Wed" => Some(Day::Wed),
            "Fri" => Some(Day::Fri),
            _ => None,
        }
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Weekly attendance pattern of a patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Schedule {
    /// Mon, Wed, Fri.
    Thrice,
    /// Mon, Fri.
    Twice,
}

impl Schedule {
    pub fn from_sessions(sessions_per_week: usize) -> Option<Schedule> {
        match sessions_per_week {
            3 => Some(Schedule::Thrice),
            2 => Some(Schedule::Twice),
            _ => None,
        }
    }

    pub fn sessions_per_week(self) -> usize {
        self.days().len()
    }

    pub fn days(self) -> &'static [Day] {
        match self {
            Schedule::Thrice => &[Day::Mon, Day::Wed, Day::Fri],
            Schedule::Twice => &[Day::Mon, Day::Fri],
        }
    }

    /// Position of `day` within the week for this schedule.
    pub fn day_index(self, day: Day) -> Option<usize> {
        self.days().iter().position(|&d| d == day)
    }
}

/// The treatments given to one patient during one week.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeekSequence {
    schedule: Schedule,
    treatments: Vec<Treatment>,
}

impl WeekSequence {
    pub fn new(schedule: Schedule, treatments: Vec<Treatment>) -> Result<Self> {
        if treatments.len() != schedule.sessions_per_week() {
            return Err(Error::InvalidInput(format!(
                "week sequence has {} treatments but the schedule has {} sessions",
                treatments.len(),
                schedule.sessions_per_week()
            )));
        }
        Ok(WeekSequence {
            schedule,
            treatments,
        })
    }

    /// Parses a compact label such as `"AHA"`; the schedule follows from its length.
    pub fn parse(label: &str) -> Result<Self> {
        let treatments = label
            .chars()
            .map(|c| {
                Treatment::from_label(&c.to_string())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown treatment `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = Schedule::from_sessions(treatments.len()).ok_or_else(|| {
            Error::InvalidInput(format!("`{label}` is not a 2- or 3-session week"))
        })?;
        WeekSequence::new(schedule, treatments)
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn treatments(&self) -> &[Treatment] {
        &self.treatments
    }

    /// The same week with A and H interchanged.
    pub fn dual(&self) -> WeekSequence {
        WeekSequence {
            schedule: self.schedule,
            treatments: self.treatments.iter().map(|t| t.dual()).collect(),
        }
    }

    pub fn label(&self) -> String {
        self.treatments.iter().map(|t| t.as_char()).collect()
    }
}

impl fmt::Display for WeekSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientPlan {
    patient_id: String,
    schedule: Schedule,
    weeks: Vec<WeekSequence>,
}

impl PatientPlan {
    pub fn new(
        patient_id: impl Into<String>,
        schedule: Schedule,
        weeks: Vec<WeekSequence>,
    ) -> Result<Self> {
        let patient_id = patient_id.into();
        if let Some(bad) = weeks.iter().position(|s| s.schedule() != schedule) {
            return Err(Error::InvalidInput(format!(
                "patient `{patient_id}`: week {} does not follow the patient's schedule",
                bad + 1
            )));
        }
        Ok(PatientPlan {
            patient_id,
            schedule,
            weeks,
        })
    }

    /// Builds a plan from compact week labels, e.g. `["AAH", "HHA"]`.
    pub fn from_labels(patient_id: impl Into<String>, labels: &[&str]) -> Result<Self> {
        let weeks = labels
            .iter()
            .map(|l| WeekSequence::parse(l))
            .collect::<Result<Vec<_>>>()?;
        let schedule = weeks
            .first()
            .map(|w| w.schedule())
            .ok_or_else(|| Error::InvalidInput("plan needs at least one week".into()))?;
        PatientPlan::new(patient_id, schedule, weeks)
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn weeks(&self) -> &[WeekSequence] {
        &self.weeks
    }

    /// Number of H allocations minus number of A allocations.
    pub fn imbalance(&self) -> i64 {
        self.weeks
            .iter()
            .flat_map(|w| w.treatments())
            .map(|t| t.signed())
            .sum()
    }

    pub fn observations(&self) -> usize {
        self.weeks.len() * self.schedule.sessions_per_week()
    }

    /// `(week, day, treatment)` in chronological order; weeks are 1-based.
    pub fn sessions(&self) -> impl Iterator<Item = (usize, Day, Treatment)> + '_ {
        self.weeks.iter().enumerate().flat_map(move |(wi, seq)| {
            self.schedule
                .days()
                .iter()
                .zip(seq.treatments())
                .map(move |(&day, &t)| (wi + 1, day, t))
        })
    }
}

/// One allocation cell of a design, in canonical row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    /// Column index of the patient in the canonical ordering.
    pub patient: usize,
    pub schedule: Schedule,
    /// 1-based.
    pub week: usize,
    pub day: Day,
    pub treatment: Treatment,
}

/// Full treatment allocation for all patients over `weeks` weeks.
///
/// Construction does not enforce structural validity so that imperfect
/// designs can be loaded and reported on; see [`Design::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    weeks: usize,
    plans: Vec<PatientPlan>,
}

impl Design {
    pub fn new(weeks: usize, plans: Vec<PatientPlan>) -> Self {
        Design { weeks, plans }
    }

    pub fn weeks(&self) -> usize {
        self.weeks
    }

    pub fn plans(&self) -> &[PatientPlan] {
        &self.plans
    }

    pub fn n3(&self) -> usize {
        self.count(Schedule::Thrice)
    }

    pub fn n2(&self) -> usize {
        self.count(Schedule::Twice)
    }

    fn count(&self, schedule: Schedule) -> usize {
        self.plans
            .iter()
            .filter(|p| p.schedule() == schedule)
            .count()
    }

    /// Number of allocation cells, `m`.
    pub fn observations(&self) -> usize {
        self.plans.iter().map(|p| p.observations()).sum()
    }

    /// Plans in canonical order: thrice-weekly patients first, then
    /// twice-weekly, each group in plan order.
    pub fn canonical_plans(&self) -> Vec<&PatientPlan> {
        let thrice = self
            .plans
            .iter()
            .filter(|p| p.schedule() == Schedule::Thrice);
        let twice = self
            .plans
            .iter()
            .filter(|p| p.schedule() == Schedule::Twice);
        thrice.chain(twice).collect()
    }

    /// Every allocation cell in canonical row order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.observations());
        for (patient, plan) in self.canonical_plans().into_iter().enumerate() {
            cells.extend(plan.sessions().map(|(week, day, treatment)| Cell {
                patient,
                schedule: plan.schedule(),
                week,
                day,
                treatment,
            }));
        }
        cells
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.weeks == 0 {
            report.violations.push(Violation::ZeroWeeks);
        }
        let mut seen = HashSet::new();
        for plan in &self.plans {
            if !seen.insert(plan.patient_id()) {
                report
                    .violations
                    .push(Violation::DuplicatePatientId(plan.patient_id().to_string()));
            }
            if plan.weeks().len() != self.weeks {
                report.violations.push(Violation::PlanLength {
                    patient_id: plan.patient_id().to_string(),
                    expected: self.weeks,
                    found: plan.weeks().len(),
                });
            }
            let imbalance = plan.imbalance();
            if imbalance != 0 {
                report.warnings.push(Warning::PatientImbalance {
                    patient_id: plan.patient_id().to_string(),
                    imbalance,
                });
            }
        }
        report
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidDesign(v.to_string()));
        }
        if self.plans.is_empty() {
            return Err(Error::InvalidDesign("design has no patients".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ZeroWeeks,
    DuplicatePatientId(String),
    PlanLength {
        patient_id: String,
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroWeeks => write!(f, "design has w = 0 weeks"),
            Violation::DuplicatePatientId(id) => write!(f, "duplicate patient id `{id}`"),
            Violation::PlanLength {
                patient_id,
                expected,
                found,
            } => write!(
                f,
                "plan length ≠ w: patient `{patient_id}` has {found} weeks, design has {expected}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// H count minus A count is nonzero for the patient.
    PatientImbalance { patient_id: String, imbalance: i64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::PatientImbalance {
                patient_id,
                imbalance,
            } => write!(f, "patient `{patient_id}` imbalance = {imbalance}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.warnings.is_empty()
    }

    pub fn is_structurally_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn treatment_coding() {
        assert_eq!(Treatment::H.signed(), 1);
        assert_eq!(Treatment::A.signed(), -1);
        assert_eq!(Treatment::H.dual(), Treatment::A);
        assert_eq!(Treatment::A.dual(), Treatment::H);
    }

    #[test]
    fn schedules_have_fixed_days() {
        assert_eq!(Schedule::Thrice.days(), &[Day::Mon, Day::Wed, Day::Fri]);
        assert_eq!(Schedule::Twice.days(), &[Day::Mon, Day::Fri]);
        assert_eq!(Schedule::from_sessions(4), None);
        assert_eq!(Day::from_label("Tue"), None);
    }

    #[test]
    fn week_sequence_length_must_match_schedule() {
        assert!(WeekSequence::new(Schedule::Twice, vec![Treatment::H; 3]).is_err());
        assert!(WeekSequence::parse("AHAH").is_err());
        assert_eq!(WeekSequence::parse("AHA").unwrap().dual().label(), "HAH");
    }

    #[test]
    fn plan_rejects_mixed_schedules() {
        let weeks = vec![
            WeekSequence::parse("AHA").unwrap(),
            WeekSequence::parse("AH").unwrap(),
        ];
        assert!(PatientPlan::new("p", Schedule::Thrice, weeks).is_err());
    }

    #[test]
    fn short_plan_is_a_violation() {
        let long: Vec<&str> = vec!["AHA"; 10];
        let short: Vec<&str> = vec!["AHA"; 9];
        let design = Design::new(
            10,
            vec![
                PatientPlan::from_labels("1", &long).unwrap(),
                PatientPlan::from_labels("2", &short).unwrap(),
            ],
        );
        let report = design.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0]
            .to_string()
            .starts_with("plan length ≠ w"));
    }

    #[test]
    fn valid_design_gives_empty_report() {
        let design = Design::new(
            2,
            vec![
                PatientPlan::from_labels("1", &["AHA", "HAH"]).unwrap(),
                PatientPlan::from_labels("2", &["AH", "HA"]).unwrap(),
            ],
        );
        assert!(design.validate().is_empty());
    }

    #[test]
    fn imbalance_is_warning_not_violation() {
        // HHA + HAH: 4 H, 2 A.
        let design = Design::new(
            2,
            vec![PatientPlan::from_labels("1", &["HHA", "HAH"]).unwrap()],
        );
        let report = design.validate();
        assert!(report.is_structurally_valid());
        assert_eq!(
            report.warnings,
            vec![Warning::PatientImbalance {
                patient_id: "1".into(),
                imbalance: 2
            }]
        );
        assert_eq!(report.warnings[0].to_string(), "patient `1` imbalance = 2");
    }

    #[test]
    fn duplicate_ids_reported() {
        let plan = PatientPlan::from_labels("x", &["AH"]).unwrap();
        let design = Design::new(1, vec![plan.clone(), plan]);
        assert_eq!(
            design.validate().violations,
            vec![Violation::DuplicatePatientId("x".into())]
        );
    }

    #[test]
    fn canonical_order_puts_thrice_weekly_first() {
        let design = Design::new(
            1,
            vec![
                PatientPlan::from_labels("b", &["AH"]).unwrap(),
                PatientPlan::from_labels("t", &["HAH"]).unwrap(),
            ],
        );
        let cells = design.cells();
        assert_eq!(cells.len(), 5);
        assert_eq!(design.observations(), 5);
        assert_eq!(cells[0].schedule, Schedule::Thrice);
        assert_eq!(cells[1].day, Day::Wed);
        assert_eq!(cells[3].patient, 1);
        assert_eq!(cells[3].day, Day::Mon);
        assert_eq!(cells[4].treatment, Treatment::H);
    }
}
