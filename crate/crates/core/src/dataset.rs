//! Observed trial data aligned to (patient, week, day).

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{Day, Design, Schedule, Treatment};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["patient_id", "week", "day", "treatment", "y"];

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub patient_id: String,
    /// 1-based.
    pub week: usize,
    pub day: Day,
    pub treatment: Treatment,
    /// `None` when the observation was missed.
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    records: Vec<Record>,
    /// Patients in order of first appearance.
    patients: Vec<(String, Schedule)>,
}

impl TrialDataset {
    /// Builds a dataset, inferring each patient's schedule: a patient with
    /// any Wednesday record attends thrice weekly, otherwise twice.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let mut schedules: HashMap<&str, Schedule> = HashMap::new();
        for r in &records {
            let s = schedules.entry(&r.patient_id).or_insert(Schedule::Twice);
            if r.day == Day::Wed {
                *s = Schedule::Thrice;
            }
        }
        let schedules: HashMap<String, Schedule> = schedules
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self::with_schedules(records, &schedules)
    }

    pub fn with_schedules(
        records: Vec<Record>,
        schedules: &HashMap<String, Schedule>,
    ) -> Result<Self> {
        let mut patients = Vec::new();
        let mut known = HashSet::new();
        let mut keys = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            let schedule = *schedules.get(&r.patient_id).ok_or_else(|| {
                Error::InvalidInput(format!("no schedule for patient `{}`", r.patient_id))
            })?;
            if schedule.day_index(r.day).is_none() {
                return Err(Error::Schema(format!(
                    "record {}: day {} is not on the schedule of patient `{}`",
                    i + 1,
                    r.day,
                    r.patient_id
                )));
            }
            if r.week == 0 {
                return Err(Error::Schema(format!(
                    "record {}: weeks are numbered from 1",
                    i + 1
                )));
            }
            if !keys.insert((r.patient_id.as_str(), r.week, r.day)) {
                return Err(Error::Schema(format!(
                    "record {}: duplicate (patient `{}`, week {}, {})",
                    i + 1,
                    r.patient_id,
                    r.week,
                    r.day
                )));
            }
            if known.insert(r.patient_id.clone()) {
                patients.push((r.patient_id.clone(), schedule));
            }
        }
        Ok(TrialDataset { records, patients })
    }

    /// The design's allocation grid in canonical order with responses from `y`.
    pub fn from_design(design: &Design, mut y: impl FnMut(usize) -> Option<f64>) -> Self {
        let plans = design.canonical_plans();
        let records = design
            .cells()
            .iter()
            .enumerate()
            .map(|(row, c)| Record {
                patient_id: plans[c.patient].patient_id().to_string(),
                week: c.week,
                day: c.day,
                treatment: c.treatment,
                y: y(row),
            })
            .collect();
        let patients = plans
            .iter()
            .map(|p| (p.patient_id().to_string(), p.schedule()))
            .collect();
        TrialDataset { records, patients }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn patients(&self) -> &[(String, Schedule)] {
        &self.patients
    }

    pub fn schedule_of(&self, patient_id: &str) -> Option<Schedule> {
        self.patients
            .iter()
            .find(|(id, _)| id == patient_id)
            .map(|(_, s)| *s)
    }

    /// Patient ids with thrice-weekly patients first, each group in order
    /// of appearance. Mirrors [`Design::canonical_plans`].
    pub fn canonical_patients(&self) -> Vec<(&str, Schedule)> {
        let thrice = self.patients.iter().filter(|p| p.1 == Schedule::Thrice);
        let twice = self.patients.iter().filter(|p| p.1 == Schedule::Twice);
        thrice
            .chain(twice)
            .map(|(id, s)| (id.as_str(), *s))
            .collect()
    }

    pub fn n3(&self) -> usize {
        self.patients
            .iter()
            .filter(|p| p.1 == Schedule::Thrice)
            .count()
    }

    pub fn n2(&self) -> usize {
        self.patients
            .iter()
            .filter(|p| p.1 == Schedule::Twice)
            .count()
    }

    pub fn weeks(&self) -> usize {
        self.records.iter().map(|r| r.week).max().unwrap_or(0)
    }

    pub fn observed(&self) -> usize {
        self.records.iter().filter(|r| r.y.is_some()).count()
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Schema(format!(
                "trial data header must be `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.join(",")
            )));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |i: usize| row.get(i).unwrap_or("");
            let week = field(1).parse::<usize>().map_err(|e| Error::Parse {
                line,
                column: 2,
                message: format!("week `{}`: {e}", field(1)),
            })?;
            let day = Day::from_label(field(2)).ok_or_else(|| {
                Error::Schema(format!(
                    "line {line}: unknown day `{}` (expected Mon, Wed or Fri)",
                    field(2)
                ))
            })?;
            let treatment = Treatment::from_label(field(3)).ok_or_else(|| {
                Error::Schema(format!(
                    "line {line}: unknown treatment `{}` (expected A or H)",
                    field(3)
                ))
            })?;
            let y = match field(4) {
                "" => None,
                text => Some(text.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    column: 5,
                    message: format!("y `{text}`: {e}"),
                })?),
            };
            records.push(Record {
                patient_id: field(0).to_string(),
                week,
                day,
                treatment,
                y,
            });
        }
        TrialDataset::new(records)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        for r in &self.records {
            wtr.write_record([
                r.patient_id.clone(),
                r.week.to_string(),
                r.day.to_string(),
                r.treatment.to_string(),
                r.y.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

/// Key identifying one session of one patient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionKey {
    pub patient_id: String,
    pub week: usize,
    pub day: Day,
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "patient_id,week,day,treatment,y\n\
        1,1,Mon,H,3.5\n1,1,Wed,A,\n1,1,Fri,H,0\n2,1,Mon,A,1.25\n2,1,Fri,H,2\n";

    #[test]
    fn reads_csv_and_infers_schedules() {
        let data = TrialDataset::from_csv_reader(SAMPLE.as_bytes()).unwrap();
        assert_eq!(data.records().len(), 5);
        assert_eq!(data.observed(), 4);
        assert_eq!(data.schedule_of("1"), Some(Schedule::Thrice));
        assert_eq!(data.schedule_of("2"), Some(Schedule::Twice));
        assert_eq!(data.records()[1].y, None);
        assert_eq!(data.weeks(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let data = TrialDataset::from_csv_reader(SAMPLE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        data.write_csv_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 6);
        assert_eq!(TrialDataset::from_csv_reader(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn rejects_bad_header_day_and_duplicates() {
        let bad_header = "id,week,day,treatment,y\n";
        assert!(matches!(
            TrialDataset::from_csv_reader(bad_header.as_bytes()),
            Err(Error::Schema(_))
        ));
        let bad_day = "patient_id,week,day,treatment,y\n1,1,Tue,H,1\n";
        assert!(matches!(
            TrialDataset::from_csv_reader(bad_day.as_bytes()),
            Err(Error::Schema(_))
        ));
        let dup = "patient_id,week,day,treatment,y\n1,1,Mon,H,1\n1,1,Mon,A,2\n";
        assert!(matches!(
            TrialDataset::from_csv_reader(dup.as_bytes()),
            Err(Error::Schema(_))
        ));
        let bad_y = "patient_id,week,day,treatment,y\n1,1,Mon,H,abc\n";
        assert!(matches!(
            TrialDataset::from_csv_reader(bad_y.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn wednesday_for_twice_weekly_is_rejected() {
        let records = vec![Record {
            patient_id: "1".into(),
            week: 1,
            day: Day::Wed,
            treatment: Treatment::H,
            y: Some(1.0),
        }];
        let schedules = HashMap::from([("1".to_string(), Schedule::Twice)]);
        assert!(TrialDataset::with_schedules(records, &schedules).is_err());
    }
}
