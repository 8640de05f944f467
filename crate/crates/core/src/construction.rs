//! Randomized construction of optimal designs by dual pairs.
//!
//! For each patient, `w/2` base sequences are drawn with replacement from
//! the sequences starting with A (`AAA, AAH, AHH, AHA` for thrice-weekly,
//! `AA, AH` for twice-weekly), each is paired with its dual, and the `w`
//! resulting weeks are placed in a uniformly random order. Every day of the
//! week then carries as many H as A within the patient, which makes `q = 0`
//! and balances each patient regardless of the mix of schedules.
//!
//! Patients are independent: patient `k` of a schedule draws from its own
//! substream, so adding patients never changes the plans of existing ones.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{Design, PatientPlan, Schedule, Treatment, WeekSequence};
use crate::error::{Error, Result};
use crate::rng::{domain, substream, RngSeed};

use Treatment::{A, H};

/// Base sequences for thrice-weekly patients, in weight order.
pub const THRICE_BASE: [[Treatment; 3]; 4] = [[A, A, A], [A, A, H], [A, H, H], [A, H, A]];
/// Base sequences for twice-weekly patients, in weight order.
pub const TWICE_BASE: [[Treatment; 2]; 2] = [[A, A], [A, H]];

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Selection probabilities over the base sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceWeights {
    /// Over `AAA, AAH, AHH, AHA`.
    pub thrice: [f64; 4],
    /// Over `AA, AH`.
    pub twice: [f64; 2],
}

impl SequenceWeights {
    pub fn new(thrice: [f64; 4], twice: [f64; 2]) -> Result<Self> {
        check_probabilities("thrice", &thrice)?;
        check_probabilities("twice", &twice)?;
        Ok(SequenceWeights { thrice, twice })
    }

    /// Favours rapidly alternating weeks, which is preferable if errors are
    /// positively autocorrelated: `{1/10, 1/5, 1/5, 1/2}` and `{1/5, 4/5}`.
    pub fn alternating() -> Self {
        SequenceWeights {
            thrice: [0.1, 0.2, 0.2, 0.5],
            twice: [0.2, 0.8],
        }
    }

    pub fn uniform() -> Self {
        SequenceWeights {
            thrice: [0.25; 4],
            twice: [0.5; 2],
        }
    }
}

impl Default for SequenceWeights {
    fn default() -> Self {
        default_weights()
    }
}

pub fn default_weights() -> SequenceWeights {
    SequenceWeights::alternating()
}

fn check_probabilities(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "{name} weights must be non-negative: {p:?}"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidInput(format!(
            "{name} weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

pub fn dual(seq: &WeekSequence) -> WeekSequence {
    seq.dual()
}

/// Index into [`THRICE_BASE`] or [`TWICE_BASE`] drawn with the configured weights.
pub fn draw_base_index<R: Rng + ?Sized>(
    schedule: Schedule,
    weights: &SequenceWeights,
    rng: &mut R,
) -> usize {
    let dist = match schedule {
        Schedule::Thrice => WeightedIndex::new(weights.thrice),
        Schedule::Twice => WeightedIndex::new(weights.twice),
    }
    .expect("validated weights");
    dist.sample(rng)
}

pub fn base_sequence(schedule: Schedule, index: usize) -> WeekSequence {
    let treatments = match schedule {
        Schedule::Thrice => THRICE_BASE[index].to_vec(),
        Schedule::Twice => TWICE_BASE[index].to_vec(),
    };
    WeekSequence::new(schedule, treatments).expect("base sequences match their schedule")
}

fn check_weeks(weeks: usize) -> Result<()> {
    if weeks == 0 {
        return Err(Error::InvalidInput("w must be at least 2".into()));
    }
    if weeks % 2 == 1 {
        return Err(Error::OddWeeks(weeks));
    }
    Ok(())
}

/// One patient's optimal plan over `weeks` (even) weeks.
pub fn construct_patient_plan<R: Rng + ?Sized>(
    patient_id: impl Into<String>,
    schedule: Schedule,
    weeks: usize,
    weights: &SequenceWeights,
    rng: &mut R,
) -> Result<PatientPlan> {
    check_weeks(weeks)?;
    let mut sequences = Vec::with_capacity(weeks);
    for _ in 0..weeks / 2 {
        let base = base_sequence(schedule, draw_base_index(schedule, weights, rng));
        sequences.push(base.dual());
        sequences.push(base);
    }
    sequences.shuffle(rng);
    PatientPlan::new(patient_id, schedule, sequences)
}

/// Patient ids assigned by [`construct_design`]: `P1..P{n3}` for the
/// thrice-weekly patients, then `P{n3+1}..` for the twice-weekly ones.
pub fn patient_id(index: usize) -> String {
    format!("P{}", index + 1)
}

/// Optimal design for `n3` thrice-weekly and `n2` twice-weekly patients.
pub fn construct_design(
    n3: usize,
    n2: usize,
    weeks: usize,
    weights: &SequenceWeights,
    seed: RngSeed,
) -> Result<Design> {
    check_weeks(weeks)?;
    if n3 + n2 == 0 {
        return Err(Error::InvalidInput(
            "design needs at least one patient".into(),
        ));
    }
    let mut plans = Vec::with_capacity(n3 + n2);
    for k in 0..n3 {
        let mut rng = substream(seed, domain::THRICE_WEEKLY_PATIENT, k as u64);
        plans.push(construct_patient_plan(
            patient_id(k),
            Schedule::Thrice,
            weeks,
            weights,
            &mut rng,
        )?);
    }
    for k in 0..n2 {
        let mut rng = substream(seed, domain::TWICE_WEEKLY_PATIENT, k as u64);
        plans.push(construct_patient_plan(
            patient_id(n3 + k),
            Schedule::Twice,
            weeks,
            weights,
            &mut rng,
        )?);
    }
    Ok(Design::new(weeks, plans))
}

/// Completely random allocation, each cell H or A with probability 1/2.
///
/// Not optimal in general; used as a comparator and for sweeps over
/// arbitrary designs. `weeks` may be odd.
pub fn random_allocation<R: Rng + ?Sized>(
    n3: usize,
    n2: usize,
    weeks: usize,
    rng: &mut R,
) -> Design {
    let schedules =
        std::iter::repeat_n(Schedule::Thrice, n3).chain(std::iter::repeat_n(Schedule::Twice, n2));
    let plans = schedules
        .enumerate()
        .map(|(k, schedule)| {
            let seqs = (0..weeks)
                .map(|_| {
                    let t = (0..schedule.sessions_per_week())
                        .map(|_| if rng.random_bool(0.5) { H } else { A })
                        .collect();
                    WeekSequence::new(schedule, t).expect("length matches")
                })
                .collect();
            PatientPlan::new(patient_id(k), schedule, seqs).expect("single schedule")
        })
        .collect();
    Design::new(weeks, plans)
}
