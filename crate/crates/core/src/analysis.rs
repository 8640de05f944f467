//! Least-squares fit of the crossover model and randomization inference.
//!
//! The model is `y = τ·d + π(period class) + ξ(patient) + ε` with no global
//! intercept. Patient indicators already span the constant, so one period
//! class (by default the shared Friday class) is dropped as reference. The
//! fit is done by residualizing the treatment column and the response
//! against an orthonormal basis of the period and patient columns; `τ̂`
//! does not depend on which class is dropped.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::construction::{construct_design, SequenceWeights};
use crate::dataset::{SessionKey, TrialDataset};
use crate::design::{Design, Treatment};
use crate::error::{Error, Result};
use crate::information::column_basis;
use crate::matrices::{period_class, Matrix, PERIOD_CLASSES};
use crate::planning::normal_quantile;
use crate::rng::{derived_seed, domain, RngSeed};

/// Period class dropped for identifiability unless told otherwise.
pub const DEFAULT_REFERENCE_CLASS: usize = 2;

/// Treatment information below this fraction of `n` counts as inestimable.
const ESTIMABILITY_RTOL: f64 = 1e-10;

/// Largest fraction of failed replicate fits a randomization test tolerates.
pub const MAX_REPLICATE_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `log(y + k)`.
    LogShift(f64),
}

impl Transform {
    fn apply(self, y: f64) -> Result<f64> {
        match self {
            Transform::Identity => Ok(y),
            Transform::LogShift(k) => {
                if !k.is_finite() || y + k <= 0.0 {
                    return Err(Error::Transform(format!(
                        "log(y + k) undefined for y = {y}, k = {k}"
                    )));
                }
                Ok((y + k).ln())
            }
        }
    }
}

/// Orthonormal basis of the period and patient columns for the observed
/// rows of a dataset, plus the row bookkeeping needed to reuse it.
#[derive(Debug, Clone)]
pub struct FitLayout {
    /// Indices into `data.records()` of the rows with a response.
    rows: Vec<usize>,
    /// For each used row: canonical patient index, week, position in week.
    slots: Vec<(usize, usize, usize)>,
    basis: Matrix,
    reference: Option<usize>,
}

impl FitLayout {
    /// `reference` is the period class left out; `None` keeps all four and
    /// lets the rank-revealing basis absorb the dependency.
    pub fn new(data: &TrialDataset, reference: Option<usize>) -> Self {
        let patients = data.canonical_patients();
        let patient_index = |id: &str| {
            patients
                .iter()
                .position(|p| p.0 == id)
                .expect("known patient")
        };
        let classes: Vec<usize> = (0..PERIOD_CLASSES)
            .filter(|&c| Some(c) != reference)
            .collect();

        let mut rows = Vec::new();
        let mut slots = Vec::new();
        let mut entries = Vec::new();
        for (i, r) in data.records().iter().enumerate() {
            if r.y.is_none() {
                continue;
            }
            let p = patient_index(&r.patient_id);
            let schedule = patients[p].1;
            rows.push(i);
            slots.push((p, r.week, schedule.day_index(r.day).expect("validated day")));
            entries.push((p, period_class(schedule, r.day)));
        }
        let n = rows.len();
        let cols = classes.len() + patients.len();
        let mut z = Matrix::zeros(n, cols);
        for (row, &(p, class)) in entries.iter().enumerate() {
            if let Some(c) = classes.iter().position(|&c| c == class) {
                z[(row, c)] = 1.0;
            }
            z[(row, classes.len() + p)] = 1.0;
        }
        FitLayout {
            rows,
            slots,
            basis: column_basis(&z),
            reference,
        }
    }

    pub fn observations(&self) -> usize {
        self.rows.len()
    }

    pub fn nuisance_rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `v − P(Z)v`.
    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.basis * (self.basis.transpose() * v)
    }

    /// Treatment column for the used rows under `design`'s allocation.
    ///
    /// The design must list thrice-weekly patients before twice-weekly ones
    /// in the same canonical order as the dataset.
    pub fn overlay(&self, design: &Design) -> DVector<f64> {
        let plans = design.canonical_plans();
        DVector::from_iterator(
            self.slots.len(),
            self.slots.iter().map(|&(p, week, pos)| {
                plans[p].weeks()[week - 1].treatments()[pos].signed() as f64
            }),
        )
    }

    /// Residualized treatment column and its squared norm, or `NotEstimable`.
    pub fn treatment_contrast(&self, a: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let a_res = self.residualize(a);
        let info = a_res.norm_squared();
        if info <= ESTIMABILITY_RTOL * a.len().max(1) as f64 {
            return Err(Error::NotEstimable);
        }
        Ok((a_res, info))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRecord {
    #[serde(flatten)]
    pub key: SessionKey,
    pub treatment: Treatment,
    pub fitted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub tau_hat: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    pub t_stat: f64,
    pub p_value: f64,
    pub dof: usize,
    /// Residual mean square.
    pub sigma2_hat: f64,
    /// Squared norm of the residualized treatment column; equals
    /// `σ²·I1` for the observed rows.
    pub information: f64,
    pub observations: usize,
    /// Reference distribution for the CI and p-value.
    pub reference_distribution: &'static str,
    pub reference_period_class: Option<usize>,
    pub transform: Transform,
    pub residuals: Vec<ResidualRecord>,
}

pub fn fit_model(data: &TrialDataset, transform: Transform) -> Result<FitResult> {
    fit_model_with_reference(data, transform, Some(DEFAULT_REFERENCE_CLASS))
}

pub fn fit_model_with_reference(
    data: &TrialDataset,
    transform: Transform,
    reference: Option<usize>,
) -> Result<FitResult> {
    let layout = FitLayout::new(data, reference);
    let records = data.records();
    let y = layout
        .rows
        .iter()
        .map(|&i| transform.apply(records[i].y.expect("observed row")))
        .collect::<Result<Vec<f64>>>()?;
    let y = DVector::from_vec(y);
    let a = DVector::from_iterator(
        layout.rows.len(),
        layout
            .rows
            .iter()
            .map(|&i| records[i].treatment.signed() as f64),
    );

    let (a_res, info) = layout.treatment_contrast(&a)?;
    let y_res = layout.residualize(&y);
    let tau_hat = a_res.dot(&y_res) / info;
    let resid = &y_res - &a_res * tau_hat;

    let n = layout.observations();
    let rank = layout.nuisance_rank() + 1;
    if n <= rank {
        return Err(Error::NoResidualDof);
    }
    let dof = n - rank;
    let sigma2_hat = resid.norm_squared() / dof as f64;
    let se = (sigma2_hat / info).sqrt();
    let t_dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive dof");
    let t_crit = t_dist.inverse_cdf(0.975);
    let t_stat = tau_hat / se;
    let p_value = if se > 0.0 {
        2.0 * (1.0 - t_dist.cdf(t_stat.abs()))
    } else if tau_hat == 0.0 {
        1.0
    } else {
        0.0
    };

    let residuals = layout
        .rows
        .iter()
        .zip(resid.iter().zip(y.iter()))
        .map(|(&i, (&e, &yv))| {
            let r = &records[i];
            ResidualRecord {
                key: SessionKey {
                    patient_id: r.patient_id.clone(),
                    week: r.week,
                    day: r.day,
                },
                treatment: r.treatment,
                fitted: yv - e,
                residual: e,
            }
        })
        .collect();

    Ok(FitResult {
        tau_hat,
        se,
        ci95: (tau_hat - t_crit * se, tau_hat + t_crit * se),
        t_stat,
        p_value,
        dof,
        sigma2_hat,
        information: info,
        observations: n,
        reference_distribution: "student_t",
        reference_period_class: layout.reference,
        transform,
        residuals,
    })
}

/// Allocation scheme used to re-randomize: the dual-pair construction with
/// the given patient counts, length and weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomizationScheme {
    pub n3: usize,
    pub n2: usize,
    pub weeks: usize,
    pub weights: SequenceWeights,
}

impl RandomizationScheme {
    /// Patient counts and length read off the dataset.
    pub fn from_data(data: &TrialDataset, weights: SequenceWeights) -> Self {
        RandomizationScheme {
            n3: data.n3(),
            n2: data.n2(),
            weeks: data.weeks(),
            weights,
        }
    }

    fn check_compatible(&self, data: &TrialDataset) -> Result<()> {
        if data.n3() != self.n3 || data.n2() != self.n2 {
            return Err(Error::InvalidInput(format!(
                "data has {} thrice- and {} twice-weekly patients, scheme expects {} and {}",
                data.n3(),
                data.n2(),
                self.n3,
                self.n2
            )));
        }
        if data.weeks() > self.weeks {
            return Err(Error::InvalidInput(format!(
                "data runs to week {}, scheme has only {} weeks",
                data.weeks(),
                self.weeks
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomizationResult {
    /// `|τ̂|` on the observed allocation.
    pub observed: f64,
    pub p_value: f64,
    pub replicates: usize,
    pub failures: usize,
    /// Replicates with `|τ̂*| ≥ |τ̂|`.
    pub at_least_as_extreme: usize,
}

/// Re-randomization test of `τ = 0`.
///
/// Responses stay in their (patient, week, day) slots; each replicate
/// draws a fresh allocation from `scheme`, refits and records `|τ̂*|`.
/// `p = (1 + #{|τ̂*| ≥ |τ̂|}) / (1 + successful replicates)`.
pub fn randomization_test(
    data: &TrialDataset,
    scheme: &RandomizationScheme,
    transform: Transform,
    replicates: usize,
    seed: RngSeed,
) -> Result<RandomizationResult> {
    scheme.check_compatible(data)?;
    let observed = fit_model(data, transform)?.tau_hat.abs();

    let layout = FitLayout::new(data, Some(DEFAULT_REFERENCE_CLASS));
    let records = data.records();
    let y = layout
        .rows
        .iter()
        .map(|&i| transform.apply(records[i].y.expect("observed row")))
        .collect::<Result<Vec<f64>>>()?;
    let y_res = layout.residualize(&DVector::from_vec(y));

    let stats: Vec<Result<Option<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let design_seed = derived_seed(seed, domain::RANDOMIZATION_REPLICATE, r);
            let design = construct_design(
                scheme.n3,
                scheme.n2,
                scheme.weeks,
                &scheme.weights,
                design_seed,
            )?;
            let a = layout.overlay(&design);
            Ok(match layout.treatment_contrast(&a) {
                Ok((a_res, info)) => Some((a_res.dot(&y_res) / info).abs()),
                Err(_) => None,
            })
        })
        .collect();

    let mut failures = 0;
    let mut extreme = 0;
    let threshold = observed * (1.0 - 1e-12);
    for s in stats {
        match s? {
            Some(t) if t >= threshold => extreme += 1,
            Some(_) => {}
            None => failures += 1,
        }
    }
    if replicates > 0 && failures as f64 > MAX_REPLICATE_FAILURE_RATE * replicates as f64 {
        return Err(Error::TooManyReplicateFailures {
            failed: failures,
            total: replicates,
        });
    }
    let valid = replicates - failures;
    Ok(RandomizationResult {
        observed,
        p_value: (1 + extreme) as f64 / (1 + valid) as f64,
        replicates,
        failures,
        at_least_as_extreme: extreme,
    })
}

/// Blom plotting position `(i − 3/8)/(n + 1/4)` for 1-based rank `i`.
pub fn plotting_position(rank: usize, n: usize) -> f64 {
    (rank as f64 - 0.375) / (n as f64 + 0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow<'a> {
    #[serde(flatten)]
    pub record: &'a ResidualRecord,
    pub plotting_position: f64,
    pub normal_score: f64,
}

/// Residuals with their normal probability plot coordinates, in record order.
pub fn residual_rows(fit: &FitResult) -> Vec<ResidualRow<'_>> {
    let n = fit.residuals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        fit.residuals[i]
            .residual
            .total_cmp(&fit.residuals[j].residual)
    });
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    fit.residuals
        .iter()
        .zip(rank)
        .map(|(record, r)| {
            let pos = plotting_position(r, n);
            ResidualRow {
                record,
                plotting_position: pos,
                normal_score: normal_quantile(pos),
            }
        })
        .collect()
}

pub fn write_residuals<W: Write>(fit: &FitResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "patient_id",
        "week",
        "day",
        "treatment",
        "fitted",
        "residual",
        "plotting_position",
        "normal_score",
    ])?;
    for row in residual_rows(fit) {
        let r = row.record;
        wtr.write_record([
            r.key.patient_id.clone(),
            r.key.week.to_string(),
            r.key.day.to_string(),
            r.treatment.to_string(),
            r.fitted.to_string(),
            r.residual.to_string(),
            row.plotting_position.to_string(),
            row.normal_score.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn export_residuals(fit: &FitResult, path: impl AsRef<Path>) -> Result<()> {
    write_residuals(fit, std::fs::File::create(path)?)
}
