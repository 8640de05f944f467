//! Synthetic trial data from the crossover model.
//!
//! AR(1) errors run over each patient's sessions in chronological order,
//! indexed by session rather than calendar time, so the Fri→Mon gap is
//! treated like any other.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{FitLayout, DEFAULT_REFERENCE_CLASS};
use crate::dataset::TrialDataset;
use crate::design::{Design, Schedule};
use crate::error::{Error, Result};
use crate::matrices::period_class;
use crate::rng::{domain, substream, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    Iid { sigma: f64 },
    Ar1 { sigma: f64, rho: f64 },
}

impl ErrorModel {
    pub fn iid(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(ErrorModel::Iid { sigma })
    }

    pub fn ar1(sigma: f64, rho: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if rho.is_nan() || rho.abs() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "AR(1) needs |rho| < 1 to be stationary, got {rho}"
            )));
        }
        Ok(ErrorModel::Ar1 { sigma, rho })
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            ErrorModel::Iid { sigma } | ErrorModel::Ar1 { sigma, .. } => sigma,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "sigma must be > 0, got {sigma}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatientEffects {
    /// One value per patient, canonical order (thrice-weekly first).
    Fixed(Vec<f64>),
    /// Drawn afresh for every simulated trial.
    Normal { sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub tau: f64,
    /// Period effects `π1..π4` (thrice Mon, thrice Wed, Fri, twice Mon).
    pub pi: [f64; 4],
    pub xi: PatientEffects,
}

impl ModelParams {
    /// Treatment effect only; period and patient effects zero.
    pub fn treatment_only(tau: f64) -> Self {
        ModelParams {
            tau,
            pi: [0.0; 4],
            xi: PatientEffects::Fixed(Vec::new()),
        }
    }

    fn patient_effects<R: Rng + ?Sized>(&self, patients: usize, rng: &mut R) -> Result<Vec<f64>> {
        match &self.xi {
            PatientEffects::Fixed(v) if v.is_empty() => Ok(vec![0.0; patients]),
            PatientEffects::Fixed(v) if v.len() == patients => Ok(v.clone()),
            PatientEffects::Fixed(v) => Err(Error::InvalidInput(format!(
                "{} patient effects given for {patients} patients",
                v.len()
            ))),
            PatientEffects::Normal { sd } => {
                let normal = Normal::new(0.0, *sd)
                    .map_err(|e| Error::InvalidInput(format!("patient effect sd: {e}")))?;
                Ok((0..patients).map(|_| normal.sample(rng)).collect())
            }
        }
    }
}

/// Sessions lost from the end of one patient's schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailLoss {
    pub patient_id: String,
    pub sessions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MissingnessSpec {
    /// Drop the last session of every thrice-weekly patient.
    pub final_period_loss: bool,
    /// Independent loss probability for each remaining session, in `[0, 1)`.
    pub random_loss_prob: f64,
    pub tail_losses: Vec<TailLoss>,
}

impl MissingnessSpec {
    pub fn none() -> Self {
        Self::default()
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.random_loss_prob) {
            return Err(Error::InvalidInput(format!(
                "random_loss_prob must lie in [0, 1), got {}",
                self.random_loss_prob
            )));
        }
        Ok(())
    }
}

/// Responses for every cell of `design`, in canonical cell order.
pub fn simulate_responses<R: Rng + ?Sized>(
    design: &Design,
    params: &ModelParams,
    err: &ErrorModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let xi = params.patient_effects(design.plans().len(), rng)?;
    let cells = design.cells();
    let mut y = Vec::with_capacity(cells.len());
    let mut prev: Option<(usize, f64)> = None;
    for c in &cells {
        let z: f64 = StandardNormal.sample(rng);
        let eps = match *err {
            ErrorModel::Iid { sigma } => sigma * z,
            ErrorModel::Ar1 { sigma, rho } => match prev {
                Some((p, e)) if p == c.patient => rho * e + sigma * (1.0 - rho * rho).sqrt() * z,
                _ => sigma * z,
            },
        };
        prev = Some((c.patient, eps));
        y.push(
            params.tau * c.treatment.signed() as f64
                + params.pi[period_class(c.schedule, c.day)]
                + xi[c.patient]
                + eps,
        );
    }
    Ok(y)
}

/// One simulated trial with the requested missingness applied.
pub fn simulate_trial<R: Rng + ?Sized>(
    design: &Design,
    params: &ModelParams,
    err: &ErrorModel,
    miss: &MissingnessSpec,
    rng: &mut R,
) -> Result<TrialDataset> {
    miss.validate()?;
    let y = simulate_responses(design, params, err, rng)?;
    let cells = design.cells();
    let plans = design.canonical_plans();

    // Position of each cell counted from the end of its patient's sessions.
    let mut from_end = vec![0; cells.len()];
    let mut start = 0;
    for (row, c) in cells.iter().enumerate() {
        if row > 0 && cells[row - 1].patient != c.patient {
            start = row;
        }
        from_end[row] = plans[c.patient].observations() - (row - start) - 1;
    }

    let mut lost = vec![false; cells.len()];
    for (row, c) in cells.iter().enumerate() {
        let id = plans[c.patient].patient_id();
        if miss.final_period_loss && c.schedule == Schedule::Thrice && from_end[row] == 0 {
            lost[row] = true;
        }
        if miss
            .tail_losses
            .iter()
            .any(|t| t.patient_id == id && from_end[row] < t.sessions)
        {
            lost[row] = true;
        }
        // Draw for every cell so the stream does not depend on other losses.
        let u: f64 = rng.random();
        if u < miss.random_loss_prob {
            lost[row] = true;
        }
    }
    Ok(TrialDataset::from_design(design, |row| {
        (!lost[row]).then_some(y[row])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceSummary {
    pub replicates: usize,
    pub mean_tau_hat: f64,
    /// Sample variance of `τ̂` (divisor `reps − 1`).
    pub variance: f64,
    /// `σ²/info_full`, the variance predicted for iid errors.
    pub predicted_iid_variance: f64,
}

impl VarianceSummary {
    pub fn mc_standard_error_of_mean(&self) -> f64 {
        (self.variance / self.replicates as f64).sqrt()
    }
}

/// `τ̂` for each of `reps` independent simulated trials on `design`.
///
/// Replicate `r` draws from its own substream, so the output does not
/// depend on thread count or scheduling.
pub fn simulate_estimates(
    design: &Design,
    params: &ModelParams,
    err: &ErrorModel,
    reps: usize,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    let template = TrialDataset::from_design(design, |_| Some(0.0));
    let layout = FitLayout::new(&template, Some(DEFAULT_REFERENCE_CLASS));
    let cells = design.cells();
    let a = DVector::from_iterator(
        cells.len(),
        cells.iter().map(|c| c.treatment.signed() as f64),
    );
    let (a_res, info) = layout.treatment_contrast(&a)?;

    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, domain::SIMULATION_REPLICATE, r);
            let y = simulate_responses(design, params, err, &mut rng)?;
            // a_res is orthogonal to the nuisance columns, so a_resᵀy = a_resᵀ P⊥ y.
            Ok(a_res.dot(&DVector::from_vec(y)) / info)
        })
        .collect()
}

/// Monte Carlo variance of `τ̂` over `reps` simulated complete trials.
pub fn variance_mc(
    design: &Design,
    params: &ModelParams,
    err: &ErrorModel,
    reps: usize,
    seed: RngSeed,
) -> Result<VarianceSummary> {
    if reps < 2 {
        return Err(Error::InvalidInput("need at least 2 replicates".into()));
    }
    let estimates = simulate_estimates(design, params, err, reps, seed)?;
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let variance = estimates.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let info = crate::information::info_full(design);
    Ok(VarianceSummary {
        replicates: estimates.len(),
        mean_tau_hat: mean,
        variance,
        predicted_iid_variance: err.sigma().powi(2) / info,
    })
}
