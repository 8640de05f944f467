//! Optimal two-treatment crossover designs for patients attending two or
//! three times a week.
//!
//! The crate builds randomized dual-pair designs, checks their optimality
//! by computing the treatment information three independent ways, sizes a
//! trial, simulates data and fits the model with randomization inference.

pub mod analysis;
pub mod construction;
pub mod dataset;
pub mod design;
pub mod design_file;
pub mod error;
pub mod information;
pub mod linalg;
pub mod matrices;
pub mod planning;
pub mod rng;
pub mod simulation;

pub use analysis::{fit_model, randomization_test, FitResult, RandomizationScheme, Transform};
pub use construction::{construct_design, default_weights, SequenceWeights};
pub use dataset::{Record, TrialDataset};
pub use design::{Day, Design, PatientPlan, Schedule, Treatment, WeekSequence};
pub use error::{Error, Result};
pub use information::{verdict, InformationReport};
pub use rng::RngSeed;
