//! Efficient average-treatment-effect estimation from positive and unlabeled
//! observations, in the censoring and case-control sampling designs.
//!
//! Data flow: [`dgp`] (or user data) produces a dataset, [`crossfit`] fits the
//! outcome and propensity nuisances of [`regression`] and [`pu_nuisance`] on
//! training complements, the estimators in [`censoring`] and [`casecontrol`]
//! turn the evaluated nuisances into an [`EstimateReport`], and [`montecarlo`]
//! repeats the whole pipeline over seeded trials.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod casecontrol;
pub mod censoring;
pub mod crossfit;
pub mod dgp;
pub mod error;
pub mod montecarlo;
pub mod pu_nuisance;
pub mod regression;
pub mod report;
pub mod stats;

pub use error::{PuError, Result};
pub use report::{EstimateReport, Method};
