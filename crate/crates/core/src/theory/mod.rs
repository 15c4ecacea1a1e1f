//! Closed-form constants, cosine bounds and their Monte Carlo checks.

mod bounds;
mod checks;
mod constants;

pub use bounds::{
    compute_omega, compute_omega_linear, compute_omega_thm2, theorem1_bounds, CosineBounds, SmoothnessProfile,
};
pub use checks::{
    fit_query_complexity, fit_sqrt_law, omega_correlation_sweep, verify_lemma1, verify_lemma4,
    verify_theorem1_sandwich, Lemma1Report, Lemma4Report, OmegaPoint, OmegaSweepConfig, OmegaSweepReport, QcConfig,
    QcFitReport, QcPoint, SandwichConfig, SandwichReport, SandwichVictim,
};
pub use constants::{compute_cn, pa_cdf, pa_pdf, PDF_CAP};

use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::numerics::NumericsError;
use crate::projections::ProjectionError;
use crate::victims::VictimError;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("invalid smoothness profile: {0}")]
    InvalidProfile(String),
    #[error("bounds need omega <= ||grad f^T grad S||, got omega = {omega}, alignment = {proj_align}")]
    AssumptionViolated { omega: f64, proj_align: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Victim(#[from] VictimError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}
