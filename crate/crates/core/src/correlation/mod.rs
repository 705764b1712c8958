//! Expected loss against correlation in a Gaussian pair model.
//!
//! Conditional expectations are trapezoid quadratures on a symmetric grid
//! around the conditional mean; the variance slack `ε` is realized by a point
//! mass at the mean.

mod bound;
mod model;

pub use bound::{
    check_quadrature, check_r_grid, conditional_loss_expansion, loss_correlation_curve, moment_envelope_check, LossCurve, LossExpansion, LossKind,
    MomentEnvelopeReport, QUADRATURE_TOL,
};
pub use model::{GaussianPairModel, GridSpec};
