//! Inference under uncertain losses.
//!
//! The exact law of expected-loss values over type classes is tilted to meet
//! a meta-constraint `E_ν[U] = η`; the multiplier `λ_η` then weights models in
//! the maximum-likelihood problem
//! `argmax_{V·μ ∈ Ξ} e^{−D(μ‖P)} e^{−λ_η U(V·μ)} Q(μ)`.

mod error_dist;
mod fit;
mod map;

pub use error_dist::{error_distribution_exact, ErrorDistribution, Provenance, MERGE_TOL};
pub use fit::{maxent_error_fit, MetaConstraint, MetaFit, Statistic, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL};
pub use map::{
    default_grid_step, feasible_model_count, map_model, misfit_weight, model_posterior, simplex_grid, DensityFn, MapMethod,
    MapModelResult, MapOptions, ModelPrior, ObjectiveComponents, MAX_GRID_POINTS,
};
