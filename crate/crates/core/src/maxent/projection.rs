use serde::Serialize;

use super::constraint::{ConstraintSpec, Target};
use super::tilt::{solve_tilt, TiltedDistribution, DEFAULT_TILT_TOL};
use crate::error::Result;
use crate::measures::{expected_loss, kl_divergence, FiniteDistribution};

/// The relative-entropy projection of a reference onto a constraint set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IProjection {
    pub tilt: TiltedDistribution,
    /// `D(realized ‖ P)` in nats.
    pub rate: f64,
}

/// Minimizes `D(μ ‖ P)` over `{μ : V·μ = c}` or `{μ : V·μ ∈ [lo, hi]}`.
///
/// An interval containing `E_P[V]` returns `P` itself with zero rate; otherwise
/// the minimizer lies on the nearer endpoint, since the rate is convex in the
/// constraint value and vanishes at `E_P[V]`.
pub fn i_projection(p: &FiniteDistribution, constraint: &ConstraintSpec) -> Result<IProjection> {
    i_projection_with_tol(p, constraint, DEFAULT_TILT_TOL)
}

pub fn i_projection_with_tol(
    p: &FiniteDistribution,
    constraint: &ConstraintSpec,
    tol: f64,
) -> Result<IProjection> {
    let v = &constraint.potential;
    let c = constraint.dominating_point(p, tol)?;
    let tilt = match constraint.target {
        Target::Interval(lo, hi) if constraint.target.contains(expected_loss(p, v)?, 0.0) => {
            debug_assert!(lo <= c && c <= hi);
            TiltedDistribution::new(p.clone(), v.clone(), 0.0)?
        }
        _ => solve_tilt(p, v, c, tol)?,
    };
    let rate = kl_divergence(tilt.realized(), p)?;
    Ok(IProjection { tilt, rate })
}
