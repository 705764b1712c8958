//! Maximum-entropy inference under a single moment constraint.
//!
//! The central object is the exponential tilt `p_λ ∝ q·e^{−λV}`, the
//! minimizer of `D(p ‖ q)` subject to `E_p[V] = c`. The multiplier is found by
//! bracketing bisection followed by a safeguarded Newton polish on the
//! strictly decreasing map `λ ↦ E_{p_λ}[V]`; all partition-function
//! arithmetic runs in the log domain.

mod constraint;
mod divergence;
mod projection;
mod tilt;

pub use constraint::{ConstraintSpec, Target};
pub use divergence::{
    divergence_projection, necessity_gap, stationarity_residual, DivergenceProjection,
    DivergenceSpec, Generator, DEFAULT_KKT_TOL, MAX_ITERATIONS,
};
pub use projection::{i_projection, i_projection_with_tol, IProjection};
pub use tilt::{check_tilt_inputs, solve_tilt, solve_tilt_with_report, TiltReport, TiltedDistribution, DEFAULT_TILT_TOL};
