//! Exponential tilting `p ∝ q·e^{−λV}` and the multiplier solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{FiniteDistribution, Potential};
use crate::numeric::{log_sum_exp, TIE_TOL};

/// Default residual tolerance of the multiplier solve.
pub const DEFAULT_TILT_TOL: f64 = 1e-10;
/// Largest exponent spread `|λ|·(max V − min V)` explored during bracketing.
const EXPONENT_CAP: f64 = 700.0;

/// A reference measure tilted by a potential.
///
/// For finite `lambda` the realized weights are `q_i e^{−λV_i} / Z(λ)` and share
/// the support of `q`. `lambda = ±∞` denotes the limiting measure: `q`
/// conditioned on the set where `V` attains its minimum (`+∞`) or maximum (`−∞`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedDistribution {
    reference: FiniteDistribution,
    potential: Potential,
    lambda: f64,
    realized: FiniteDistribution,
}

impl TiltedDistribution {
    pub fn new(reference: FiniteDistribution, potential: Potential, lambda: f64) -> Result<Self> {
        potential.check_len(reference.len())?;
        if lambda.is_nan() {
            return Err(Error::InvalidInput("tilt multiplier is NaN".into()));
        }
        let realized = if lambda == 0.0 {
            reference.clone()
        } else if lambda.is_finite() {
            let logw = tilted_log_weights(&reference, &potential, lambda);
            let log_z = log_sum_exp(logw.iter().copied());
            let w = logw.iter().map(|&a| (a - log_z).exp()).collect();
            FiniteDistribution::from_masses(reference.alphabet().clone(), w)?
        } else {
            face_limit(&reference, &potential, lambda > 0.0)?
        };
        Ok(Self {
            reference,
            potential,
            lambda,
            realized,
        })
    }

    pub fn reference(&self) -> &FiniteDistribution {
        &self.reference
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn realized(&self) -> &FiniteDistribution {
        &self.realized
    }

    pub fn into_realized(self) -> FiniteDistribution {
        self.realized
    }

    /// `ln Z(λ) = ln Σ_j q_j e^{−λV_j}`. Infinite for the limiting measures.
    pub fn log_partition(&self) -> f64 {
        if !self.lambda.is_finite() {
            return if self.lambda > 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        log_sum_exp(tilted_log_weights(&self.reference, &self.potential, self.lambda))
    }

    /// `E_{p_λ}[V]`.
    pub fn expected_potential(&self) -> f64 {
        crate::measures::dot(self.realized.weights(), self.potential.values())
    }
}

fn tilted_log_weights(q: &FiniteDistribution, v: &Potential, lambda: f64) -> Vec<f64> {
    q.weights()
        .iter()
        .zip(v.values())
        .map(|(&qi, &vi)| {
            if qi > 0.0 {
                qi.ln() - lambda * vi
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

fn face_limit(q: &FiniteDistribution, v: &Potential, minimum: bool) -> Result<FiniteDistribution> {
    let supp = q.support();
    let (lo, hi) = v.range_on(&supp);
    let target = if minimum { lo } else { hi };
    let tol = TIE_TOL * (1.0 + target.abs());
    let masses = q
        .weights()
        .iter()
        .zip(v.values())
        .map(|(&qi, &vi)| if qi > 0.0 && (vi - target).abs() <= tol { qi } else { 0.0 })
        .collect();
    FiniteDistribution::from_masses(q.alphabet().clone(), masses)
}

/// Diagnostics of one multiplier solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltReport {
    pub bisection_steps: usize,
    pub newton_steps: usize,
    pub bracket: (f64, f64),
    pub residual: f64,
}

fn is_flat(vmin: f64, vmax: f64) -> bool {
    vmax - vmin <= TIE_TOL * (1.0 + vmax.abs())
}

/// The input checks of [`solve_tilt`]: lengths, a finite target, a positive
/// tolerance, and a target reachable by some tilt of `q`.
pub fn check_tilt_inputs(q: &FiniteDistribution, v: &Potential, c: f64, tol: f64) -> Result<()> {
    v.check_len(q.len())?;
    if !c.is_finite() {
        return Err(Error::InvalidInput(format!("target {c} is not finite")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let (vmin, vmax) = v.range_on(&q.support());
    if is_flat(vmin, vmax) {
        if (c - vmin).abs() <= tol {
            return Ok(());
        }
        return Err(Error::DegeneratePotential { value: vmin, target: c });
    }
    if c < vmin - tol || c > vmax + tol {
        return Err(Error::InfeasibleConstraint { target: c, lo: vmin, hi: vmax });
    }
    Ok(())
}

/// Finds λ with `|E_{p_λ}[V] − c| ≤ tol` for `p_λ ∝ q e^{−λV}`.
pub fn solve_tilt(q: &FiniteDistribution, v: &Potential, c: f64, tol: f64) -> Result<TiltedDistribution> {
    solve_tilt_with_report(q, v, c, tol).map(|(t, _)| t)
}

pub fn solve_tilt_with_report(
    q: &FiniteDistribution,
    v: &Potential,
    c: f64,
    tol: f64,
) -> Result<(TiltedDistribution, TiltReport)> {
    check_tilt_inputs(q, v, c, tol)?;
    let (vmin, vmax) = v.range_on(&q.support());
    let trivial = |lambda: f64, residual: f64| TiltReport {
        bisection_steps: 0,
        newton_steps: 0,
        bracket: (lambda, lambda),
        residual,
    };

    if is_flat(vmin, vmax) {
        let t = TiltedDistribution::new(q.clone(), v.clone(), 0.0)?;
        return Ok((t, trivial(0.0, (c - vmin).abs())));
    }

    let gap = |lambda: f64| mean_gap(q, v, c, lambda);
    let (g0, _) = gap(0.0);
    if g0.abs() <= tol {
        let t = TiltedDistribution::new(q.clone(), v.clone(), 0.0)?;
        return Ok((t, trivial(0.0, g0.abs())));
    }
    if c <= vmin + tol {
        let t = TiltedDistribution::new(q.clone(), v.clone(), f64::INFINITY)?;
        return Ok((t, trivial(f64::INFINITY, (vmin - c).abs())));
    }
    if c >= vmax - tol {
        let t = TiltedDistribution::new(q.clone(), v.clone(), f64::NEG_INFINITY)?;
        return Ok((t, trivial(f64::NEG_INFINITY, (vmax - c).abs())));
    }

    // The mean is strictly decreasing in λ, so gap(lo) > 0 > gap(hi) brackets the root.
    let cap = EXPONENT_CAP / (vmax - vmin);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while gap(hi).0 > 0.0 {
        if hi >= cap {
            return Err(Error::NonConvergence { iterations: 0, residual: gap(hi).0.abs() });
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
    }
    while gap(lo).0 < 0.0 {
        if lo <= -cap {
            return Err(Error::NonConvergence { iterations: 0, residual: gap(lo).0.abs() });
        }
        hi = lo;
        lo = (2.0 * lo).max(-cap);
    }

    // bisection to a coarse level, then safeguarded Newton
    let coarse = 1e-3 * (vmax - vmin);
    let mut bisection_steps = 0;
    let mut lambda = 0.5 * (lo + hi);
    let (mut g, mut var) = gap(lambda);
    while g.abs() > coarse && bisection_steps < 200 {
        if g > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
        (g, var) = gap(lambda);
        bisection_steps += 1;
    }

    let floor = 1e-3 * tol;
    let mut newton_steps = 0;
    let mut best = (lambda, g);
    while newton_steps < 100 {
        if g.abs() <= floor {
            break;
        }
        if g > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let mut next = if var > 0.0 { lambda + g / var } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - lambda).abs() <= 4.0 * f64::EPSILON * (1.0 + lambda.abs()) {
            break;
        }
        lambda = next;
        (g, var) = gap(lambda);
        newton_steps += 1;
        if g.abs() < best.1.abs() {
            best = (lambda, g);
        }
    }
    let (lambda, g) = best;
    if g.abs() > tol {
        return Err(Error::NonConvergence {
            iterations: bisection_steps + newton_steps,
            residual: g.abs(),
        });
    }
    let t = TiltedDistribution::new(q.clone(), v.clone(), lambda)?;
    Ok((
        t,
        TiltReport {
            bisection_steps,
            newton_steps,
            bracket: (lo, hi),
            residual: g.abs(),
        },
    ))
}

/// `(E_{p_λ}[V] − c, Var_{p_λ}[V])`, evaluated in the log domain.
fn mean_gap(q: &FiniteDistribution, v: &Potential, c: f64, lambda: f64) -> (f64, f64) {
    let logw = tilted_log_weights(q, v, lambda);
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m = 0.0;
    for (&a, &vi) in logw.iter().zip(v.values()) {
        let w = (a - max).exp();
        z += w;
        m += w * (vi - c);
    }
    let gap = m / z;
    let mut var = 0.0;
    for (&a, &vi) in logw.iter().zip(v.values()) {
        let w = (a - max).exp() / z;
        var += w * (vi - c - gap).powi(2);
    }
    (gap, var)
}
