//! Projections under divergences other than the relative entropy, and the
//! diagnostics that compare them with the exponential tilt.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::constraint::ConstraintSpec;
use super::projection::i_projection;
use super::tilt::{solve_tilt, TiltedDistribution};
use crate::error::{Error, Result};
use crate::measures::FiniteDistribution;
use crate::numeric::{affine_residual, total_variation};

pub const DEFAULT_KKT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100_000;

/// The supported divergence generators `G(p, q)`. Each is convex in `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `Σ p ln(p/q)`
    Kl,
    /// `Σ q ln(q/p)`
    ReverseKl,
    /// `Σ (p − q)²`
    SquaredEuclidean,
    /// `Σ (p − q)² / q`
    ChiSquared,
}

impl Generator {
    pub const ALL: [Generator; 4] = [
        Generator::Kl,
        Generator::ReverseKl,
        Generator::SquaredEuclidean,
        Generator::ChiSquared,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Kl => "kl",
            Generator::ReverseKl => "reverse_kl",
            Generator::SquaredEuclidean => "squared_euclidean",
            Generator::ChiSquared => "chi_squared",
        }
    }

    /// `G(p, q)` summed over `idx`.
    pub fn value(self, p: &[f64], q: &[f64], idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&i| {
                let (pi, qi) = (p[i], q[i]);
                match self {
                    Generator::Kl if pi > 0.0 => pi * (pi / qi).ln(),
                    Generator::Kl => 0.0,
                    Generator::ReverseKl => qi * (qi / pi).ln(),
                    Generator::SquaredEuclidean => (pi - qi).powi(2),
                    Generator::ChiSquared => (pi - qi).powi(2) / qi,
                }
            })
            .sum()
    }

    /// `∂G/∂p_i`.
    pub fn gradient(self, p: &[f64], q: &[f64], i: usize) -> f64 {
        let (pi, qi) = (p[i], q[i]);
        match self {
            Generator::Kl => (pi / qi).ln() + 1.0,
            Generator::ReverseKl => -qi / pi,
            Generator::SquaredEuclidean => 2.0 * (pi - qi),
            Generator::ChiSquared => 2.0 * (pi - qi) / qi,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnsupportedGenerator(s.to_owned()))
    }
}

/// A divergence generator plus optional parameters. None of the supported
/// forms take parameters, so the list must be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<f64>,
}

impl DivergenceSpec {
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            parameters: Vec::new(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    fn validate(&self) -> Result<()> {
        if !self.parameters.is_empty() {
            return Err(Error::InvalidInput(format!(
                "generator {} takes no parameters",
                self.generator
            )));
        }
        Ok(())
    }
}

/// Outcome of [`divergence_projection`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceProjection {
    pub distribution: FiniteDistribution,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Minimizes `G(p, q)` over the simplex (restricted to the support of `q`)
/// subject to the moment constraint.
///
/// Entropic mirror descent: each step multiplies `p` by `exp(−η ∇G)` and maps
/// the result back onto the constraint set by its KL projection, which is an
/// exponential tilt. The step size halves whenever the objective would increase.
pub fn divergence_projection(
    spec: &DivergenceSpec,
    q: &FiniteDistribution,
    constraint: &ConstraintSpec,
    tol: f64,
) -> Result<DivergenceProjection> {
    spec.validate()?;
    let v = &constraint.potential;
    let c = constraint.dominating_point(q, 0.0)?;
    let inner_tol = 1e-13 * (1.0 + v.values().iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let start = solve_tilt(q, v, c, inner_tol.max(1e-12))?;
    let g = spec.generator;
    let qw = q.weights();

    let mut p = start.into_realized();
    let active = p.support();
    let objective = |p: &FiniteDistribution| g.value(p.weights(), qw, &active);
    let residual = |p: &FiniteDistribution| kkt_residual(g, p.weights(), qw, v.values(), &active);

    let mut obj = objective(&p);
    let mut res = residual(&p);
    let mut eta = 1.0;
    let mut iterations = 0;
    while res > tol {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence { iterations, residual: res });
        }
        iterations += 1;
        let grad: Vec<f64> = active.iter().map(|&i| g.gradient(p.weights(), qw, i)).collect();
        let shift = grad.iter().sum::<f64>() / grad.len() as f64;

        let mut accepted = false;
        for _ in 0..80 {
            let mut logy = vec![f64::NEG_INFINITY; p.len()];
            for (j, &i) in active.iter().enumerate() {
                logy[i] = p.weights()[i].ln() - eta * (grad[j] - shift);
            }
            let max = logy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let masses = logy.iter().map(|&a| (a - max).exp()).collect();
            let y = FiniteDistribution::from_masses(q.alphabet().clone(), masses)?;
            let candidate = match solve_tilt(&y, v, c, inner_tol.max(1e-12)) {
                Ok(t) => t.into_realized(),
                Err(_) => {
                    eta *= 0.5;
                    continue;
                }
            };
            let cand_obj = objective(&candidate);
            let cand_res = residual(&candidate);
            let flat = cand_obj <= obj + 1e-14 * (1.0 + obj.abs());
            if cand_obj < obj || (flat && cand_res < res) {
                p = candidate;
                obj = cand_obj;
                res = cand_res;
                eta *= 1.5;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res > tol {
        return Err(Error::NonConvergence { iterations, residual: res });
    }
    Ok(DivergenceProjection {
        distribution: p,
        objective: obj,
        iterations,
        kkt_residual: res,
    })
}

/// Natural KKT residual `max_i |min(p_i, r_i)|`, where `r` is the gradient with
/// its best (p-weighted) fit in span{1, V} removed.
fn kkt_residual(g: Generator, p: &[f64], q: &[f64], v: &[f64], active: &[usize]) -> f64 {
    let mut grad = vec![0.0; p.len()];
    for &i in active {
        grad[i] = g.gradient(p, q, i);
    }
    let r = affine_residual(&grad, v, p, active);
    active
        .iter()
        .map(|&i| p[i].min(r[i]).abs())
        .fold(0.0, f64::max)
}

/// Total-variation distance between the `spec` projection and the KL projection.
pub fn necessity_gap(
    spec: &DivergenceSpec,
    q: &FiniteDistribution,
    constraint: &ConstraintSpec,
    tol: f64,
) -> Result<f64> {
    let other = divergence_projection(spec, q, constraint, tol)?;
    let kl = i_projection(q, constraint)?;
    Ok(total_variation(
        other.distribution.weights(),
        kl.tilt.realized().weights(),
    ))
}

/// Max-norm of the Euler–Lagrange residual of `G(·, q)` at the tilted measure,
/// after removing the constant and potential directions (the multiplier terms).
pub fn stationarity_residual(spec: &DivergenceSpec, candidate: &TiltedDistribution) -> Result<f64> {
    spec.validate()?;
    let p = candidate.realized().weights();
    let q = candidate.reference().weights();
    let v = candidate.potential().values();
    let idx = candidate.realized().support();
    let mut grad = vec![0.0; p.len()];
    for &i in &idx {
        grad[i] = spec.generator.gradient(p, q, i);
    }
    let r = affine_residual(&grad, v, &vec![1.0; p.len()], &idx);
    Ok(idx.iter().map(|&i| r[i].abs()).fold(0.0, f64::max))
}
