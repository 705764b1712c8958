use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxent::{i_projection, ConstraintSpec};
use crate::measures::{FiniteDistribution, Potential};

/// `I(ξ) = inf { D(μ ‖ P) : V·μ = ξ }` on each grid point. Infeasible points
/// carry their error instead of a value.
pub fn error_rate_function(
    p: &FiniteDistribution,
    loss_row: &Potential,
    xi_grid: &[f64],
) -> Result<Vec<(f64, Result<f64>)>> {
    loss_row.check_len(p.len())?;
    Ok(xi_grid
        .iter()
        .map(|&xi| {
            let rate = ConstraintSpec::point(loss_row.clone(), xi)
                .and_then(|c| i_projection(p, &c))
                .map(|proj| proj.rate);
            (xi, rate)
        })
        .collect())
}

/// A rate function pushed through a map on a finite grid: `J(η) = min { I(ξ) : f(ξ) = η }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractedRate {
    /// `(η, J(η))`, sorted by η.
    pub points: Vec<(f64, f64)>,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

impl ContractedRate {
    pub fn eval(&self, eta: f64) -> Result<f64> {
        self.points
            .iter()
            .find(|(e, _)| same_value(*e, eta))
            .map(|&(_, j)| j)
            .ok_or(Error::EmptyPreimage(eta))
    }
}

/// Grid-level contraction principle.
pub fn contract_rate(rate: &[(f64, f64)], pushforward: impl Fn(f64) -> f64) -> Result<ContractedRate> {
    let mut images: Vec<(f64, f64)> = Vec::with_capacity(rate.len());
    for &(xi, i) in rate {
        let eta = pushforward(xi);
        if !eta.is_finite() {
            return Err(Error::InvalidInput(format!("pushforward of {xi} is not finite")));
        }
        images.push((eta, i));
    }
    images.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (eta, i) in images {
        match points.last_mut() {
            Some(last) if same_value(last.0, eta) => last.1 = last.1.min(i),
            _ => points.push((eta, i)),
        }
    }
    Ok(ContractedRate { points })
}
