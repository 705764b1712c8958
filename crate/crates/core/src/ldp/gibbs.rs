use serde::Serialize;

use super::types::{enumerate_types, in_window};
use crate::error::{Error, Result};
use crate::maxent::{i_projection, ConstraintSpec, Target, TiltedDistribution};
use crate::measures::FiniteDistribution;
use crate::numeric::total_variation;

/// Exact conditional mean of `L_n` given `V·L_n ∈ Ξ`, next to the I-projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningResult {
    pub window: (f64, f64),
    pub n: usize,
    pub conditioned_mean_measure: FiniteDistribution,
    pub predicted: TiltedDistribution,
    pub tv_distance: f64,
}

/// `E[L_n | V·L_n ∈ Ξ]` by exact enumeration, compared in total variation with
/// the I-projection of `p` onto the window's dominating point.
pub fn gibbs_conditioning(
    p: &FiniteDistribution,
    constraint: &ConstraintSpec,
    n: usize,
) -> Result<ConditioningResult> {
    let (lo, hi) = constraint.target.bounds();
    let window = ConstraintSpec::new(constraint.potential.clone(), Target::Interval(lo, hi))?;
    let predicted = i_projection(p, &window)?.tilt;
    let table = enumerate_types(p, n)?;

    let inside: Vec<usize> = (0..table.len())
        .filter(|&i| table.log_prob(i) > f64::NEG_INFINITY)
        .filter(|&i| in_window(table.mean(i, &window.potential), &window.target))
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyEvent { n });
    }
    let max = inside
        .iter()
        .map(|&i| table.log_prob(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut mass = vec![0.0; p.len()];
    let mut total = 0.0;
    for &i in &inside {
        let w = (table.log_prob(i) - max).exp();
        total += w;
        for (m, f) in mass.iter_mut().zip(table.frequencies(i)) {
            *m += w * f;
        }
    }
    mass.iter_mut().for_each(|m| *m /= total);
    let conditioned = FiniteDistribution::from_masses(p.alphabet().clone(), mass)?;
    let tv = total_variation(conditioned.weights(), predicted.realized().weights());
    Ok(ConditioningResult {
        window: (lo, hi),
        n,
        conditioned_mean_measure: conditioned,
        predicted,
        tv_distance: tv.clamp(0.0, 1.0),
    })
}
