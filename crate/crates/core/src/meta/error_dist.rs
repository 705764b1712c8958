use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::enumerate_types;
use crate::measures::{Alphabet, FiniteDistribution, Potential, Symbol};
use crate::numeric::log_sum_exp;

/// Expected-loss values closer than this (relative to `1 + |ξ|`) are one support point.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactEnumeration,
    Fitted,
}

/// A distribution over attainable expected-loss values ξ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawErrorDistribution", into = "RawErrorDistribution")]
pub struct ErrorDistribution {
    support: Vec<f64>,
    weights: FiniteDistribution,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawErrorDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
    #[serde(default = "fitted")]
    provenance: Provenance,
}

fn fitted() -> Provenance {
    Provenance::Fitted
}

impl TryFrom<RawErrorDistribution> for ErrorDistribution {
    type Error = Error;
    fn try_from(raw: RawErrorDistribution) -> Result<Self> {
        Self::new(raw.support, raw.weights, raw.provenance)
    }
}

impl From<ErrorDistribution> for RawErrorDistribution {
    fn from(d: ErrorDistribution) -> Self {
        RawErrorDistribution {
            support: d.support,
            weights: d.weights.weights().to_vec(),
            provenance: d.provenance,
        }
    }
}

fn support_alphabet(support: &[f64]) -> Result<Alphabet> {
    Alphabet::new(support.iter().map(|&x| Symbol::from(x)).collect())
}

impl ErrorDistribution {
    pub fn new(support: Vec<f64>, weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if support.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("error support must be finite".into()));
        }
        if support.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("error support must be strictly increasing".into()));
        }
        let weights = FiniteDistribution::new(support_alphabet(&support)?, weights)?;
        Ok(Self {
            support,
            weights,
            provenance,
        })
    }

    pub(crate) fn from_parts(support: Vec<f64>, weights: FiniteDistribution, provenance: Provenance) -> Self {
        Self {
            support,
            weights,
            provenance,
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &FiniteDistribution {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(self.weights.weights()).map(|(x, w)| x * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(self.weights.weights())
            .map(|(x, w)| w * (x - m) * (x - m))
            .sum()
    }

    /// Weight of the support point equal to `xi` (within [`MERGE_TOL`]), zero otherwise.
    pub fn weight_at(&self, xi: f64) -> f64 {
        self.support
            .iter()
            .position(|&s| (s - xi).abs() <= MERGE_TOL * (1.0 + xi.abs()))
            .map_or(0.0, |i| self.weights.weights()[i])
    }
}

/// Law of `V·L_n` under `P^n`, by grouping type classes on their expected loss.
pub fn error_distribution_exact(
    p: &FiniteDistribution,
    loss_row: &Potential,
    n: usize,
) -> Result<ErrorDistribution> {
    loss_row.check_len(p.len())?;
    let table = enumerate_types(p, n)?;
    let mut points: Vec<(f64, f64)> = (0..table.len())
        .filter(|&i| table.log_prob(i) > f64::NEG_INFINITY)
        .map(|i| (table.mean(i, loss_row), table.log_prob(i)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut support = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    let mut anchor = f64::NAN;
    for (xi, lp) in points {
        if groups.is_empty() || (xi - anchor).abs() > MERGE_TOL * (1.0 + anchor.abs()) {
            anchor = xi;
            support.push(xi);
            groups.push(Vec::new());
        }
        groups.last_mut().expect("group exists").push(lp);
    }
    let masses: Vec<f64> = groups
        .iter()
        .map(|g| log_sum_exp(g.iter().copied()).exp())
        .collect();
    let weights = FiniteDistribution::from_masses(support_alphabet(&support)?, masses)?;
    Ok(ErrorDistribution::from_parts(support, weights, Provenance::ExactEnumeration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::error_rate_function;

    fn bern(p: f64) -> FiniteDistribution {
        FiniteDistribution::from_weights(vec![1.0 - p, p]).unwrap()
    }
    fn v01() -> Potential {
        Potential::new(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn two_draws() {
        let d = error_distribution_exact(&bern(0.5), &v01(), 2).unwrap();
        assert_eq!(d.support(), &[0.0, 0.5, 1.0]);
        for (w, e) in d.weights().weights().iter().zip([0.25, 0.5, 0.25]) {
            assert!((w - e).abs() < 1e-14);
        }
        assert_eq!(d.provenance(), Provenance::ExactEnumeration);
    }

    #[test]
    fn single_draw_is_pushforward() {
        let p = FiniteDistribution::from_weights(vec![0.2, 0.5, 0.3]).unwrap();
        let v = Potential::new(vec![3.0, -1.0, 2.0]).unwrap();
        let d = error_distribution_exact(&p, &v, 1).unwrap();
        assert_eq!(d.support(), &[-1.0, 2.0, 3.0]);
        let w = d.weights().weights();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.3).abs() < 1e-15 && (w[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn central_binomial_weight() {
        let d = error_distribution_exact(&bern(0.5), &v01(), 10).unwrap();
        assert_eq!(d.len(), 11);
        assert!((d.weight_at(0.5) - 252.0 / 1024.0).abs() < 1e-12);
        assert!((d.weight_at(0.5) - 0.246094).abs() < 1e-6);
    }

    #[test]
    fn coinciding_losses_merge() {
        // symbols 1 and 2 share a loss, so (1,1,0)-style types collide
        let p = FiniteDistribution::uniform(Alphabet::indexed(3));
        let v = Potential::new(vec![0.0, 1.0, 1.0]).unwrap();
        let d = error_distribution_exact(&p, &v, 3).unwrap();
        assert_eq!(d.len(), 4);
        // P(Bin(3, 2/3) = 3) = 8/27
        assert!((d.weight_at(1.0) - 8.0 / 27.0).abs() < 1e-14);
    }

    #[test]
    fn zero_mass_symbols_do_not_add_support() {
        let p = FiniteDistribution::from_weights(vec![0.5, 0.0, 0.5]).unwrap();
        let v = Potential::new(vec![0.0, 7.0, 1.0]).unwrap();
        let d = error_distribution_exact(&p, &v, 2).unwrap();
        assert_eq!(d.support(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn level_coherence_at_sixty() {
        let d = error_distribution_exact(&bern(0.5), &v01(), 60).unwrap();
        let rates = error_rate_function(&bern(0.5), &v01(), &[0.7, 0.8]).unwrap();
        for (xi, rate) in rates {
            let finite_n = -d.weight_at(xi).ln() / 60.0;
            let gap = (finite_n - rate.unwrap()).abs();
            assert!(gap <= 0.05, "ξ={xi}: {gap}");
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d = error_distribution_exact(&bern(0.3), &v01(), 4).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<ErrorDistribution>(&s).unwrap(), d);
        assert!(ErrorDistribution::new(vec![1.0, 0.0], vec![0.5, 0.5], Provenance::Fitted).is_err());
    }
}
