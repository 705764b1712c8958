use serde::{Deserialize, Serialize};

use super::alphabet::Alphabet;
use crate::error::{Error, Result};

/// Maximum allowed deviation of the total mass from one after construction.
pub const NORM_TOL: f64 = 1e-12;
/// Inputs within this distance of unit mass are renormalized; anything worse is rejected.
pub const RENORM_TOL: f64 = 1e-9;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct FiniteDistribution {
    alphabet: Alphabet,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    alphabet: Alphabet,
    weights: Vec<f64>,
}

impl TryFrom<RawDistribution> for FiniteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        FiniteDistribution::new(raw.alphabet, raw.weights)
    }
}

impl From<FiniteDistribution> for RawDistribution {
    fn from(d: FiniteDistribution) -> Self {
        RawDistribution {
            alphabet: d.alphabet,
            weights: d.weights,
        }
    }
}

impl FiniteDistribution {
    pub fn new(alphabet: Alphabet, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != alphabet.len() {
            return Err(Error::AlphabetMismatch {
                expected: alphabet.len(),
                actual: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > RENORM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} is not within {RENORM_TOL:e} of 1"
            )));
        }
        // leave exact inputs untouched so JSON round-trips stay value-exact
        if (total - 1.0).abs() > NORM_TOL {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self { alphabet, weights })
    }

    /// Distribution over the indexed alphabet `{0, ..., k-1}`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        Self::new(Alphabet::indexed(weights.len()), weights)
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.len();
        Self {
            alphabet,
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Result<Self> {
        if index >= alphabet.len() {
            return Err(Error::IndexOutOfRange {
                index,
                size: alphabet.len(),
            });
        }
        let mut weights = vec![0.0; alphabet.len()];
        weights[index] = 1.0;
        Ok(Self { alphabet, weights })
    }

    /// Normalizes arbitrary non-negative masses. Used internally where the
    /// total is known to be positive and finite.
    pub(crate) fn from_masses(alphabet: Alphabet, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "cannot normalize total mass {total}"
            )));
        }
        let weights = masses.into_iter().map(|m| m / total).collect();
        Self::new(alphabet, weights)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    pub(crate) fn check_same_alphabet(&self, other: &FiniteDistribution) -> Result<()> {
        if self.alphabet.len() != other.alphabet.len() || self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch {
                expected: self.alphabet.len(),
                actual: other.alphabet.len(),
            });
        }
        Ok(())
    }

    /// Convex combination `alpha·self + (1 - alpha)·other`.
    pub fn mix(&self, other: &FiniteDistribution, alpha: f64) -> Result<Self> {
        self.check_same_alphabet(other)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("mixing weight {alpha} not in [0, 1]")));
        }
        let masses = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        Self::from_masses(self.alphabet.clone(), masses)
    }

    pub fn total_variation(&self, other: &FiniteDistribution) -> Result<f64> {
        self.check_same_alphabet(other)?;
        Ok(crate::numeric::total_variation(&self.weights, &other.weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renormalizes_small_drift_and_rejects_large() {
        let d = FiniteDistribution::from_weights(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() <= NORM_TOL);
        assert!(FiniteDistribution::from_weights(vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::from_weights(vec![1.5, -0.5]).is_err());
        assert!(FiniteDistribution::from_weights(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn alphabet_length_is_checked() {
        let err = FiniteDistribution::new(Alphabet::indexed(3), vec![0.5, 0.5]).unwrap_err();
        assert_eq!(err, Error::AlphabetMismatch { expected: 3, actual: 2 });
    }

    #[test]
    fn json_schema() {
        let d: FiniteDistribution =
            serde_json::from_str(r#"{"alphabet": ["a", "b"], "weights": [0.25, 0.75]}"#).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<FiniteDistribution>(
            r#"{"alphabet": ["a", "b"], "weights": [0.25, 0.25]}"#
        )
        .is_err());
    }

    proptest! {
        // decimal inputs with at most 15 significant digits survive a JSON round trip bit-for-bit
        #[test]
        fn json_round_trip_is_exact(parts in proptest::collection::vec(1u64..=1_000_000_000, 1..5)) {
            let scale: u64 = 100_000_000_000_000; // 1e14
            let used: u64 = parts.iter().sum();
            prop_assume!(used < scale);
            let mut ints = parts.clone();
            ints.push(scale - used);
            let literals: Vec<String> = ints
                .iter()
                .map(|m| format!("0.{:014}", m))
                .collect();
            let text = format!(
                "{{\"alphabet\": {:?}, \"weights\": [{}]}}",
                (0..ints.len()).collect::<Vec<_>>(),
                literals.join(",")
            );
            let expected: Vec<f64> = literals.iter().map(|l| l.parse().unwrap()).collect();
            let d: FiniteDistribution = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(d.weights(), &expected[..]);
            let back: FiniteDistribution =
                serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
            prop_assert_eq!(back.weights(), &expected[..]);
        }
    }
}
