use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Alphabet, FiniteDistribution};
use crate::error::{Error, Result};

/// A type vector: symbol counts of a sample of size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    alphabet: Alphabet,
    counts: Vec<u64>,
    n: u64,
}

impl EmpiricalMeasure {
    pub fn from_counts(alphabet: Alphabet, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != alphabet.len() {
            return Err(Error::AlphabetMismatch {
                expected: alphabet.len(),
                actual: counts.len(),
            });
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self { alphabet, counts, n })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn frequencies(&self) -> FiniteDistribution {
        let n = self.n as f64;
        let w = self.counts.iter().map(|&c| c as f64 / n).collect();
        FiniteDistribution::new(self.alphabet.clone(), w)
            .expect("counts / n is a valid distribution")
    }

    /// Exact multinomial log-probability of this type class under `base`.
    pub fn log_probability(&self, base: &FiniteDistribution) -> Result<f64> {
        if base.len() != self.counts.len() {
            return Err(Error::AlphabetMismatch {
                expected: self.counts.len(),
                actual: base.len(),
            });
        }
        Ok(multinomial_log_prob(&self.counts, base.weights()))
    }
}

/// `ln( n! / Π c_i! · Π p_i^{c_i} )`, with `0·ln 0 = 0` and `-inf` for counts on zero-mass symbols.
pub fn multinomial_log_prob(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut lp = ln_gamma(n as f64 + 1.0);
    for (&c, &p) in counts.iter().zip(probs) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        lp += c as f64 * p.ln() - ln_gamma(c as f64 + 1.0);
    }
    lp
}

/// Counts the symbol indices of a sample.
pub fn empirical_from_samples(alphabet: &Alphabet, samples: &[usize]) -> Result<EmpiricalMeasure> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = alphabet.len();
    let mut counts = vec![0u64; k];
    for &s in samples {
        if s >= k {
            return Err(Error::IndexOutOfRange { index: s, size: k });
        }
        counts[s] += 1;
    }
    EmpiricalMeasure::from_counts(alphabet.clone(), counts)
}
