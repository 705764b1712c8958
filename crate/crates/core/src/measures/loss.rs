use serde::{Deserialize, Serialize};

use super::Alphabet;
use crate::error::{Error, Result};

/// Loss values `L(z, y)`: rows are predictions, columns are labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoss", into = "RawLoss")]
pub struct LossMatrix {
    prediction_alphabet: Alphabet,
    label_alphabet: Alphabet,
    entries: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawLoss {
    prediction_alphabet: Alphabet,
    label_alphabet: Alphabet,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<RawLoss> for LossMatrix {
    type Error = Error;
    fn try_from(r: RawLoss) -> Result<Self> {
        LossMatrix::new(r.prediction_alphabet, r.label_alphabet, r.entries)
    }
}

impl From<LossMatrix> for RawLoss {
    fn from(l: LossMatrix) -> Self {
        RawLoss {
            prediction_alphabet: l.prediction_alphabet,
            label_alphabet: l.label_alphabet,
            entries: l.entries,
        }
    }
}

impl LossMatrix {
    pub fn new(
        prediction_alphabet: Alphabet,
        label_alphabet: Alphabet,
        entries: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if entries.len() != prediction_alphabet.len() {
            return Err(Error::AlphabetMismatch {
                expected: prediction_alphabet.len(),
                actual: entries.len(),
            });
        }
        for row in &entries {
            if row.len() != label_alphabet.len() {
                return Err(Error::AlphabetMismatch {
                    expected: label_alphabet.len(),
                    actual: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "loss entry {v} is negative or not finite"
                )));
            }
        }
        Ok(Self {
            prediction_alphabet,
            label_alphabet,
            entries,
        })
    }

    /// Square zero-one loss over the indexed alphabet of size `k`.
    pub fn zero_one(k: usize) -> Self {
        let entries = (0..k)
            .map(|z| (0..k).map(|y| if z == y { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(Alphabet::indexed(k), Alphabet::indexed(k), entries).unwrap()
    }

    /// `L(z, y) = (z - y)²` over numeric prediction and label values.
    pub fn quadratic(predictions: &[f64], labels: &[f64]) -> Result<Self> {
        let entries = predictions
            .iter()
            .map(|z| labels.iter().map(|y| (z - y) * (z - y)).collect())
            .collect();
        let pa = Alphabet::new(predictions.iter().map(|&z| z.into()).collect())?;
        let la = Alphabet::new(labels.iter().map(|&y| y.into()).collect())?;
        Self::new(pa, la, entries)
    }

    pub fn prediction_alphabet(&self) -> &Alphabet {
        &self.prediction_alphabet
    }

    pub fn label_alphabet(&self) -> &Alphabet {
        &self.label_alphabet
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn row(&self, z: usize) -> Result<Potential> {
        self.entries
            .get(z)
            .map(|r| Potential(r.clone()))
            .ok_or(Error::IndexOutOfRange {
                index: z,
                size: self.entries.len(),
            })
    }

    /// The potential of a single-row matrix.
    pub fn as_potential(&self) -> Result<Potential> {
        if self.entries.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "expected a single-row loss matrix, got {} rows",
                self.entries.len()
            )));
        }
        self.row(0)
    }

    /// `a·L + b`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|r| r.iter().map(|v| a * v + b).collect())
            .collect();
        Self::new(
            self.prediction_alphabet.clone(),
            self.label_alphabet.clone(),
            entries,
        )
    }
}

/// A real-valued function on a finite alphabet, e.g. one row of a loss matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Potential(Vec<f64>);

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("potential must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("potential value {v} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(min, max)` over the given indices.
    pub fn range_on(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(self.0[i]), hi.max(self.0[i]))
        })
    }

    pub(crate) fn check_len(&self, k: usize) -> Result<()> {
        if self.0.len() != k {
            return Err(Error::AlphabetMismatch {
                expected: k,
                actual: self.0.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Potential {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Potential::new(v)
    }
}

impl From<Potential> for Vec<f64> {
    fn from(p: Potential) -> Self {
        p.0
    }
}
