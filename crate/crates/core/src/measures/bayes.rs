use serde::{Deserialize, Serialize};

use super::{FiniteDistribution, LossMatrix};
use crate::error::{Error, Result};
use crate::numeric::TIE_TOL;

/// The Bayes-optimal prediction for a posterior together with its risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesDecision {
    pub decision_index: usize,
    pub expected_loss: f64,
}

/// Expected loss `Σ_y L(z, y) p(y)` of every prediction row.
pub fn row_risks(posterior: &FiniteDistribution, loss: &LossMatrix) -> Result<Vec<f64>> {
    if loss.label_alphabet() != posterior.alphabet() {
        return Err(Error::AlphabetMismatch {
            expected: posterior.len(),
            actual: loss.label_alphabet().len(),
        });
    }
    Ok(loss
        .entries()
        .iter()
        .map(|row| super::info::dot(row, posterior.weights()))
        .collect())
}

/// Minimizes the conditionally expected loss over predictions. Ties within
/// `1e-12` go to the lowest index.
pub fn bayes_classifier(posterior: &FiniteDistribution, loss: &LossMatrix) -> Result<BayesDecision> {
    let risks = row_risks(posterior, loss)?;
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let decision_index = risks
        .iter()
        .position(|&r| r <= min + TIE_TOL)
        .expect("loss matrix has at least one row");
    Ok(BayesDecision {
        decision_index,
        expected_loss: risks[decision_index],
    })
}
