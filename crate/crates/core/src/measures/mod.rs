//! Finite probability measures, empirical measures, loss matrices and the
//! Bayes classifier.

mod alphabet;
mod bayes;
mod distribution;
mod empirical;
mod info;
mod loss;

pub use alphabet::{Alphabet, Symbol};
pub use bayes::{bayes_classifier, row_risks, BayesDecision};
pub use distribution::{FiniteDistribution, NORM_TOL, RENORM_TOL};
pub use empirical::{empirical_from_samples, multinomial_log_prob, EmpiricalMeasure};
pub use info::{expected_loss, kl_divergence, shannon_entropy};
pub(crate) use info::dot;
pub use loss::{LossMatrix, Potential};
