//! JSON input forms shared by the commands.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::maxent::{ConstraintSpec, Target};
use crate::measures::{Alphabet, FiniteDistribution, LossMatrix, Potential, Symbol};
use crate::numeric::format_f64;

/// Deserializes command inputs, reporting shape errors as `ConfigInvalid`.
pub(crate) fn parse<T: DeserializeOwned>(command: &str, inputs: &Value) -> Result<T> {
    serde_json::from_value(inputs.clone()).map_err(|e| Error::ConfigInvalid(format!("{command} inputs: {e}")))
}

fn shape<T: DeserializeOwned>(what: &str, value: &Value) -> Result<T> {
    serde_json::from_value(value.clone()).map_err(|e| Error::ConfigInvalid(format!("{what}: {e}")))
}

/// A bare weight array, or `{"alphabet": [...], "weights": [...]}`.
pub(crate) fn distribution(what: &str, value: &Value) -> Result<FiniteDistribution> {
    match value {
        Value::Array(_) => FiniteDistribution::from_weights(shape(what, value)?),
        Value::Object(_) => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Raw {
                alphabet: Vec<Symbol>,
                weights: Vec<f64>,
            }
            let raw: Raw = shape(what, value)?;
            FiniteDistribution::new(Alphabet::new(raw.alphabet)?, raw.weights)
        }
        _ => Err(Error::ConfigInvalid(format!("{what} must be an array or an object"))),
    }
}

/// A constraint from `potential` and exactly one of `target` or `target_interval`.
pub(crate) fn constraint(potential: &[f64], target: Option<f64>, interval: Option<[f64; 2]>) -> Result<ConstraintSpec> {
    let target = match (target, interval) {
        (Some(c), None) => Target::Point(c),
        (None, Some([lo, hi])) => Target::Interval(lo, hi),
        _ => {
            return Err(Error::ConfigInvalid(
                "exactly one of `target` or `target_interval` is required".into(),
            ))
        }
    };
    ConstraintSpec::new(Potential::new(potential.to_vec())?, target)
}

/// A bare `[[...], ...]` matrix (rows are predictions, columns follow the
/// posterior's alphabet) or the full `{"prediction_alphabet", "label_alphabet", "entries"}` form.
pub(crate) fn loss_matrix(value: &Value, labels: &Alphabet) -> Result<LossMatrix> {
    match value {
        Value::Array(_) => {
            let entries: Vec<Vec<f64>> = shape("loss", value)?;
            if entries.is_empty() {
                return Err(Error::InvalidInput("loss matrix needs at least one row".into()));
            }
            LossMatrix::new(Alphabet::indexed(entries.len()), labels.clone(), entries)
        }
        Value::Object(_) => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Raw {
                prediction_alphabet: Vec<Symbol>,
                #[serde(default)]
                label_alphabet: Option<Vec<Symbol>>,
                entries: Vec<Vec<f64>>,
            }
            let raw: Raw = shape("loss", value)?;
            let label_alphabet = match raw.label_alphabet {
                Some(s) => Alphabet::new(s)?,
                None => labels.clone(),
            };
            LossMatrix::new(Alphabet::new(raw.prediction_alphabet)?, label_alphabet, raw.entries)
        }
        _ => Err(Error::ConfigInvalid("loss must be an array or an object".into())),
    }
}

/// Sample sizes: an explicit list or an inclusive `{"start", "stop", "step"}` range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub(crate) enum NGrid {
    List(Vec<usize>),
    Range { start: usize, stop: usize, step: usize },
}

impl NGrid {
    pub fn values(&self) -> Result<Vec<usize>> {
        let grid = match *self {
            NGrid::List(ref v) => v.clone(),
            NGrid::Range { start, stop, step } => {
                if step == 0 || stop < start {
                    return Err(Error::InvalidInput(format!(
                        "invalid n range start {start}, stop {stop}, step {step}"
                    )));
                }
                (start..=stop).step_by(step).collect()
            }
        };
        if grid.is_empty() || grid.contains(&0) {
            return Err(Error::InvalidInput("n grid must be non-empty with positive entries".into()));
        }
        Ok(grid)
    }
}

/// A double as JSON; non-finite values become the strings `inf`, `-inf`, `NaN`.
pub(crate) fn jf(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(format_f64(x)), Value::Number)
}

pub(crate) fn jv(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| jf(x)).collect())
}

pub(crate) fn jopt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, jf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn distribution_forms() {
        let d = distribution("p", &json!([0.25, 0.75])).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
        let d = distribution("p", &json!({"alphabet": ["a", "b"], "weights": [0.5, 0.5]})).unwrap();
        assert_eq!(d.alphabet().symbols()[1], Symbol::from("b"));
        assert_eq!(
            distribution("p", &json!([0.5, 0.6])).unwrap_err().code(),
            "InvalidDistribution"
        );
        assert_eq!(distribution("p", &json!("x")).unwrap_err().code(), "ConfigInvalid");
    }

    #[test]
    fn n_grid_forms() {
        let g: NGrid = serde_json::from_value(json!({"start": 100, "stop": 400, "step": 20})).unwrap();
        assert_eq!(g.values().unwrap().len(), 16);
        let g: NGrid = serde_json::from_value(json!([5, 10])).unwrap();
        assert_eq!(g.values().unwrap(), vec![5, 10]);
        let g: NGrid = serde_json::from_value(json!([0])).unwrap();
        assert!(g.values().is_err());
    }

    #[test]
    fn constraint_needs_one_target() {
        assert!(constraint(&[0.0, 1.0], None, None).is_err());
        assert!(constraint(&[0.0, 1.0], Some(0.3), Some([0.2, 0.4])).is_err());
        let c = constraint(&[0.0, 1.0], None, Some([0.2, 0.4])).unwrap();
        assert_eq!(c.target, Target::Interval(0.2, 0.4));
    }

    #[test]
    fn non_finite_doubles_become_strings() {
        assert_eq!(jf(f64::INFINITY), json!("inf"));
        assert_eq!(jf(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(jf(0.5), json!(0.5));
    }
}
