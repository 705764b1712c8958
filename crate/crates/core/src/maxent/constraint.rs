use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{expected_loss, FiniteDistribution, Potential};

/// A point or closed-interval target for the expectation of a potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Point(f64),
    Interval(f64, f64),
}

impl Target {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Target::Point(c) => (c, c),
            Target::Interval(lo, hi) => (lo, hi),
        }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        let (lo, hi) = self.bounds();
        x >= lo - tol && x <= hi + tol
    }
}

/// A moment constraint `V·μ = c` or `V·μ ∈ [lo, hi]`.
///
/// JSON: `{"potential": [...], "target": 0.25}` or `{"potential": [...], "target_interval": [lo, hi]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraint", into = "RawConstraint")]
pub struct ConstraintSpec {
    pub potential: Potential,
    pub target: Target,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    potential: Potential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_interval: Option<[f64; 2]>,
}

impl TryFrom<RawConstraint> for ConstraintSpec {
    type Error = Error;
    fn try_from(r: RawConstraint) -> Result<Self> {
        let target = match (r.target, r.target_interval) {
            (Some(c), None) => Target::Point(c),
            (None, Some([lo, hi])) => Target::Interval(lo, hi),
            _ => {
                return Err(Error::InvalidInput(
                    "exactly one of `target` or `target_interval` is required".into(),
                ))
            }
        };
        ConstraintSpec::new(r.potential, target)
    }
}

impl From<ConstraintSpec> for RawConstraint {
    fn from(c: ConstraintSpec) -> Self {
        let (target, target_interval) = match c.target {
            Target::Point(x) => (Some(x), None),
            Target::Interval(lo, hi) => (None, Some([lo, hi])),
        };
        RawConstraint {
            potential: c.potential,
            target,
            target_interval,
        }
    }
}

impl ConstraintSpec {
    pub fn new(potential: Potential, target: Target) -> Result<Self> {
        let (lo, hi) = target.bounds();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput("constraint target must be finite".into()));
        }
        if lo > hi {
            return Err(Error::InvalidInput(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { potential, target })
    }

    pub fn point(potential: Potential, c: f64) -> Result<Self> {
        Self::new(potential, Target::Point(c))
    }

    pub fn interval(potential: Potential, lo: f64, hi: f64) -> Result<Self> {
        Self::new(potential, Target::Interval(lo, hi))
    }

    /// `[min V, max V]` over the support of `q`.
    pub fn attainable_range(&self, q: &FiniteDistribution) -> Result<(f64, f64)> {
        self.potential.check_len(q.len())?;
        Ok(self.potential.range_on(&q.support()))
    }

    /// The constraint value the I-projection of `q` lands on: the target itself
    /// for a point, `E_q[V]` when an interval contains it, else the nearer endpoint.
    pub fn dominating_point(&self, q: &FiniteDistribution, tol: f64) -> Result<f64> {
        let (vmin, vmax) = self.attainable_range(q)?;
        let (lo, hi) = self.target.bounds();
        if hi < vmin - tol || lo > vmax + tol {
            return Err(Error::InfeasibleConstraint {
                target: if hi < vmin { hi } else { lo },
                lo: vmin,
                hi: vmax,
            });
        }
        match self.target {
            Target::Point(c) => Ok(c),
            Target::Interval(lo, hi) => {
                let mean = expected_loss(q, &self.potential)?;
                Ok(mean.clamp(lo, hi))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let c: ConstraintSpec = serde_json::from_str(r#"{"potential": [0, 1], "target": 0.25}"#).unwrap();
        assert_eq!(c.target, Target::Point(0.25));
        let c: ConstraintSpec =
            serde_json::from_str(r#"{"potential": [0, 1], "target_interval": [0.4, 0.6]}"#).unwrap();
        assert_eq!(c.target, Target::Interval(0.4, 0.6));
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"potential":[0.0,1.0],"target_interval":[0.4,0.6]}"#
        );
        assert!(serde_json::from_str::<ConstraintSpec>(r#"{"potential": [0, 1]}"#).is_err());
        assert!(serde_json::from_str::<ConstraintSpec>(
            r#"{"potential": [0, 1], "target": 0.2, "target_interval": [0, 1]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<ConstraintSpec>(
            r#"{"potential": [0, 1], "target_interval": [0.8, 0.2]}"#
        )
        .is_err());
    }

    #[test]
    fn dominating_point_cases() {
        let q = FiniteDistribution::from_weights(vec![0.5, 0.5]).unwrap();
        let v = Potential::new(vec![0.0, 1.0]).unwrap();
        let inside = ConstraintSpec::interval(v.clone(), 0.4, 0.6).unwrap();
        assert_eq!(inside.dominating_point(&q, 0.0).unwrap(), 0.5);
        let above = ConstraintSpec::interval(v.clone(), 0.7, 0.8).unwrap();
        assert_eq!(above.dominating_point(&q, 0.0).unwrap(), 0.7);
        let below = ConstraintSpec::interval(v.clone(), 0.1, 0.2).unwrap();
        assert_eq!(below.dominating_point(&q, 0.0).unwrap(), 0.2);
        let outside = ConstraintSpec::interval(v, 1.5, 2.0).unwrap();
        assert!(matches!(
            outside.dominating_point(&q, 0.0),
            Err(Error::InfeasibleConstraint { .. })
        ));
    }
}
