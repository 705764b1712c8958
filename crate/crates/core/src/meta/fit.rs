use serde::{Deserialize, Serialize};

use super::error_dist::{ErrorDistribution, Provenance};
use crate::error::{Error, Result};
use crate::maxent::solve_tilt;
use crate::measures::Potential;

/// Iteration cap for the centered-square recentering loop.
pub const FIXED_POINT_MAX_ITER: usize = 500;
/// Recentering stops once the mean moves by less than this.
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// The meta-statistic `U` applied to expected-loss values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    Identity,
    /// `(ξ − E_ν[ξ])²`, centered at the mean of the fitted distribution.
    CenteredSquare,
    /// Piecewise-linear through `(xi[j], u[j])`, constant beyond the end knots.
    UserTable { xi: Vec<f64>, u: Vec<f64> },
}

impl Statistic {
    pub fn validate(&self) -> Result<()> {
        if let Statistic::UserTable { xi, u } = self {
            if xi.is_empty() || xi.len() != u.len() {
                return Err(Error::InvalidInput("user_table needs matching non-empty xi and u".into()));
            }
            if xi.iter().chain(u).any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("user_table entries must be finite".into()));
            }
            if xi.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput("user_table xi must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    /// `U(ξ)`; `center` is only read by [`Statistic::CenteredSquare`].
    pub fn eval(&self, xi: f64, center: f64) -> f64 {
        match self {
            Statistic::Identity => xi,
            Statistic::CenteredSquare => (xi - center) * (xi - center),
            Statistic::UserTable { xi: knots, u } => {
                let j = knots.partition_point(|&k| k <= xi);
                if j == 0 {
                    u[0]
                } else if j == knots.len() {
                    u[j - 1]
                } else {
                    let t = (xi - knots[j - 1]) / (knots[j] - knots[j - 1]);
                    u[j - 1] + t * (u[j] - u[j - 1])
                }
            }
        }
    }

    pub fn derivative(&self, xi: f64, center: f64) -> f64 {
        match self {
            Statistic::Identity => 1.0,
            Statistic::CenteredSquare => 2.0 * (xi - center),
            Statistic::UserTable { xi: knots, u } => {
                let j = knots.partition_point(|&k| k <= xi);
                if j == 0 || j == knots.len() {
                    0.0
                } else {
                    (u[j] - u[j - 1]) / (knots[j] - knots[j - 1])
                }
            }
        }
    }
}

/// `U·ν = η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConstraint {
    #[serde(rename = "U")]
    pub statistic: Statistic,
    pub eta: f64,
}

impl MetaConstraint {
    pub fn new(statistic: Statistic, eta: f64) -> Result<Self> {
        statistic.validate()?;
        if !eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be finite, got {eta}")));
        }
        Ok(Self { statistic, eta })
    }
}

/// The maximum-entropy error distribution `ν* ∝ e^{−λ_η U} ν_ref`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaFit {
    pub distribution: ErrorDistribution,
    pub statistic: Statistic,
    pub eta: f64,
    pub lambda_eta: f64,
    /// Mean of ν*, the centre of a centered-square statistic.
    pub center: f64,
    pub iterations: usize,
}

impl MetaFit {
    pub fn u(&self, xi: f64) -> f64 {
        self.statistic.eval(xi, self.center)
    }

    pub fn u_derivative(&self, xi: f64) -> f64 {
        self.statistic.derivative(xi, self.center)
    }
}

fn u_potential(reference: &ErrorDistribution, statistic: &Statistic, center: f64) -> Result<Potential> {
    Potential::new(reference.support().iter().map(|&x| statistic.eval(x, center)).collect())
}

/// Tilts the reference error distribution so that `E_{ν*}[U] = η`.
///
/// For the centered-square statistic the centre depends on ν*, so tilting and
/// recentering alternate from the reference mean until the mean settles.
pub fn maxent_error_fit(reference: &ErrorDistribution, meta: &MetaConstraint, tol: f64) -> Result<MetaFit> {
    meta.statistic.validate()?;
    if reference.weights().weights().iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidDistribution(
            "reference error distribution must be positive on its support".into(),
        ));
    }
    let q = reference.weights();
    let finish = |tilt: crate::maxent::TiltedDistribution, center: f64, iterations: usize| {
        let lambda_eta = tilt.lambda();
        let distribution =
            ErrorDistribution::from_parts(reference.support().to_vec(), tilt.into_realized(), Provenance::Fitted);
        MetaFit {
            distribution,
            statistic: meta.statistic.clone(),
            eta: meta.eta,
            lambda_eta,
            center,
            iterations,
        }
    };

    if meta.statistic != Statistic::CenteredSquare {
        let tilt = solve_tilt(q, &u_potential(reference, &meta.statistic, 0.0)?, meta.eta, tol)?;
        let support = reference.support();
        let center = support.iter().zip(tilt.realized().weights()).map(|(x, w)| x * w).sum();
        return Ok(finish(tilt, center, 1));
    }

    let mut center = reference.mean();
    let mut shift = f64::INFINITY;
    for it in 1..=FIXED_POINT_MAX_ITER {
        let tilt = solve_tilt(q, &u_potential(reference, &meta.statistic, center)?, meta.eta, tol)?;
        let next: f64 = reference
            .support()
            .iter()
            .zip(tilt.realized().weights())
            .map(|(x, w)| x * w)
            .sum();
        shift = (next - center).abs();
        if shift < FIXED_POINT_TOL {
            return Ok(finish(tilt, next, it));
        }
        center = next;
    }
    Err(Error::FixedPointDivergence {
        iterations: FIXED_POINT_MAX_ITER,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::TiltedDistribution;
    use crate::measures::{FiniteDistribution, Potential};
    use crate::meta::error_distribution_exact;

    fn binomial_errors(p: f64, n: usize) -> ErrorDistribution {
        let base = FiniteDistribution::from_weights(vec![1.0 - p, p]).unwrap();
        error_distribution_exact(&base, &Potential::new(vec![0.0, 1.0]).unwrap(), n).unwrap()
    }

    #[test]
    fn satisfied_constraint_is_identity() {
        let r = binomial_errors(0.3, 8);
        let fit = maxent_error_fit(&r, &MetaConstraint::new(Statistic::Identity, r.mean()).unwrap(), 1e-10).unwrap();
        assert_eq!(fit.lambda_eta, 0.0);
        assert_eq!(fit.distribution.weights(), r.weights());
    }

    #[test]
    fn identity_on_binary_support() {
        let r = ErrorDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5], Provenance::Fitted).unwrap();
        let fit = maxent_error_fit(&r, &MetaConstraint::new(Statistic::Identity, 0.25).unwrap(), 1e-12).unwrap();
        let w = fit.distribution.weights().weights();
        assert!((w[0] - 0.75).abs() < 1e-12 && (w[1] - 0.25).abs() < 1e-12);
        assert!((fit.lambda_eta - 3f64.ln()).abs() < 1e-10);
        assert_eq!(fit.distribution.provenance(), Provenance::Fitted);
    }

    /// Tilt at fixed λ with the centre recentered to self-consistency.
    fn consistent_variance(r: &ErrorDistribution, lambda: f64) -> f64 {
        let mut m = r.mean();
        for _ in 0..2000 {
            let v = Potential::new(r.support().iter().map(|x| (x - m) * (x - m)).collect()).unwrap();
            let t = TiltedDistribution::new(r.weights().clone(), v, lambda).unwrap();
            let next: f64 = r.support().iter().zip(t.realized().weights()).map(|(x, w)| x * w).sum();
            if (next - m).abs() < 1e-15 {
                break;
            }
            m = next;
        }
        let v = Potential::new(r.support().iter().map(|x| (x - m) * (x - m)).collect()).unwrap();
        TiltedDistribution::new(r.weights().clone(), v, lambda)
            .unwrap()
            .expected_potential()
    }

    #[test]
    fn centered_square_against_lambda_grid_search() {
        let r = binomial_errors(0.3, 12);
        let eta = 0.5 * r.variance();
        let fit =
            maxent_error_fit(&r, &MetaConstraint::new(Statistic::CenteredSquare, eta).unwrap(), 1e-12).unwrap();
        assert!(fit.lambda_eta > 0.0);
        let nu = &fit.distribution;
        assert!((nu.variance() - eta).abs() < 1e-10);
        assert!((nu.mean() - fit.center).abs() < 1e-9);
        assert!(nu.variance() < r.variance());

        let (mut best, mut best_gap) = (0.0, f64::INFINITY);
        for i in 0..=4000 {
            let lambda = i as f64 * 0.01;
            let gap = (consistent_variance(&r, lambda) - eta).abs();
            if gap < best_gap {
                best = lambda;
                best_gap = gap;
            }
        }
        assert!((fit.lambda_eta - best).abs() <= 0.01, "{} vs {best}", fit.lambda_eta);
    }

    #[test]
    fn unattainable_eta_is_infeasible() {
        let r = binomial_errors(0.5, 4);
        let c = MetaConstraint::new(Statistic::Identity, 1.5).unwrap();
        assert!(matches!(maxent_error_fit(&r, &c, 1e-10), Err(Error::InfeasibleConstraint { .. })));
    }

    #[test]
    fn user_table_interpolates() {
        let s = Statistic::UserTable {
            xi: vec![0.0, 1.0, 2.0],
            u: vec![0.0, 2.0, 3.0],
        };
        s.validate().unwrap();
        assert_eq!(s.eval(0.5, 0.0), 1.0);
        assert_eq!(s.eval(1.5, 0.0), 2.5);
        assert_eq!(s.eval(-1.0, 0.0), 0.0);
        assert_eq!(s.eval(5.0, 0.0), 3.0);
        assert_eq!(s.derivative(0.5, 0.0), 2.0);
        assert!(Statistic::UserTable { xi: vec![1.0, 0.0], u: vec![0.0, 0.0] }.validate().is_err());
    }

    #[test]
    fn statistic_json_shape() {
        let c: MetaConstraint = serde_json::from_str(r#"{"U": {"kind": "centered_square"}, "eta": 0.01}"#).unwrap();
        assert_eq!(c.statistic, Statistic::CenteredSquare);
        assert!(serde_json::from_str::<MetaConstraint>(r#"{"U": {"kind": "cubic"}, "eta": 0.01}"#).is_err());
    }
}
