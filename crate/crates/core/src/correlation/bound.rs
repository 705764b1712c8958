use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::GaussianPairModel;
use crate::error::{Error, Result};
use crate::numeric::{fit_line, format_f64};

/// Largest tolerated relative quadrature error of the conditional variance.
pub const QUADRATURE_TOL: f64 = 1e-4;

/// Relative error of the quadrature for the conditional variance, or
/// `GridTooCoarse` above [`QUADRATURE_TOL`].
pub fn check_quadrature(model: &GaussianPairModel) -> Result<f64> {
    let want = model.conditional_variance();
    let got = model.centered_expectation(|u| u * u);
    let rel = if want > 0.0 { (got - want).abs() / want } else { got.abs() };
    if rel > QUADRATURE_TOL {
        return Err(Error::GridTooCoarse { relative_error: rel });
    }
    Ok(rel)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEnvelopeReport {
    pub x_value: f64,
    /// Envelope variance `σ² = σ_Y²(1 − r²)`.
    pub sigma2: f64,
    pub p_grid: Vec<u32>,
    /// `E[(Y − m)^p | X = x]`
    pub lhs: Vec<f64>,
    /// `(σ² p)^{p/2}`
    pub rhs: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub quadrature_relative_error: f64,
}

impl MomentEnvelopeReport {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|&s| s)
    }
}

/// Checks `E[(Y − m)^p | X] ≤ (σ² p)^{p/2}` for even `p`; orders 2, 4, 6 and 8
/// are always included.
pub fn moment_envelope_check(model: &GaussianPairModel, x_value: f64, p_grid: &[u32]) -> Result<MomentEnvelopeReport> {
    model.validate()?;
    if let Some(p) = p_grid.iter().find(|&&p| p == 0 || p % 2 == 1) {
        return Err(Error::InvalidInput(format!("moment orders must be positive and even, got {p}")));
    }
    let mut orders: Vec<u32> = p_grid.iter().copied().chain([2, 4, 6, 8]).collect();
    orders.sort_unstable();
    orders.dedup();
    let rel = check_quadrature(model)?;
    let sigma2 = model.conditional_sigma2();
    let lhs: Vec<f64> = orders
        .iter()
        .map(|&p| model.centered_expectation(|u| u.powi(p as i32)))
        .collect();
    let rhs: Vec<f64> = orders
        .iter()
        .map(|&p| (sigma2 * p as f64).powf(p as f64 / 2.0))
        .collect();
    let satisfied = lhs.iter().zip(&rhs).map(|(l, r)| *l <= *r * (1.0 + 1e-12)).collect();
    Ok(MomentEnvelopeReport {
        x_value,
        sigma2,
        p_grid: orders,
        lhs,
        rhs,
        satisfied,
        quadrature_relative_error: rel,
    })
}

/// Convex losses `𝓛(h, y)` of the residual `y − h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoss", into = "RawLoss")]
pub enum LossKind {
    /// `(y − h)²`
    Quadratic,
    /// `½u²` for `|u| ≤ δ`, `δ(|u| − ½δ)` beyond.
    Huber { delta: f64 },
    /// `scale · (y − h)⁴`
    Quartic { scale: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoss {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

impl TryFrom<RawLoss> for LossKind {
    type Error = Error;
    fn try_from(raw: RawLoss) -> Result<Self> {
        let loss = match raw.kind.as_str() {
            "quadratic" => LossKind::Quadratic,
            "huber" => LossKind::Huber {
                delta: raw.delta.unwrap_or(1.0),
            },
            "quartic" => LossKind::Quartic {
                scale: raw.scale.unwrap_or(1.0),
            },
            other => return Err(Error::UnsupportedLoss(other.to_owned())),
        };
        loss.validate()?;
        Ok(loss)
    }
}

impl From<LossKind> for RawLoss {
    fn from(l: LossKind) -> Self {
        let (kind, delta, scale) = match l {
            LossKind::Quadratic => ("quadratic", None, None),
            LossKind::Huber { delta } => ("huber", Some(delta), None),
            LossKind::Quartic { scale } => ("quartic", None, Some(scale)),
        };
        RawLoss {
            kind: kind.into(),
            delta,
            scale,
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RawLoss {
            kind: s.to_owned(),
            delta: None,
            scale: None,
        }
        .try_into()
    }
}

impl LossKind {
    /// Accepts `"quadratic"` or `{"kind": "huber", "delta": 0.5}`.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        match value {
            serde_json::Value::String(s) => s.parse(),
            _ => serde_json::from_value::<RawLoss>(value.clone())
                .map_err(|e| Error::ConfigInvalid(format!("loss: {e}")))?
                .try_into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(Error::InvalidInput(format!("huber delta must be positive, got {delta}")))
            }
            LossKind::Quartic { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                Err(Error::InvalidInput(format!("quartic scale must be non-negative, got {scale}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            LossKind::Quadratic => u * u,
            LossKind::Huber { delta } => {
                if u.abs() <= delta {
                    0.5 * u * u
                } else {
                    delta * (u.abs() - 0.5 * delta)
                }
            }
            LossKind::Quartic { scale } => scale * u.powi(4),
        }
    }

    /// `∂²_y 𝓛` at `y = h`.
    pub fn second_derivative_at_zero(&self) -> f64 {
        match self {
            LossKind::Quadratic => 2.0,
            LossKind::Huber { .. } => 1.0,
            LossKind::Quartic { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossExpansion {
    pub x_value: f64,
    /// Quadrature of `E[𝓛(m, Y) | X = x]`.
    pub exact: f64,
    /// `𝓛(m, m) + ½ ∂²𝓛(m, m) (σ_Y²(1 − r²) − ε)`
    pub taylor: f64,
    pub residual: f64,
    pub second_derivative: f64,
    /// `3σ³√3` with `σ` the envelope standard deviation, as a scale for the remainder.
    pub third_order_scale: f64,
}

/// Second-order expansion of the conditional expected loss of the predictor `h = m`.
pub fn conditional_loss_expansion(model: &GaussianPairModel, loss: &LossKind, x_value: f64) -> Result<LossExpansion> {
    model.validate()?;
    loss.validate()?;
    check_quadrature(model)?;
    let exact = model.centered_expectation(|u| loss.eval(u));
    let d2 = loss.second_derivative_at_zero();
    let taylor = loss.eval(0.0) + 0.5 * d2 * (model.conditional_sigma2() - model.epsilon);
    let sigma = model.conditional_sigma2().sqrt();
    Ok(LossExpansion {
        x_value,
        exact,
        taylor,
        residual: (exact - taylor).abs(),
        second_derivative: d2,
        third_order_scale: 3.0 * sigma.powi(3) * 3f64.sqrt(),
    })
}

/// Conditional expected loss against correlation, with the line through
/// `(1 − r², loss)`: slope `k c` and intercept `−k ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCurve {
    pub loss: LossKind,
    pub r_grid: Vec<f64>,
    pub expected_losses: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub k_epsilon: f64,
    pub monotone_non_increasing: bool,
}

impl LossCurve {
    /// Two-column RFC 4180 CSV `r,expected_loss` with 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["r", "expected_loss"]).map_err(io)?;
        for (r, l) in self.r_grid.iter().zip(&self.expected_losses) {
            w.write_record([format_f64(*r), format_f64(*l)]).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// `{"slope", "intercept", "r2"}`.
    pub fn fit_report(&self) -> serde_json::Value {
        serde_json::json!({"slope": self.slope, "intercept": self.intercept, "r2": self.r2})
    }
}

/// At least five correlations, strictly increasing in `[0, 1)`.
pub fn check_r_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.len() < 5 {
        return Err(Error::InvalidInput(format!("need at least 5 correlations, got {}", r_grid.len())));
    }
    if r_grid.iter().any(|r| !(0.0..1.0).contains(r)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("correlations must be strictly increasing in [0, 1)".into()));
    }
    Ok(())
}

pub fn loss_correlation_curve(
    template: &GaussianPairModel,
    loss: &LossKind,
    r_grid: &[f64],
    x_value: f64,
) -> Result<LossCurve> {
    check_r_grid(r_grid)?;
    let expected_losses = r_grid
        .par_iter()
        .map(|&r| {
            let model = template.with_r(r)?;
            Ok(conditional_loss_expansion(&model, loss, x_value)?.exact)
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = r_grid.iter().map(|r| 1.0 - r * r).collect();
    let fit = fit_line(&xs, &expected_losses).expect("at least five distinct abscissae");
    let monotone = expected_losses
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
    Ok(LossCurve {
        loss: *loss,
        r_grid: r_grid.to_vec(),
        expected_losses,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        k_epsilon: -fit.intercept,
        monotone_non_increasing: monotone,
    })
}
