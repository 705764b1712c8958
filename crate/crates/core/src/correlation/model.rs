use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trapezoid grid for the conditional law of `Y` around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Grid bounds in units of the conditional standard deviation.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_half_width() -> f64 {
    8.0
}

fn default_points() -> usize {
    2001
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: default_half_width(),
            points: default_points(),
        }
    }
}

/// `X ~ N(0, 1)` and `Y | X = x` a mixture of `N(m, s²)` with weight `1 − ε/s²`
/// and a point mass at `m`, where `m = r σ_Y x` and `s² = σ_Y²(1 − r²)`.
///
/// The point mass removes exactly `ε` of conditional variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPairModel {
    pub sigma_y: f64,
    pub r: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub grid: GridSpec,
}

impl GaussianPairModel {
    pub fn new(sigma_y: f64, r: f64, epsilon: f64) -> Result<Self> {
        let m = Self {
            sigma_y,
            r,
            epsilon,
            grid: GridSpec::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Result<Self> {
        self.grid = grid;
        self.validate()?;
        Ok(self)
    }

    pub fn with_r(mut self, r: f64) -> Result<Self> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_y > 0.0 && self.sigma_y.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma_y must be positive, got {}", self.sigma_y)));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidInput(format!("r must lie in [0, 1], got {}", self.r)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        let s2 = self.conditional_sigma2();
        if self.epsilon > s2 * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "epsilon {} exceeds the conditional variance {s2}",
                self.epsilon
            )));
        }
        if !(self.grid.half_width > 0.0 && self.grid.half_width.is_finite()) || self.grid.points < 3 {
            return Err(Error::InvalidInput("grid needs a positive half width and at least 3 points".into()));
        }
        Ok(())
    }

    /// `σ²_{Y|X} = σ_Y²(1 − r²)`, the variance of the Gaussian envelope.
    pub fn conditional_sigma2(&self) -> f64 {
        (self.sigma_y * self.sigma_y * (1.0 - self.r * self.r)).max(0.0)
    }

    /// `V[Y | X] = σ²_{Y|X} − ε`.
    pub fn conditional_variance(&self) -> f64 {
        (self.conditional_sigma2() - self.epsilon).max(0.0)
    }

    pub fn conditional_mean(&self, x: f64) -> f64 {
        self.r * self.sigma_y * x
    }

    /// Mass on the Gaussian component.
    pub fn gaussian_weight(&self) -> f64 {
        let s2 = self.conditional_sigma2();
        if s2 > 0.0 {
            (1.0 - self.epsilon / s2).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Trapezoid nodes `u` and weights for `N(0, s²)` on `±half_width·s`.
    pub(crate) fn gaussian_nodes(&self) -> Vec<(f64, f64)> {
        let s = self.conditional_sigma2().sqrt();
        if s == 0.0 {
            return Vec::new();
        }
        let n = self.grid.points;
        let b = self.grid.half_width * s;
        let h = 2.0 * b / (n - 1) as f64;
        let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
        (0..n)
            .map(|j| {
                let u = -b + j as f64 * h;
                let end = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                (u, end * h * norm * (-0.5 * (u / s) * (u / s)).exp())
            })
            .collect()
    }

    /// `E[f(Y − m) | X]` by quadrature, with the point mass contributing `f(0)`.
    pub fn centered_expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let w = self.gaussian_weight();
        let gauss: f64 = self.gaussian_nodes().iter().map(|&(u, q)| q * f(u)).sum();
        w * gauss + (1.0 - w) * f(0.0)
    }

    /// Total mass of the discretized joint law: trapezoid over `x` on the same
    /// grid rule times the discretized conditional mass.
    pub fn joint_mass(&self) -> f64 {
        let n = self.grid.points;
        let b = self.grid.half_width;
        let h = 2.0 * b / (n - 1) as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let conditional = self.centered_expectation(|_| 1.0);
        let marginal: f64 = (0..n)
            .map(|j| {
                let x = -b + j as f64 * h;
                let end = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                end * h * norm * (-0.5 * x * x).exp()
            })
            .sum();
        marginal * conditional
    }
}
