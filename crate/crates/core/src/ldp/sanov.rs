//! Finite-n probabilities of moment events `{V·L_n ∈ Ξ}` and their decay rates.

use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use super::sampler::SeededSampler;
use super::types::{enumerate_types, in_window, type_mean};
use crate::error::{Error, Result};
use crate::maxent::{i_projection, ConstraintSpec};
use crate::measures::FiniteDistribution;
use crate::numeric::{fit_line, fit_line_weighted, log_sum_exp, LineFit};

/// Two-sided normal quantile for the 95% Wilson interval.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;
/// Monte Carlo points with fewer hits than this are flagged and left out of the fit.
pub const MIN_HITS: u64 = 10;
/// Trials per independent random substream.
pub const TRIAL_BLOCK: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    ExactEnumeration,
    MonteCarlo,
}

impl RateMethod {
    pub fn label(self) -> &'static str {
        match self {
            RateMethod::ExactEnumeration => "exact-enumeration",
            RateMethod::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// No type class of this size satisfies the constraint.
    EmptyEvent,
    /// Fewer than [`MIN_HITS`] Monte Carlo hits.
    InsufficientHits,
}

/// `ln P_n` at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub log_prob: f64,
    /// Log of the lower/upper 95% Wilson bound; equal to `log_prob` for exact points.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hits: Option<u64>,
    pub trials: Option<u64>,
    pub status: PointStatus,
}

/// An empirical decay rate next to its analytic value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub constraint: ConstraintSpec,
    pub method: RateMethod,
    pub points: Vec<RatePoint>,
    /// Slope of `ln P_n` against `n`; `None` with fewer than two usable points.
    pub fitted_slope: Option<f64>,
    pub slope_std_error: Option<f64>,
    pub intercept: Option<f64>,
    pub regression_r2: Option<f64>,
    /// `inf D(μ ‖ P)` over the constraint set; `+∞` when infeasible.
    pub analytic_rate: f64,
}

impl RateEstimate {
    pub fn n_grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.log_prob).collect()
    }

    fn with_fit(mut self, fit: Option<LineFit>) -> Self {
        self.fitted_slope = fit.map(|f| f.slope);
        self.slope_std_error = fit.map(|f| f.slope_std_error);
        self.intercept = fit.map(|f| f.intercept);
        self.regression_r2 = fit.map(|f| f.r2);
        self
    }
}

fn analytic_rate(p: &FiniteDistribution, constraint: &ConstraintSpec) -> Result<f64> {
    match i_projection(p, constraint) {
        Ok(proj) => Ok(proj.rate),
        Err(Error::InfeasibleConstraint { .. }) | Err(Error::DegeneratePotential { .. }) => {
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

fn validate_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::InvalidInput("n grid must be non-empty with positive entries".into()));
    }
    Ok(())
}

/// Exact `ln P^n(V·L_n ∈ Ξ)` by summing type-class probabilities, with a
/// least-squares slope over `n`.
pub fn sanov_exact(
    p: &FiniteDistribution,
    constraint: &ConstraintSpec,
    n_grid: &[usize],
) -> Result<RateEstimate> {
    validate_grid(n_grid)?;
    constraint.potential.check_len(p.len())?;
    let analytic_rate = analytic_rate(p, constraint)?;
    let points = n_grid
        .par_iter()
        .map(|&n| exact_point(p, constraint, n))
        .collect::<Result<Vec<_>>>()?;
    if points.iter().all(|pt| pt.status == PointStatus::EmptyEvent) {
        return Err(Error::EmptyEvent { n: n_grid[0] });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|pt| pt.status == PointStatus::Ok)
        .map(|pt| (pt.n as f64, pt.log_prob))
        .unzip();
    let est = RateEstimate {
        constraint: constraint.clone(),
        method: RateMethod::ExactEnumeration,
        points,
        fitted_slope: None,
        slope_std_error: None,
        intercept: None,
        regression_r2: None,
        analytic_rate,
    };
    Ok(est.with_fit(fit_line(&xs, &ys)))
}

fn exact_point(p: &FiniteDistribution, constraint: &ConstraintSpec, n: usize) -> Result<RatePoint> {
    let table = enumerate_types(p, n)?;
    let mut included = Vec::new();
    let mut positive = 0usize;
    for i in 0..table.len() {
        let lp = table.log_prob(i);
        if lp == f64::NEG_INFINITY {
            continue;
        }
        positive += 1;
        if in_window(table.mean(i, &constraint.potential), &constraint.target) {
            included.push(lp);
        }
    }
    let (log_prob, status) = if included.is_empty() {
        (f64::NEG_INFINITY, PointStatus::EmptyEvent)
    } else if included.len() == positive {
        // every type with positive mass qualifies: the event is certain
        (0.0, PointStatus::Ok)
    } else {
        (log_sum_exp(included.iter().copied()).min(0.0), PointStatus::Ok)
    };
    Ok(RatePoint {
        n,
        log_prob,
        ci_lo: log_prob,
        ci_hi: log_prob,
        hits: None,
        trials: None,
        status,
    })
}

/// 95% Wilson score interval for `hits / trials`.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let phat = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Hit-frequency estimates of `P^n(V·L_n ∈ Ξ)` from seeded i.i.d. samples.
///
/// Trials are split into blocks of [`TRIAL_BLOCK`], each drawn from its own
/// substream `(n index, block index)`, so the hit counts are identical for any
/// thread schedule. The slope is fitted by weighted least squares with
/// weights from the log-scale Wilson interval width.
pub fn sanov_monte_carlo(
    sampler: &SeededSampler,
    constraint: &ConstraintSpec,
    n_grid: &[usize],
    trials: u64,
) -> Result<RateEstimate> {
    validate_grid(n_grid)?;
    if trials < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 trials, got {trials}")));
    }
    let p = &sampler.base;
    constraint.potential.check_len(p.len())?;
    let analytic_rate = analytic_rate(p, constraint)?;
    let dist = sampler.index_distribution()?;
    let v = constraint.potential.values();
    let k = p.len();

    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let mut points = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let hits: u64 = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let count = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
                let mut rng = sampler.rng(((ni as u64) << 32) | b);
                let mut counts = vec![0u32; k];
                let mut hits = 0u64;
                for _ in 0..count {
                    counts.iter_mut().for_each(|c| *c = 0);
                    for _ in 0..n {
                        counts[dist.sample(&mut rng)] += 1;
                    }
                    if in_window(type_mean(&counts, v, n), &constraint.target) {
                        hits += 1;
                    }
                }
                hits
            })
            .sum();
        let (lo, hi) = wilson_interval(hits, trials);
        points.push(RatePoint {
            n,
            log_prob: (hits as f64 / trials as f64).ln(),
            ci_lo: lo.ln(),
            ci_hi: hi.ln(),
            hits: Some(hits),
            trials: Some(trials),
            status: if hits < MIN_HITS {
                PointStatus::InsufficientHits
            } else {
                PointStatus::Ok
            },
        });
    }

    let usable: Vec<&RatePoint> = points.iter().filter(|pt| pt.status == PointStatus::Ok).collect();
    let xs: Vec<f64> = usable.iter().map(|pt| pt.n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|pt| pt.log_prob).collect();
    let ws: Vec<f64> = usable
        .iter()
        .map(|pt| {
            let sd = (pt.ci_hi - pt.ci_lo) / (2.0 * WILSON_Z);
            1.0 / (sd * sd)
        })
        .collect();
    let est = RateEstimate {
        constraint: constraint.clone(),
        method: RateMethod::MonteCarlo,
        points,
        fitted_slope: None,
        slope_std_error: None,
        intercept: None,
        regression_r2: None,
        analytic_rate,
    };
    Ok(est.with_fit(fit_line_weighted(&xs, &ys, &ws)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Potential;

    fn bern(p: f64) -> FiniteDistribution {
        FiniteDistribution::from_weights(vec![1.0 - p, p]).unwrap()
    }
    fn upper(lo: f64, hi: f64) -> ConstraintSpec {
        ConstraintSpec::interval(Potential::new(vec![0.0, 1.0]).unwrap(), lo, hi).unwrap()
    }

    #[test]
    fn exact_binomial_tail() {
        // P(Bin(4, 1/2) ≥ 3) = 5/16
        let est = sanov_exact(&bern(0.5), &upper(0.75, 1.0), &[4]).unwrap();
        assert!((est.points[0].log_prob - (5.0f64 / 16.0).ln()).abs() < 1e-13);
        assert!(est.fitted_slope.is_none());
    }

    #[test]
    fn exact_slope_on_reference_instance() {
        let grid: Vec<usize> = (100..=400).step_by(20).collect();
        let est = sanov_exact(&bern(0.5), &upper(0.75, 1.0), &grid).unwrap();
        let slope = est.fitted_slope.unwrap();
        assert!((slope + 0.130812).abs() <= 0.01, "{slope}");
        assert!(est.regression_r2.unwrap() >= 0.999);
        assert!((est.analytic_rate - 0.130812).abs() < 1e-6);
    }

    #[test]
    fn certain_event() {
        let est = sanov_exact(&bern(0.3), &upper(0.0, 1.0), &[5, 10, 20]).unwrap();
        assert!(est.points.iter().all(|p| p.log_prob == 0.0));
        assert_eq!(est.fitted_slope, Some(0.0));
        assert_eq!(est.analytic_rate, 0.0);
    }

    #[test]
    fn parity_infeasible_points_are_reported() {
        let est = sanov_exact(&bern(0.5), &upper(0.5, 0.5), &[3, 4, 5, 6, 8]).unwrap();
        let statuses: Vec<_> = est.points.iter().map(|p| p.status).collect();
        assert_eq!(
            statuses,
            [
                PointStatus::EmptyEvent,
                PointStatus::Ok,
                PointStatus::EmptyEvent,
                PointStatus::Ok,
                PointStatus::Ok
            ]
        );
        assert!(est.fitted_slope.is_some());
        assert!(matches!(
            sanov_exact(&bern(0.5), &upper(0.5, 0.5), &[3, 5, 7]),
            Err(Error::EmptyEvent { .. })
        ));
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(1000, 1000);
        assert!(lo < 1.0 && lo > 0.99);
        assert!((hi - 1.0).abs() < 1e-15);
        let (lo, hi) = wilson_interval(500, 1000);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(((0.5 - lo) - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_certain_and_impossible() {
        let s = SeededSampler::new(1, 0, bern(0.5));
        let est = sanov_monte_carlo(&s, &upper(0.0, 1.0), &[5, 10], 1000).unwrap();
        assert!(est.points.iter().all(|p| p.log_prob == 0.0 && p.status == PointStatus::Ok));
        let est = sanov_monte_carlo(&s, &upper(1.5, 2.0), &[5, 10], 1000).unwrap();
        assert!(est
            .points
            .iter()
            .all(|p| p.hits == Some(0) && p.status == PointStatus::InsufficientHits));
        assert!(est.fitted_slope.is_none());
        assert_eq!(est.analytic_rate, f64::INFINITY);
    }

    #[test]
    fn monte_carlo_requires_enough_trials() {
        let s = SeededSampler::new(1, 0, bern(0.5));
        assert!(matches!(
            sanov_monte_carlo(&s, &upper(0.0, 1.0), &[5], 999),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn monte_carlo_is_schedule_independent() {
        let s = SeededSampler::new(99, 3, bern(0.5));
        let c = upper(0.7, 1.0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sanov_monte_carlo(&s, &c, &[10, 20], 50_000).unwrap());
        let b = many.install(|| sanov_monte_carlo(&s, &c, &[10, 20], 50_000).unwrap());
        assert_eq!(a, b);
    }
}
