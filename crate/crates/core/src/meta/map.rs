use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::error_dist::ErrorDistribution;
use super::fit::MetaFit;
use crate::error::{Error, Result};
use crate::ldp::{for_each_composition, in_window, table_size};
use crate::maxent::{solve_tilt, Target};
use crate::measures::{dot, FiniteDistribution, Potential};
use crate::numeric::{log_sum_exp, TIE_TOL};

/// Largest model grid that will be materialized.
pub const MAX_GRID_POINTS: u128 = 2_000_000;
const POLISH_MAX_ITER: usize = 10_000;

/// Unnormalized prior density on the simplex.
pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Prior `Q` over models.
#[derive(Clone)]
pub enum ModelPrior {
    /// Uniform over a regular simplex mesh.
    Uniform,
    /// Explicit models with prior weights; the grid is exactly these models.
    Discrete { models: Vec<Vec<f64>>, weights: Vec<f64> },
    /// A density evaluated on the simplex mesh and normalized over it.
    Density(DensityFn),
}

impl fmt::Debug for ModelPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelPrior::Uniform => f.write_str("Uniform"),
            ModelPrior::Discrete { models, .. } => write!(f, "Discrete({} models)", models.len()),
            ModelPrior::Density(_) => f.write_str("Density"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    /// Mesh step; `None` picks the default for the alphabet size.
    pub grid_step: Option<f64>,
    /// Multiplier on the KL term (the sample size in `e^{−n·KL}`).
    pub speed: f64,
    pub tol: f64,
    pub polish: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            grid_step: None,
            speed: 1.0,
            tol: 1e-10,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMethod {
    Grid,
    MultiplicativeUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveComponents {
    /// `speed · D(μ ‖ P)`
    pub kl_term: f64,
    /// `λ_η · U(V·μ)`
    pub meta_term: f64,
    /// `ln Q(μ)`
    pub log_q_term: f64,
}

impl ObjectiveComponents {
    pub fn objective(&self) -> f64 {
        -self.kl_term - self.meta_term + self.log_q_term
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapModelResult {
    pub model: FiniteDistribution,
    pub objective: f64,
    pub components: ObjectiveComponents,
    pub method: MapMethod,
    pub lambda_eta: f64,
    pub expected_loss: f64,
    pub grid_step: Option<f64>,
    pub grid_points: usize,
    pub feasible_points: usize,
}

/// Mesh step used when none is given: 0.001 on the 1-simplex, 0.02 on the
/// 2-simplex, and the finest of a few coarse steps that fits the grid budget beyond.
pub fn default_grid_step(k: usize) -> f64 {
    match k {
        1 => 1.0,
        2 => 0.001,
        3 => 0.02,
        _ => [20usize, 10, 5, 4, 2, 1]
            .into_iter()
            .find(|&m| table_size(k, m) <= MAX_GRID_POINTS)
            .map_or(1.0, |m| 1.0 / m as f64),
    }
}

/// All points of the simplex with coordinates in multiples of `step`, in
/// reverse lexicographic order of their counts.
pub fn simplex_grid(k: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidInput(format!("grid step must lie in (0, 1], got {step}")));
    }
    let m = (1.0 / step).round();
    if (m * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("grid step {step} does not divide 1")));
    }
    let m = m as usize;
    let size = table_size(k, m);
    if size > MAX_GRID_POINTS {
        return Err(Error::TableTooLarge {
            size,
            limit: MAX_GRID_POINTS,
        });
    }
    let mut grid = Vec::with_capacity(size as usize);
    for_each_composition(k, m, |c| grid.push(c.iter().map(|&ci| ci as f64 / m as f64).collect()));
    Ok(grid)
}

struct Problem<'a> {
    p: &'a [f64],
    v: &'a [f64],
    window: Target,
    meta: Option<&'a MetaFit>,
    speed: f64,
}

impl Problem<'_> {
    fn kl(&self, mu: &[f64]) -> Option<f64> {
        let mut d = 0.0;
        for (&m, &p) in mu.iter().zip(self.p) {
            if m > 0.0 {
                if p <= 0.0 {
                    return None;
                }
                d += m * (m / p).ln();
            }
        }
        Some(d.max(0.0))
    }

    fn components(&self, mu: &[f64], log_q: f64) -> Option<ObjectiveComponents> {
        let xi = dot(mu, self.v);
        if !in_window(xi, &self.window) || !log_q.is_finite() {
            return None;
        }
        let kl = self.kl(mu)?;
        let meta_term = self.meta.map_or(0.0, |m| m.lambda_eta * m.u(xi));
        Some(ObjectiveComponents {
            kl_term: self.speed * kl,
            meta_term,
            log_q_term: log_q,
        })
    }
}

/// Maximizes `−speed·D(μ‖P) − λ_η U(V·μ) + ln Q(μ)` over models with `V·μ ∈ [lo, hi]`.
///
/// The grid argmax (lowest index among ties) is refined for mesh priors by
/// entropic mirror ascent on the support of `P`, with each iterate projected
/// back onto the window by an exponential tilt. The refined point replaces
/// the grid point only if it scores higher by more than round-off. `meta = None` means `U ≡ 0`.
pub fn map_model(
    p: &FiniteDistribution,
    prior: &ModelPrior,
    loss_row: &Potential,
    window: (f64, f64),
    meta: Option<&MetaFit>,
    opts: &MapOptions,
) -> Result<MapModelResult> {
    let k = p.len();
    check_inputs(k, loss_row, window, opts)?;
    let (lo, hi) = window;
    let problem = Problem {
        p: p.weights(),
        v: loss_row.values(),
        window: Target::Interval(lo, hi),
        meta,
        speed: opts.speed,
    };

    let (grid, log_q, grid_step) = model_grid(prior, k, opts)?;

    let scored: Vec<Option<ObjectiveComponents>> = grid
        .par_iter()
        .zip(log_q.par_iter())
        .map(|(mu, &lq)| problem.components(mu, lq))
        .collect();
    let feasible_points = scored.iter().filter(|s| s.is_some()).count();
    let best_value = scored
        .iter()
        .flatten()
        .map(ObjectiveComponents::objective)
        .fold(f64::NEG_INFINITY, f64::max);
    let Some(best) = scored
        .iter()
        .position(|s| s.is_some_and(|c| c.objective() >= best_value - TIE_TOL))
    else {
        return Err(Error::EmptyFeasibleSet);
    };
    let mut model = grid[best].clone();
    let mut components = scored[best].expect("feasible");
    let mut method = MapMethod::Grid;

    if opts.polish && !matches!(prior, ModelPrior::Discrete { .. }) {
        let log_q_at = |mu: &[f64]| -> f64 {
            match prior {
                ModelPrior::Density(f) => density_log(f, mu) - (density_log(f, &grid[best]) - log_q[best]),
                _ => log_q[best],
            }
        };
        if let Some((mu, comps)) = polish(&problem, prior, &model, &log_q_at, opts.tol) {
            let noise = 1e-12 * (1.0 + components.kl_term + components.meta_term.abs());
            if comps.objective() > components.objective() + noise {
                model = mu;
                components = comps;
                method = MapMethod::MultiplicativeUpdate;
            }
        }
    }

    let expected_loss = dot(&model, problem.v);
    let model = FiniteDistribution::new(p.alphabet().clone(), model)?;
    Ok(MapModelResult {
        model,
        objective: components.objective(),
        components,
        method,
        lambda_eta: meta.map_or(0.0, |m| m.lambda_eta),
        expected_loss,
        grid_step,
        grid_points: grid.len(),
        feasible_points,
    })
}

fn check_inputs(k: usize, loss_row: &Potential, window: (f64, f64), opts: &MapOptions) -> Result<()> {
    loss_row.check_len(k)?;
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidInput(format!("invalid window [{lo}, {hi}]")));
    }
    if !(opts.speed > 0.0 && opts.speed.is_finite()) {
        return Err(Error::InvalidInput(format!("speed must be positive, got {}", opts.speed)));
    }
    Ok(())
}

type ModelGrid = (Vec<Vec<f64>>, Vec<f64>, Option<f64>);

/// Models to score, their `ln Q`, and the mesh step when the grid is a mesh.
fn model_grid(prior: &ModelPrior, k: usize, opts: &MapOptions) -> Result<ModelGrid> {
    Ok(match prior {
        ModelPrior::Discrete { models, weights } => {
            if models.is_empty() || models.len() != weights.len() {
                return Err(Error::InvalidInput("discrete prior needs one weight per model".into()));
            }
            for m in models {
                if m.len() != k {
                    return Err(Error::AlphabetMismatch {
                        expected: k,
                        actual: m.len(),
                    });
                }
                FiniteDistribution::from_weights(m.clone())?;
            }
            let q = FiniteDistribution::from_masses(crate::measures::Alphabet::indexed(models.len()), weights.clone())
                .map_err(|_| Error::InvalidInput("prior weights must be non-negative with positive sum".into()))?;
            (models.clone(), q.weights().iter().map(|w| w.ln()).collect(), None)
        }
        ModelPrior::Uniform => {
            let step = opts.grid_step.unwrap_or_else(|| default_grid_step(k));
            let grid = simplex_grid(k, step)?;
            let lq = -(grid.len() as f64).ln();
            let n = grid.len();
            (grid, vec![lq; n], Some(step))
        }
        ModelPrior::Density(f) => {
            let step = opts.grid_step.unwrap_or_else(|| default_grid_step(k));
            let grid = simplex_grid(k, step)?;
            let raw: Vec<f64> = grid.par_iter().map(|mu| density_log(f, mu)).collect();
            let z = log_sum_exp(raw.iter().copied().filter(|x| x.is_finite()));
            if !z.is_finite() {
                return Err(Error::InvalidInput("prior density vanishes on the whole grid".into()));
            }
            (grid, raw.into_iter().map(|x| x - z).collect(), Some(step))
        }
    })
}

/// Number of grid models with finite prior, finite `D(μ‖P)` and `V·μ ∈ [lo, hi]`.
pub fn feasible_model_count(
    p: &FiniteDistribution,
    prior: &ModelPrior,
    loss_row: &Potential,
    window: (f64, f64),
    opts: &MapOptions,
) -> Result<usize> {
    check_inputs(p.len(), loss_row, window, opts)?;
    let problem = Problem {
        p: p.weights(),
        v: loss_row.values(),
        window: Target::Interval(window.0, window.1),
        meta: None,
        speed: 1.0,
    };
    let (grid, log_q, _) = model_grid(prior, p.len(), opts)?;
    Ok(grid
        .par_iter()
        .zip(log_q.par_iter())
        .filter(|(mu, &lq)| problem.components(mu, lq).is_some())
        .count())
}

fn density_log(f: &DensityFn, mu: &[f64]) -> f64 {
    let d = f(mu);
    if d > 0.0 && d.is_finite() {
        d.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Tilts `mu` onto the nearer window endpoint when its mean falls outside.
fn project(problem: &Problem, mu: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let xi = dot(&mu, problem.v);
    if in_window(xi, &problem.window) {
        return Some(mu);
    }
    let (lo, hi) = problem.window.bounds();
    let target = if xi < lo { lo } else { hi };
    let q = FiniteDistribution::new(crate::measures::Alphabet::indexed(mu.len()), mu).ok()?;
    let v = Potential::new(problem.v.to_vec()).ok()?;
    let tilt = solve_tilt(&q, &v, target, tol).ok()?;
    Some(tilt.into_realized().weights().to_vec())
}

fn polish(
    problem: &Problem,
    prior: &ModelPrior,
    start: &[f64],
    log_q_at: &dyn Fn(&[f64]) -> f64,
    tol: f64,
) -> Option<(Vec<f64>, ObjectiveComponents)> {
    let k = start.len();
    let support: Vec<usize> = (0..k).filter(|&i| problem.p[i] > 0.0).collect();
    // move off the faces of the mesh so every supported coordinate can change
    let seeded: Vec<f64> = (0..k).map(|i| 0.999 * start[i] + 0.001 * problem.p[i]).collect();
    let mut mu = project(problem, seeded, tol)?;
    let mut comps = problem.components(&mu, log_q_at(&mu))?;
    let mut step = 1.0 / problem.speed;

    for _ in 0..POLISH_MAX_ITER {
        let grad = gradient(problem, prior, &mu);
        let gmax = support.iter().map(|&i| grad[i]).fold(f64::NEG_INFINITY, f64::max);
        let mut next = vec![0.0; k];
        let mut total = 0.0;
        for &i in &support {
            next[i] = mu[i] * (step * (grad[i] - gmax)).exp();
            total += next[i];
        }
        if !(total > 0.0 && total.is_finite()) {
            break;
        }
        next.iter_mut().for_each(|x| *x /= total);
        let candidate = project(problem, next, tol)
            .and_then(|c| problem.components(&c, log_q_at(&c)).map(|s| (c, s)));
        match candidate {
            Some((c, s)) if s.objective() > comps.objective() => {
                let gain = s.objective() - comps.objective();
                mu = c;
                comps = s;
                step = (step * 1.5).min(1e6);
                if gain <= 1e-16 * (1.0 + comps.objective().abs()) {
                    break;
                }
            }
            _ => {
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
        }
    }
    Some((mu, comps))
}

fn gradient(problem: &Problem, prior: &ModelPrior, mu: &[f64]) -> Vec<f64> {
    let xi = dot(mu, problem.v);
    let du = problem.meta.map_or(0.0, |m| m.lambda_eta * m.u_derivative(xi));
    let mut g: Vec<f64> = (0..mu.len())
        .map(|i| {
            if mu[i] > 0.0 && problem.p[i] > 0.0 {
                -problem.speed * ((mu[i] / problem.p[i]).ln() + 1.0) - du * problem.v[i]
            } else {
                0.0
            }
        })
        .collect();
    if let ModelPrior::Density(f) = prior {
        let h = 1e-7;
        let base = density_log(f, mu);
        for (i, gi) in g.iter_mut().enumerate() {
            let moved: Vec<f64> = mu
                .iter()
                .enumerate()
                .map(|(j, &m)| m + h * (if i == j { 1.0 } else { 0.0 } - m))
                .collect();
            let d = (density_log(f, &moved) - base) / h;
            if d.is_finite() {
                *gi += d;
            }
        }
    }
    g
}

/// `e^{−λ_η (V·μ − E_ν[ξ])²}`: the misfit factor of the centered-square meta-constraint.
pub fn misfit_weight(mu: &FiniteDistribution, loss_row: &Potential, nu: &ErrorDistribution, lambda_eta: f64) -> Result<f64> {
    loss_row.check_len(mu.len())?;
    if !lambda_eta.is_finite() {
        return Err(Error::InvalidInput(format!("lambda_eta must be finite, got {lambda_eta}")));
    }
    if lambda_eta == 0.0 {
        return Ok(1.0);
    }
    let misfit = dot(mu.weights(), loss_row.values()) - nu.mean();
    Ok((-lambda_eta * misfit * misfit).exp())
}

/// Normalized weights `∝ e^{−speed·D(μ‖P)} · misfit_weight(μ) · Q(μ)` over the
/// models whose expected loss lies in the window.
#[allow(clippy::too_many_arguments)]
pub fn model_posterior(
    p: &FiniteDistribution,
    models: &[FiniteDistribution],
    prior_weights: Option<&[f64]>,
    loss_row: &Potential,
    window: (f64, f64),
    nu: &ErrorDistribution,
    lambda_eta: f64,
    speed: f64,
) -> Result<Vec<f64>> {
    if let Some(w) = prior_weights {
        if w.len() != models.len() || w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("prior weights must be non-negative, one per model".into()));
        }
    }
    let problem = Problem {
        p: p.weights(),
        v: loss_row.values(),
        window: Target::Interval(window.0, window.1),
        meta: None,
        speed,
    };
    let logs = models
        .iter()
        .enumerate()
        .map(|(i, mu)| {
            p.check_same_alphabet(mu)?;
            let lq = prior_weights.map_or(0.0, |w| w[i].ln());
            Ok(match problem.components(mu.weights(), lq) {
                Some(c) => c.objective() + misfit_weight(mu, loss_row, nu, lambda_eta)?.ln(),
                None => f64::NEG_INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let z = log_sum_exp(logs.iter().copied().filter(|x| x.is_finite()));
    if !z.is_finite() {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok(logs.iter().map(|&l| (l - z).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::kl_divergence;
    use crate::meta::{error_distribution_exact, maxent_error_fit, MetaConstraint, Statistic};

    fn bern(p: f64) -> FiniteDistribution {
        FiniteDistribution::from_weights(vec![1.0 - p, p]).unwrap()
    }
    fn v01() -> Potential {
        Potential::new(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn grids() {
        assert_eq!(simplex_grid(2, 0.001).unwrap().len(), 1001);
        assert_eq!(simplex_grid(3, 0.02).unwrap().len(), 1326);
        assert_eq!(simplex_grid(3, 0.5).unwrap()[0], vec![1.0, 0.0, 0.0]);
        assert!(simplex_grid(2, 0.3).is_err());
        assert_eq!(default_grid_step(4), 0.05);
    }

    #[test]
    fn no_meta_uniform_prior_full_window_returns_base() {
        let p = bern(0.5);
        let r = map_model(&p, &ModelPrior::Uniform, &v01(), (0.0, 1.0), None, &MapOptions::default()).unwrap();
        assert_eq!(r.model, p);
        assert_eq!(r.components.kl_term, 0.0);
        assert_eq!(r.method, MapMethod::Grid);
        assert_eq!(r.feasible_points, 1001);
    }

    #[test]
    fn off_grid_base_is_recovered_by_polish() {
        let p = FiniteDistribution::from_weights(vec![0.123_456_7, 0.5, 0.376_543_3]).unwrap();
        let v = Potential::new(vec![0.0, 1.0, 2.0]).unwrap();
        let r = map_model(&p, &ModelPrior::Uniform, &v, (0.0, 2.0), None, &MapOptions::default()).unwrap();
        assert_eq!(r.method, MapMethod::MultiplicativeUpdate);
        assert!(r.model.total_variation(&p).unwrap() <= 1e-6);
    }

    #[test]
    fn degenerate_window_at_base_risk() {
        let p = bern(0.25);
        let r = map_model(&p, &ModelPrior::Uniform, &v01(), (0.25, 0.25), None, &MapOptions::default()).unwrap();
        assert!(r.model.total_variation(&p).unwrap() <= 1e-12);
    }

    #[test]
    fn binding_window_gives_i_projection() {
        let r = map_model(&bern(0.5), &ModelPrior::Uniform, &v01(), (0.6, 0.9), None, &MapOptions::default())
            .unwrap();
        assert!((r.model.weights()[1] - 0.6).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn components_recompose() {
        let p = FiniteDistribution::from_weights(vec![0.2, 0.5, 0.3]).unwrap();
        let v = Potential::new(vec![0.0, 1.0, 3.0]).unwrap();
        let reference = error_distribution_exact(&p, &v, 6).unwrap();
        let meta = MetaConstraint::new(Statistic::CenteredSquare, 0.5 * reference.variance()).unwrap();
        let fit = maxent_error_fit(&reference, &meta, 1e-12).unwrap();
        let density: DensityFn = Arc::new(|mu: &[f64]| 1.0 + mu[0]);
        for prior in [ModelPrior::Uniform, ModelPrior::Density(density)] {
            let r = map_model(&p, &prior, &v, (1.5, 2.5), Some(&fit), &MapOptions::default()).unwrap();
            let c = r.components;
            assert!((r.objective - (-c.kl_term - c.meta_term + c.log_q_term)).abs() <= 1e-9);
            assert!(r.expected_loss >= 1.5 - 1e-9 && r.expected_loss <= 2.5 + 1e-9);
            let kl = kl_divergence(&r.model, &p).unwrap();
            assert!((c.kl_term - kl).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_centered_square_matches_brute_force() {
        let p = bern(0.5);
        let reference = error_distribution_exact(&p, &v01(), 20).unwrap();
        let meta = MetaConstraint::new(Statistic::CenteredSquare, 0.5 * reference.variance()).unwrap();
        let fit = maxent_error_fit(&reference, &meta, 1e-12).unwrap();
        let r = map_model(&p, &ModelPrior::Uniform, &v01(), (0.6, 0.9), Some(&fit), &MapOptions::default())
            .unwrap();

        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            if !(0.6 - 1e-12..=0.9 + 1e-12).contains(&t) {
                continue;
            }
            let kl = (1.0 - t) * ((1.0 - t) / 0.5).ln() + if t > 0.0 { t * (t / 0.5).ln() } else { 0.0 };
            let f = -kl - fit.lambda_eta * (t - fit.center).powi(2);
            if f > best.0 {
                best = (f, t);
            }
        }
        assert!((r.model.weights()[1] - best.1).abs() <= 0.001);
    }

    #[test]
    fn discrete_prior_and_empty_window() {
        let p = bern(0.5);
        let prior = ModelPrior::Discrete {
            models: vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.2, 0.8]],
            weights: vec![1.0, 0.0, 3.0],
        };
        let r = map_model(&p, &prior, &v01(), (0.0, 1.0), None, &MapOptions::default()).unwrap();
        // the zero-weight model at P is excluded; 0.8 has three times the prior mass
        assert_eq!(r.model.weights(), &[0.2, 0.8]);
        assert_eq!(r.feasible_points, 2);
        assert!(matches!(
            map_model(&p, &prior, &v01(), (0.4, 0.45), None, &MapOptions::default()),
            Err(Error::EmptyFeasibleSet)
        ));
    }

    #[test]
    fn misfit_examples() {
        let nu = ErrorDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5], super::super::Provenance::Fitted).unwrap();
        assert_eq!(misfit_weight(&bern(0.5), &v01(), &nu, 3.0).unwrap(), 1.0);
        assert_eq!(misfit_weight(&bern(0.9), &v01(), &nu, 0.0).unwrap(), 1.0);
        let w = misfit_weight(&bern(1.0), &v01(), &nu, 1.0).unwrap();
        assert!((w - (-0.25f64).exp()).abs() < 1e-15);
        assert!((w - 0.778801).abs() < 1e-6);
    }

    #[test]
    fn posterior_normalizes() {
        let p = bern(0.4);
        let models: Vec<FiniteDistribution> =
            simplex_grid(2, 0.01).unwrap().into_iter().map(|m| FiniteDistribution::from_weights(m).unwrap()).collect();
        let nu = error_distribution_exact(&p, &v01(), 10).unwrap();
        let w = model_posterior(&p, &models, None, &v01(), (0.5, 0.9), &nu, 2.0, 1.0).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert_eq!(w[0], 0.0);
    }
}
