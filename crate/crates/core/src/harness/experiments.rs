//! One prepared experiment per command.
//!
//! `prepare` parses the inputs and runs every check that depends only on
//! them (shapes, ranges, feasibility, table sizes); `run` does the work.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use super::config::Command;
use super::inputs::{constraint, distribution, jf, jopt, jv, loss_matrix, parse, NGrid};
use super::output::{csv_bytes, num};
use crate::correlation::{
    check_quadrature, check_r_grid, conditional_loss_expansion, loss_correlation_curve, moment_envelope_check,
    GaussianPairModel, GridSpec, LossKind,
};
use crate::error::{Error, Result};
use crate::ldp::{
    check_table_size, event_is_empty, gibbs_conditioning, sanov_exact, sanov_monte_carlo, RateEstimate,
    SeededSampler,
};
use crate::maxent::{
    check_tilt_inputs, divergence_projection, i_projection, solve_tilt_with_report, stationarity_residual,
    ConstraintSpec, DivergenceSpec, Generator, Target, DEFAULT_KKT_TOL, DEFAULT_TILT_TOL,
};
use crate::measures::{bayes_classifier, expected_loss, row_risks, FiniteDistribution, LossMatrix, Potential};
use crate::meta::{
    error_distribution_exact, feasible_model_count, map_model, maxent_error_fit, ErrorDistribution, MapOptions,
    MetaConstraint, MetaFit, ModelPrior, Statistic,
};
use crate::numeric::{total_variation, TIE_TOL};

/// Result payloads of one run: the JSON document and the CSV table.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub json: Value,
    pub csv: Vec<u8>,
}

pub(crate) trait Experiment: Send + Sync {
    fn run(&self, seed: u64) -> Result<Artifacts>;
}

pub(crate) fn prepare(command: Command, inputs: &Value) -> Result<Box<dyn Experiment>> {
    let name = command.name();
    Ok(match command {
        Command::Bayes => Box::new(Bayes::prepare(parse(name, inputs)?)?),
        Command::Tilt => Box::new(Tilt::prepare(parse(name, inputs)?)?),
        Command::Project => Box::new(Project::prepare(parse(name, inputs)?)?),
        Command::Necessity => Box::new(Necessity::prepare(parse(name, inputs)?)?),
        Command::Sanov => Box::new(Sanov::prepare(parse(name, inputs)?)?),
        Command::Gibbs => Box::new(Gibbs::prepare(parse(name, inputs)?)?),
        Command::Rate => Box::new(Rate::prepare(parse(name, inputs)?)?),
        Command::Meta => Box::new(Meta::prepare(parse(name, inputs)?)?),
        Command::Corr => Box::new(Corr::prepare(parse(name, inputs)?)?),
    })
}

fn symbols(p: &FiniteDistribution) -> Vec<String> {
    p.alphabet().symbols().iter().map(|s| s.to_string()).collect()
}

/// The checks `i_projection` (and, when `strict`, `divergence_projection`)
/// would fail on.
fn projection_precheck(q: &FiniteDistribution, c: &ConstraintSpec, strict: bool) -> Result<()> {
    let point = c.dominating_point(q, DEFAULT_TILT_TOL)?;
    check_tilt_inputs(q, &c.potential, point, DEFAULT_TILT_TOL)?;
    if strict {
        c.dominating_point(q, 0.0)?;
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("tolerance {tol} must be positive")))
    }
}

// ---------------------------------------------------------------- bayes

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BayesInput {
    posterior: Value,
    loss: Value,
}

struct Bayes {
    posterior: FiniteDistribution,
    loss: LossMatrix,
}

impl Bayes {
    fn prepare(input: BayesInput) -> Result<Self> {
        let posterior = distribution("posterior", &input.posterior)?;
        let loss = loss_matrix(&input.loss, posterior.alphabet())?;
        if loss.label_alphabet() != posterior.alphabet() {
            return Err(Error::AlphabetMismatch {
                expected: posterior.len(),
                actual: loss.label_alphabet().len(),
            });
        }
        Ok(Self { posterior, loss })
    }
}

impl Experiment for Bayes {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let decision = bayes_classifier(&self.posterior, &self.loss)?;
        let risks = row_risks(&self.posterior, &self.loss)?;
        let names: Vec<String> = self.loss.prediction_alphabet().symbols().iter().map(|s| s.to_string()).collect();
        let json = json!({
            "decision_index": decision.decision_index,
            "decision": self.loss.prediction_alphabet().symbols()[decision.decision_index],
            "expected_loss": jf(decision.expected_loss),
            "row_risks": jv(&risks),
        });
        let rows = names.iter().zip(&risks).enumerate().map(|(z, (name, r))| {
            vec![name.clone(), num(*r), (z == decision.decision_index).to_string()]
        });
        let csv = csv_bytes(&["prediction", "expected_loss", "bayes_decision"], rows)?;
        Ok(Artifacts { json, csv })
    }
}

// ---------------------------------------------------------------- tilt

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TiltInput {
    q: Value,
    potential: Vec<f64>,
    target: f64,
    #[serde(default = "default_tilt_tol")]
    tol: f64,
}

fn default_tilt_tol() -> f64 {
    DEFAULT_TILT_TOL
}

struct Tilt {
    q: FiniteDistribution,
    v: Potential,
    c: f64,
    tol: f64,
}

impl Tilt {
    fn prepare(input: TiltInput) -> Result<Self> {
        let q = distribution("q", &input.q)?;
        let v = Potential::new(input.potential)?;
        check_tilt_inputs(&q, &v, input.target, input.tol)?;
        Ok(Self {
            q,
            v,
            c: input.target,
            tol: input.tol,
        })
    }
}

impl Experiment for Tilt {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let (tilt, report) = solve_tilt_with_report(&self.q, &self.v, self.c, self.tol)?;
        let json = json!({
            "lambda": jf(tilt.lambda()),
            "distribution": jv(tilt.realized().weights()),
            "log_partition": jf(tilt.log_partition()),
            "expected_potential": jf(tilt.expected_potential()),
            "residual": jf(report.residual),
            "bisection_steps": report.bisection_steps,
            "newton_steps": report.newton_steps,
            "bracket": [jf(report.bracket.0), jf(report.bracket.1)],
        });
        let rows = symbols(&self.q)
            .into_iter()
            .zip(self.q.weights().iter().zip(tilt.realized().weights()))
            .map(|(s, (a, b))| vec![s, num(*a), num(*b)]);
        let csv = csv_bytes(&["symbol", "reference", "tilted"], rows)?;
        Ok(Artifacts { json, csv })
    }
}

// ---------------------------------------------------------------- project / necessity

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectInput {
    #[serde(alias = "p")]
    q: Value,
    potential: Vec<f64>,
    #[serde(default)]
    target: Option<f64>,
    #[serde(default)]
    target_interval: Option<[f64; 2]>,
    #[serde(default = "default_divergence")]
    divergence: String,
    #[serde(default = "default_kkt_tol")]
    tol: f64,
}

fn default_divergence() -> String {
    "kl".into()
}

fn default_kkt_tol() -> f64 {
    DEFAULT_KKT_TOL
}

struct Project {
    q: FiniteDistribution,
    constraint: ConstraintSpec,
    spec: DivergenceSpec,
    tol: f64,
}

impl Project {
    fn prepare(input: ProjectInput) -> Result<Self> {
        let q = distribution("q", &input.q)?;
        let constraint = constraint(&input.potential, input.target, input.target_interval)?;
        let spec = DivergenceSpec::parse(&input.divergence)?;
        check_tol(input.tol)?;
        projection_precheck(&q, &constraint, spec.generator != Generator::Kl)?;
        Ok(Self {
            q,
            constraint,
            spec,
            tol: input.tol,
        })
    }
}

fn tilt_json(proj: &crate::maxent::IProjection) -> Value {
    json!({
        "lambda": jf(proj.tilt.lambda()),
        "distribution": jv(proj.tilt.realized().weights()),
        "rate": jf(proj.rate),
    })
}

impl Experiment for Project {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let kl = i_projection(&self.q, &self.constraint)?;
        let other = if self.spec.generator == Generator::Kl {
            None
        } else {
            Some(divergence_projection(&self.spec, &self.q, &self.constraint, self.tol)?)
        };
        let (dist, objective, iterations, residual) = match &other {
            Some(o) => (o.distribution.weights().to_vec(), o.objective, o.iterations, o.kkt_residual),
            None => (kl.tilt.realized().weights().to_vec(), kl.rate, 0, 0.0),
        };
        let tilt_w = kl.tilt.realized().weights();
        let json = json!({
            "divergence": self.spec.generator.name(),
            "distribution": jv(&dist),
            "objective": jf(objective),
            "iterations": iterations,
            "kkt_residual": jf(residual),
            "tilt": tilt_json(&kl),
            "tv_to_tilt": jf(total_variation(&dist, tilt_w)),
        });
        let rows = symbols(&self.q)
            .into_iter()
            .zip(dist.iter().zip(tilt_w))
            .map(|(s, (a, b))| vec![s, num(*a), num(*b)]);
        let csv = csv_bytes(&["symbol", "projection", "tilt"], rows)?;
        Ok(Artifacts { json, csv })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NecessityInput {
    #[serde(alias = "p")]
    q: Value,
    potential: Vec<f64>,
    #[serde(default)]
    target: Option<f64>,
    #[serde(default)]
    target_interval: Option<[f64; 2]>,
    #[serde(default)]
    divergences: Option<Vec<String>>,
    #[serde(default = "default_kkt_tol")]
    tol: f64,
}

struct Necessity {
    q: FiniteDistribution,
    constraint: ConstraintSpec,
    specs: Vec<DivergenceSpec>,
    tol: f64,
}

impl Necessity {
    fn prepare(input: NecessityInput) -> Result<Self> {
        let q = distribution("q", &input.q)?;
        let constraint = constraint(&input.potential, input.target, input.target_interval)?;
        let specs = match input.divergences {
            Some(names) if names.is_empty() => {
                return Err(Error::InvalidInput("divergence list is empty".into()));
            }
            Some(names) => names.iter().map(|n| DivergenceSpec::parse(n)).collect::<Result<Vec<_>>>()?,
            None => Generator::ALL.into_iter().map(DivergenceSpec::new).collect(),
        };
        check_tol(input.tol)?;
        projection_precheck(&q, &constraint, true)?;
        Ok(Self {
            q,
            constraint,
            specs,
            tol: input.tol,
        })
    }
}

impl Experiment for Necessity {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let kl = i_projection(&self.q, &self.constraint)?;
        let tilt_w = kl.tilt.realized().weights();
        let rows = self
            .specs
            .par_iter()
            .map(|spec| {
                let proj = divergence_projection(spec, &self.q, &self.constraint, self.tol)?;
                let gap = total_variation(proj.distribution.weights(), tilt_w);
                let stationarity = stationarity_residual(spec, &kl.tilt)?;
                Ok((spec.generator, proj, gap, stationarity))
            })
            .collect::<Result<Vec<_>>>()?;
        let json = json!({
            "tilt": tilt_json(&kl),
            "generators": rows.iter().map(|(g, proj, gap, st)| json!({
                "generator": g.name(),
                "necessity_gap": jf(*gap),
                "stationarity_residual": jf(*st),
                "distribution": jv(proj.distribution.weights()),
                "kkt_residual": jf(proj.kkt_residual),
                "iterations": proj.iterations,
            })).collect::<Vec<_>>(),
        });
        let csv = csv_bytes(
            &["generator", "necessity_gap", "stationarity_residual"],
            rows.iter().map(|(g, _, gap, st)| vec![g.name().to_string(), num(*gap), num(*st)]),
        )?;
        Ok(Artifacts { json, csv })
    }
}

// ---------------------------------------------------------------- sanov

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SanovMethod {
    #[default]
    #[serde(alias = "exact_enumeration", alias = "exact-enumeration")]
    Exact,
    #[serde(alias = "monte-carlo")]
    MonteCarlo,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SanovInput {
    #[serde(alias = "P")]
    p: Value,
    potential: Vec<f64>,
    #[serde(default)]
    target: Option<f64>,
    #[serde(default)]
    target_interval: Option<[f64; 2]>,
    n_grid: NGrid,
    #[serde(default)]
    method: SanovMethod,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    stream: u64,
}

fn default_trials() -> u64 {
    10_000
}

struct Sanov {
    p: FiniteDistribution,
    constraint: ConstraintSpec,
    n_grid: Vec<usize>,
    method: SanovMethod,
    trials: u64,
    stream: u64,
}

impl Sanov {
    fn prepare(input: SanovInput) -> Result<Self> {
        let p = distribution("p", &input.p)?;
        let constraint = constraint(&input.potential, input.target, input.target_interval)?;
        constraint.potential.check_len(p.len())?;
        let n_grid = input.n_grid.values()?;
        match input.method {
            SanovMethod::Exact => {
                let n_max = *n_grid.iter().max().expect("non-empty grid");
                check_table_size(p.len(), n_max)?;
                let mut all_empty = true;
                for &n in &n_grid {
                    if !event_is_empty(&p, &constraint.potential, &constraint.target, n)? {
                        all_empty = false;
                        break;
                    }
                }
                if all_empty {
                    return Err(Error::EmptyEvent { n: n_grid[0] });
                }
            }
            SanovMethod::MonteCarlo => {
                if input.trials < 1000 {
                    return Err(Error::InvalidInput(format!(
                        "need at least 1000 trials, got {}",
                        input.trials
                    )));
                }
            }
        }
        Ok(Self {
            p,
            constraint,
            n_grid,
            method: input.method,
            trials: input.trials,
            stream: input.stream,
        })
    }
}

fn rate_estimate_json(est: &RateEstimate) -> Value {
    json!({
        "method": est.method.label(),
        "analytic_rate": jf(est.analytic_rate),
        "fitted_slope": jopt(est.fitted_slope),
        "slope_std_error": jopt(est.slope_std_error),
        "intercept": jopt(est.intercept),
        "r2": jopt(est.regression_r2),
        "points": est.points.iter().map(|pt| json!({
            "n": pt.n,
            "log_prob": jf(pt.log_prob),
            "ci_lo": jf(pt.ci_lo),
            "ci_hi": jf(pt.ci_hi),
            "hits": pt.hits,
            "trials": pt.trials,
            "status": pt.status,
        })).collect::<Vec<_>>(),
    })
}

impl Experiment for Sanov {
    fn run(&self, seed: u64) -> Result<Artifacts> {
        let est = match self.method {
            SanovMethod::Exact => sanov_exact(&self.p, &self.constraint, &self.n_grid)?,
            SanovMethod::MonteCarlo => {
                let sampler = SeededSampler::new(seed, self.stream, self.p.clone());
                sanov_monte_carlo(&sampler, &self.constraint, &self.n_grid, self.trials)?
            }
        };
        let label = est.method.label();
        let status = |pt: &crate::ldp::RatePoint| {
            serde_json::to_value(pt.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        };
        let rows = est.points.iter().map(|pt| {
            vec![
                pt.n.to_string(),
                num(pt.log_prob),
                label.to_string(),
                num(pt.ci_lo),
                num(pt.ci_hi),
                status(pt),
                pt.hits.map(|h| h.to_string()).unwrap_or_default(),
                pt.trials.map(|t| t.to_string()).unwrap_or_default(),
            ]
        });
        let csv = csv_bytes(
            &["n", "log_prob", "method", "ci_lo", "ci_hi", "status", "hits", "trials"],
            rows,
        )?;
        Ok(Artifacts {
            json: rate_estimate_json(&est),
            csv,
        })
    }
}

// ---------------------------------------------------------------- gibbs

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GibbsInput {
    #[serde(alias = "P")]
    p: Value,
    potential: Vec<f64>,
    #[serde(default)]
    target: Option<f64>,
    #[serde(default)]
    target_interval: Option<[f64; 2]>,
    n_grid: NGrid,
}

struct Gibbs {
    p: FiniteDistribution,
    constraint: ConstraintSpec,
    n_grid: Vec<usize>,
}

impl Gibbs {
    fn prepare(input: GibbsInput) -> Result<Self> {
        let p = distribution("p", &input.p)?;
        let constraint = constraint(&input.potential, input.target, input.target_interval)?;
        let n_grid = input.n_grid.values()?;
        let (lo, hi) = constraint.target.bounds();
        let window = ConstraintSpec::new(constraint.potential.clone(), Target::Interval(lo, hi))?;
        projection_precheck(&p, &window, false)?;
        check_table_size(p.len(), *n_grid.iter().max().expect("non-empty grid"))?;
        for &n in &n_grid {
            if event_is_empty(&p, &window.potential, &window.target, n)? {
                return Err(Error::EmptyEvent { n });
            }
        }
        Ok(Self { p, constraint, n_grid })
    }
}

impl Experiment for Gibbs {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let results = self
            .n_grid
            .par_iter()
            .map(|&n| gibbs_conditioning(&self.p, &self.constraint, n))
            .collect::<Result<Vec<_>>>()?;
        let first = &results[0];
        let tvs: Vec<f64> = results.iter().map(|r| r.tv_distance).collect();
        let json = json!({
            "window": [jf(first.window.0), jf(first.window.1)],
            "predicted": {
                "lambda": jf(first.predicted.lambda()),
                "distribution": jv(first.predicted.realized().weights()),
            },
            "strictly_decreasing": tvs.windows(2).all(|w| w[1] < w[0]),
            "points": results.iter().map(|r| json!({
                "n": r.n,
                "tv_distance": jf(r.tv_distance),
                "conditioned_mean_measure": jv(r.conditioned_mean_measure.weights()),
            })).collect::<Vec<_>>(),
        });
        let csv = csv_bytes(
            &["n", "tv_distance"],
            results.iter().map(|r| vec![r.n.to_string(), num(r.tv_distance)]),
        )?;
        Ok(Artifacts { json, csv })
    }
}

// ---------------------------------------------------------------- rate

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RateInput {
    #[serde(alias = "P")]
    p: Value,
    #[serde(default, alias = "loss_row")]
    potential: Option<Vec<f64>>,
    #[serde(default)]
    loss: Option<Value>,
    #[serde(default)]
    xi_grid: Option<Vec<f64>>,
    #[serde(default)]
    target_interval: Option<[f64; 2]>,
    #[serde(default = "default_points")]
    points: usize,
}

fn default_points() -> usize {
    50
}

struct Rate {
    p: FiniteDistribution,
    v: Potential,
    decision_index: Option<usize>,
    xi_star: f64,
    grid: Vec<f64>,
}

impl Rate {
    fn prepare(input: RateInput) -> Result<Self> {
        let p = distribution("p", &input.p)?;
        let (v, decision_index) = match (input.potential, input.loss) {
            (Some(v), None) => (Potential::new(v)?, None),
            (None, Some(loss)) => {
                let loss = loss_matrix(&loss, p.alphabet())?;
                let z = bayes_classifier(&p, &loss)?.decision_index;
                (loss.row(z)?, Some(z))
            }
            _ => {
                return Err(Error::ConfigInvalid(
                    "exactly one of `potential` (or `loss_row`) and `loss` is required".into(),
                ))
            }
        };
        v.check_len(p.len())?;
        let mut grid = match (input.xi_grid, input.target_interval) {
            (Some(g), None) => {
                if g.is_empty() || g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("xi grid must be non-empty and finite".into()));
                }
                g
            }
            (None, Some([lo, hi])) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) || input.points < 2 {
                    return Err(Error::InvalidInput(format!(
                        "need lo < hi and at least 2 points, got [{lo}, {hi}] with {}",
                        input.points
                    )));
                }
                let m = (input.points - 1) as f64;
                (0..input.points)
                    .map(|i| if i + 1 == input.points { hi } else { lo + (hi - lo) * i as f64 / m })
                    .collect()
            }
            _ => {
                return Err(Error::ConfigInvalid(
                    "exactly one of `xi_grid` and `target_interval` is required".into(),
                ))
            }
        };
        let xi_star = expected_loss(&p, &v)?;
        grid.retain(|&x| (x - xi_star).abs() > TIE_TOL * (1.0 + xi_star.abs()));
        grid.push(xi_star);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(Self {
            p,
            v,
            decision_index,
            xi_star,
            grid,
        })
    }
}

impl Experiment for Rate {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let values = crate::ldp::error_rate_function(&self.p, &self.v, &self.grid)?;
        let mut points = Vec::with_capacity(values.len());
        for (xi, r) in values {
            let (rate, status) = match r {
                Ok(rate) => (rate, "ok"),
                Err(Error::InfeasibleConstraint { .. }) => (f64::INFINITY, "infeasible"),
                Err(Error::DegeneratePotential { .. }) => (f64::INFINITY, "degenerate"),
                Err(e) => return Err(e),
            };
            points.push((xi, rate, status));
        }
        let json = json!({
            "xi_star": jf(self.xi_star),
            "decision_index": self.decision_index,
            "potential": jv(self.v.values()),
            "points": points.iter().map(|(xi, rate, status)| json!({
                "xi": jf(*xi), "rate": jf(*rate), "status": status,
            })).collect::<Vec<_>>(),
        });
        let csv = csv_bytes(
            &["xi", "rate", "status"],
            points.iter().map(|(xi, rate, status)| vec![num(*xi), num(*rate), status.to_string()]),
        )?;
        Ok(Artifacts { json, csv })
    }
}

// ---------------------------------------------------------------- meta

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PriorInput {
    Uniform,
    Discrete { models: Vec<Vec<f64>>, weights: Vec<f64> },
    Dirichlet { alpha: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaInput {
    #[serde(rename = "P", alias = "p")]
    p: Value,
    loss_row: Vec<f64>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default, rename = "Xi")]
    xi: Option<[f64; 2]>,
    #[serde(default, rename = "U")]
    statistic: Option<Statistic>,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    model_grid_step: Option<f64>,
    #[serde(default = "default_speed")]
    speed: f64,
    #[serde(default = "default_meta_tol")]
    tol: f64,
    #[serde(default = "default_true")]
    polish: bool,
    #[serde(default)]
    prior: Option<PriorInput>,
}

fn default_speed() -> f64 {
    1.0
}

fn default_meta_tol() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

struct Meta {
    p: FiniteDistribution,
    v: Potential,
    window: (f64, f64),
    prior: ModelPrior,
    opts: MapOptions,
    n: Option<usize>,
    reference: Option<ErrorDistribution>,
    fit: Option<MetaFit>,
}

fn build_prior(input: Option<PriorInput>, k: usize) -> Result<ModelPrior> {
    Ok(match input {
        None | Some(PriorInput::Uniform) => ModelPrior::Uniform,
        Some(PriorInput::Discrete { models, weights }) => ModelPrior::Discrete { models, weights },
        Some(PriorInput::Dirichlet { alpha }) => {
            if alpha.len() != k {
                return Err(Error::AlphabetMismatch {
                    expected: k,
                    actual: alpha.len(),
                });
            }
            if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::InvalidInput("Dirichlet parameters must be positive".into()));
            }
            ModelPrior::Density(Arc::new(move |mu: &[f64]| {
                mu.iter().zip(&alpha).map(|(m, a)| m.powf(a - 1.0)).product()
            }))
        }
    })
}

impl Meta {
    fn prepare(input: MetaInput) -> Result<Self> {
        let p = distribution("P", &input.p)?;
        let v = Potential::new(input.loss_row)?;
        v.check_len(p.len())?;
        let window = match input.xi {
            Some([lo, hi]) => (lo, hi),
            None => v.range_on(&(0..p.len()).collect::<Vec<_>>()),
        };
        let prior = build_prior(input.prior, p.len())?;
        check_tol(input.tol)?;
        let opts = MapOptions {
            grid_step: input.model_grid_step,
            speed: input.speed,
            tol: input.tol,
            polish: input.polish,
        };
        let meta = match (input.statistic, input.eta) {
            (Some(s), Some(eta)) => Some(MetaConstraint::new(s, eta)?),
            (None, None) => None,
            _ => return Err(Error::ConfigInvalid("`U` and `eta` must be given together".into())),
        };
        if meta.is_some() && input.n.is_none() {
            return Err(Error::ConfigInvalid("a meta-constraint needs the sample size `n`".into()));
        }
        let reference = input.n.map(|n| error_distribution_exact(&p, &v, n)).transpose()?;
        let fit = match (&meta, &reference) {
            (Some(m), Some(r)) => {
                let fit = maxent_error_fit(r, m, input.tol)?;
                if !fit.lambda_eta.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "eta = {} sits on the edge of the attainable range of U; the multiplier is infinite",
                        m.eta
                    )));
                }
                Some(fit)
            }
            _ => None,
        };
        if feasible_model_count(&p, &prior, &v, window, &opts)? == 0 {
            return Err(Error::EmptyFeasibleSet);
        }
        Ok(Self {
            p,
            v,
            window,
            prior,
            opts,
            n: input.n,
            reference,
            fit,
        })
    }
}

impl Experiment for Meta {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let res = map_model(&self.p, &self.prior, &self.v, self.window, self.fit.as_ref(), &self.opts)?;
        let error_distribution = self.reference.as_ref().map(|r| {
            json!({
                "n": self.n,
                "support": jv(r.support()),
                "reference": jv(r.weights().weights()),
                "fitted": self.fit.as_ref().map(|f| jv(f.distribution.weights().weights())),
                "center": self.fit.as_ref().map(|f| jf(f.center)),
                "fit_iterations": self.fit.as_ref().map(|f| f.iterations),
            })
        });
        let json = json!({
            "map_model": jv(res.model.weights()),
            "objective": jf(res.objective),
            "components": {
                "kl_term": jf(res.components.kl_term),
                "meta_term": jf(res.components.meta_term),
                "log_q_term": jf(res.components.log_q_term),
            },
            "lambda_eta": jf(res.lambda_eta),
            "method": res.method,
            "expected_loss": jf(res.expected_loss),
            "window": [jf(self.window.0), jf(self.window.1)],
            "grid_step": jopt(res.grid_step),
            "grid_points": res.grid_points,
            "feasible_points": res.feasible_points,
            "error_distribution": error_distribution,
        });
        let mut rows = Vec::new();
        if let Some(r) = &self.reference {
            for (i, xi) in r.support().iter().enumerate() {
                let fitted = self
                    .fit
                    .as_ref()
                    .map(|f| num(f.distribution.weights().weights()[i]))
                    .unwrap_or_default();
                rows.push(vec![num(*xi), num(r.weights().weights()[i]), fitted]);
            }
        }
        let csv = csv_bytes(&["xi", "reference_weight", "fitted_weight"], rows)?;
        Ok(Artifacts { json, csv })
    }
}

// ---------------------------------------------------------------- corr

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrInput {
    sigma_y: f64,
    #[serde(default)]
    epsilon: f64,
    #[serde(default)]
    grid: Option<GridSpec>,
    #[serde(default)]
    loss: Option<Value>,
    #[serde(default = "default_r_grid")]
    r_grid: Vec<f64>,
    #[serde(default)]
    x_value: f64,
    #[serde(default = "default_p_grid")]
    p_grid: Vec<u32>,
}

fn default_r_grid() -> Vec<f64> {
    vec![0.0, 0.2, 0.4, 0.6, 0.8]
}

fn default_p_grid() -> Vec<u32> {
    vec![2, 4, 6, 8]
}

struct Corr {
    template: GaussianPairModel,
    loss: LossKind,
    r_grid: Vec<f64>,
    x_value: f64,
    p_grid: Vec<u32>,
}

impl Corr {
    fn prepare(input: CorrInput) -> Result<Self> {
        let loss = match &input.loss {
            Some(v) => LossKind::from_json(v)?,
            None => LossKind::Quadratic,
        };
        let template = GaussianPairModel {
            sigma_y: input.sigma_y,
            r: 0.0,
            epsilon: input.epsilon,
            grid: input.grid.unwrap_or_default(),
        };
        template.validate()?;
        check_r_grid(&input.r_grid)?;
        if !input.x_value.is_finite() {
            return Err(Error::InvalidInput(format!("x_value {} is not finite", input.x_value)));
        }
        if let Some(p) = input.p_grid.iter().find(|&&p| p == 0 || p % 2 == 1) {
            return Err(Error::InvalidInput(format!("moment orders must be positive and even, got {p}")));
        }
        for &r in &input.r_grid {
            check_quadrature(&template.with_r(r)?)?;
        }
        Ok(Self {
            template,
            loss,
            r_grid: input.r_grid,
            x_value: input.x_value,
            p_grid: input.p_grid,
        })
    }
}

impl Experiment for Corr {
    fn run(&self, _seed: u64) -> Result<Artifacts> {
        let curve = loss_correlation_curve(&self.template, &self.loss, &self.r_grid, self.x_value)?;
        let per_r = self
            .r_grid
            .par_iter()
            .map(|&r| {
                let model = self.template.with_r(r)?;
                let expansion = conditional_loss_expansion(&model, &self.loss, self.x_value)?;
                let envelope = moment_envelope_check(&model, self.x_value, &self.p_grid)?;
                Ok((expansion, envelope))
            })
            .collect::<Result<Vec<_>>>()?;
        let json = json!({
            "loss": self.loss,
            "fit": {"slope": jf(curve.slope), "intercept": jf(curve.intercept), "r2": jf(curve.r2)},
            "k_epsilon": jf(curve.k_epsilon),
            "monotone_non_increasing": curve.monotone_non_increasing,
            "points": self.r_grid.iter().zip(&curve.expected_losses).zip(&per_r)
                .map(|((r, l), (ex, env))| json!({
                    "r": jf(*r),
                    "expected_loss": jf(*l),
                    "taylor": jf(ex.taylor),
                    "taylor_residual": jf(ex.residual),
                    "third_order_scale": jf(ex.third_order_scale),
                    "envelope": {
                        "sigma2": jf(env.sigma2),
                        "p_grid": env.p_grid,
                        "lhs": jv(&env.lhs),
                        "rhs": jv(&env.rhs),
                        "satisfied": env.satisfied,
                        "quadrature_relative_error": jf(env.quadrature_relative_error),
                    },
                })).collect::<Vec<_>>(),
        });
        let csv = csv_bytes(
            &["r", "expected_loss"],
            self.r_grid.iter().zip(&curve.expected_losses).map(|(r, l)| vec![num(*r), num(*l)]),
        )?;
        Ok(Artifacts { json, csv })
    }
}
