//! Monte Carlo replication harness: simulate, fit, align to the truth and
//! summarize bias, standard error and rmse per parameter.
//!
//! Replications are independent given `(seed, m)`, so callers may evaluate
//! [`run_replication`] in any order or in parallel and pass the outcomes, in
//! replication order, to [`assemble_reports`].

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::em::{fit_basic_lm_fml, fit_cov_lm_fml, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::panel::{CovariatePanel, ResponsePanel};
use crate::params::{GammaLayout, ModelParams};
use crate::rng::child_seed;
use crate::simulate::{align_states, gen_panel, Scenario};
use crate::threestep::{fit_3s, fit_3s_imp_from, ThreeStepOptions};

/// Largest tolerated share of failed runs, as `failed * DEN > total * NUM`.
const FAIL_NUM: usize = 1;
const FAIL_DEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    #[cfg_attr(feature = "serde", serde(rename = "fml"))]
    Fml,
    #[cfg_attr(feature = "serde", serde(rename = "3s"))]
    ThreeStep,
    #[cfg_attr(feature = "serde", serde(rename = "3s-imp"))]
    ThreeStepImp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fml, Method::ThreeStep, Method::ThreeStepImp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fml => "fml",
            Method::ThreeStep => "3s",
            Method::ThreeStepImp => "3s-imp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fml" => Ok(Method::Fml),
            "3s" => Ok(Method::ThreeStep),
            "3s-imp" | "3simp" | "3s_imp" => Ok(Method::ThreeStepImp),
            other => Err(Error::Usage(alloc::format!(
                "unknown method '{}' (expected fml, 3s or 3s-imp)",
                other
            ))),
        }
    }
}

/// Estimator settings shared by every replication.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub fml: FitOptions,
    pub three_step: ThreeStepOptions,
    pub layout: GammaLayout,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            fml: FitOptions::default(),
            three_step: ThreeStepOptions::default(),
            layout: GammaLayout::Pairwise,
        }
    }
}

/// Fits `methods` to one dataset, all with estimator seed `seed`.
///
/// When both plain and iterated three-step fits are requested the iterated
/// one continues from the plain one. `clock` (seconds, any origin) times each
/// method; without it wall times are `None`.
pub fn fit_methods(
    methods: &[Method],
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    k: usize,
    cfg: &EstimatorConfig,
    seed: u64,
    clock: Option<&dyn Fn() -> f64>,
) -> Vec<(Method, Result<FitResult>, Option<f64>)> {
    let now = || clock.map(|c| c());
    let elapsed = |start: Option<f64>| start.and_then(|s| now().map(|e| e - s));
    let mut out = Vec::with_capacity(methods.len());
    let mut plain: Option<(Result<FitResult>, Option<f64>)> = None;
    for &m in methods {
        match m {
            Method::Fml => {
                let opts = FitOptions { seed, ..cfg.fml };
                let t0 = now();
                let fit = match covs {
                    None => fit_basic_lm_fml(panel, k, &opts),
                    Some(c) => fit_cov_lm_fml(panel, c, k, cfg.layout, &opts),
                };
                out.push((m, fit, elapsed(t0)));
            }
            Method::ThreeStep | Method::ThreeStepImp => {
                let mut opts = cfg.three_step;
                opts.lc_opts.seed = seed;
                if plain.is_none() {
                    let t0 = now();
                    let fit = fit_3s(panel, covs, k, cfg.layout, &opts);
                    plain = Some((fit, elapsed(t0)));
                }
                let (base, base_time) = plain.as_ref().expect("computed above");
                if m == Method::ThreeStep {
                    out.push((m, base.clone(), *base_time));
                } else {
                    let t0 = now();
                    let fit = match base {
                        Ok(b) => fit_3s_imp_from(b, panel, covs, &opts),
                        Err(e) => Err(e.clone()),
                    };
                    // The iterated fit's cost includes the plain fit it starts from.
                    let time = match (elapsed(t0), base_time) {
                        (Some(a), Some(b)) => Some(a + b),
                        _ => None,
                    };
                    out.push((m, fit, time));
                }
            }
        }
    }
    out
}

/// Diagnostics of one replication for one estimator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationDiagnostics {
    pub rep: usize,
    pub converged: bool,
    /// EM iterations of the selected start.
    pub iterations: usize,
    pub cycles: Option<usize>,
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of one replication for one estimator: aligned parameter values in
/// the truth's naming order, or the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub method: Method,
    pub values: Option<Vec<f64>>,
    pub diagnostics: ReplicationDiagnostics,
}

fn selected_iterations(fit: &FitResult) -> usize {
    let best = fit
        .start_logliks
        .iter()
        .position(|&l| l == fit.loglik)
        .unwrap_or(0);
    fit.iterations.get(best).copied().unwrap_or(0)
}

/// Aligns `est` to `truth` and lists its values in the truth's name order.
pub fn aligned_values(est: &ModelParams, truth: &ModelParams) -> Result<Vec<f64>> {
    let (aligned, _) = align_states(est, truth)?;
    let names = truth.named_values();
    let vals = aligned.named_values();
    if vals.len() != names.len() || vals.iter().zip(&names).any(|(a, b)| a.0 != b.0) {
        return Err(Error::usage("estimate and truth have different parameterizations"));
    }
    Ok(vals.into_iter().map(|(_, v)| v).collect())
}

/// Seeds of replication `m`: (data, estimator).
pub fn replication_seeds(seed: u64, m: usize) -> (u64, u64) {
    let rep = child_seed(seed, m as u64);
    (child_seed(rep, 0), child_seed(rep, 1))
}

/// Simulates replication `m` and fits every requested method.
pub fn run_replication(
    scenario: &Scenario,
    methods: &[Method],
    cfg: &EstimatorConfig,
    seed: u64,
    m: usize,
    clock: Option<&dyn Fn() -> f64>,
) -> Vec<ReplicationOutcome> {
    let (data_seed, est_seed) = replication_seeds(seed, m);
    let data = match gen_panel(scenario, data_seed) {
        Ok(d) => d,
        Err(e) => {
            return methods
                .iter()
                .map(|&method| failed(method, m, e.to_string()))
                .collect()
        }
    };
    fit_methods(
        methods,
        &data.responses,
        data.covariates.as_ref(),
        scenario.k,
        cfg,
        est_seed,
        clock,
    )
    .into_iter()
    .map(|(method, fit, wall_time)| match fit.and_then(|f| aligned_values(&f.params, &scenario.truth).map(|v| (f, v))) {
        Ok((f, v)) => ReplicationOutcome {
            method,
            values: Some(v),
            diagnostics: ReplicationDiagnostics {
                rep: m,
                converged: f.converged,
                iterations: selected_iterations(&f),
                cycles: f.cycles,
                wall_time,
                error: None,
            },
        },
        Err(e) => {
            let mut o = failed(method, m, e.to_string());
            o.diagnostics.wall_time = wall_time;
            o
        }
    })
    .collect()
}

fn failed(method: Method, rep: usize, error: String) -> ReplicationOutcome {
    ReplicationOutcome {
        method,
        values: None,
        diagnostics: ReplicationDiagnostics {
            rep,
            converged: false,
            iterations: 0,
            cycles: None,
            wall_time: None,
            error: Some(error),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub bias: f64,
    /// Standard deviation across replications (denominator: successful replications).
    pub se: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarloReport {
    pub scenario: String,
    pub method: Method,
    pub reps: usize,
    pub failures: usize,
    pub rows: Vec<ParamSummary>,
    pub diagnostics: Vec<ReplicationDiagnostics>,
}

impl MonteCarloReport {
    pub fn row(&self, name: &str) -> Option<&ParamSummary> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Bias, population standard deviation and rmse of `samples` against `truth`.
pub fn summarize(samples: &[f64], truth: f64) -> (f64, f64, f64) {
    let m = samples.len() as f64;
    // Work with deviations from the truth so an exact estimator gives exact zeros.
    let bias = samples.iter().map(|x| x - truth).sum::<f64>() / m;
    let var = samples
        .iter()
        .map(|x| {
            let d = x - truth - bias;
            d * d
        })
        .sum::<f64>()
        / m;
    let se = sqrt(var);
    (bias, se, sqrt(bias * bias + se * se))
}

/// Builds one report per method from per-replication outcomes (outer index:
/// replication, in order).
pub fn assemble_reports(
    scenario: &Scenario,
    methods: &[Method],
    outcomes: &[Vec<ReplicationOutcome>],
) -> Result<Vec<MonteCarloReport>> {
    let truth = scenario.truth.named_values();
    let reps = outcomes.len();
    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        let mine: Vec<&ReplicationOutcome> = outcomes
            .iter()
            .filter_map(|rep| rep.iter().find(|o| o.method == method))
            .collect();
        if mine.len() != reps {
            return Err(Error::usage("every replication must report every method"));
        }
        let ok: Vec<&Vec<f64>> = mine.iter().filter_map(|o| o.values.as_ref()).collect();
        let failures = reps - ok.len();
        if failures * FAIL_DEN > reps * FAIL_NUM || ok.is_empty() {
            return Err(Error::TooManyFailures { failed: failures, total: reps });
        }
        let rows = truth
            .iter()
            .enumerate()
            .map(|(p, (name, t))| {
                let samples: Vec<f64> = ok.iter().map(|v| v[p]).collect();
                let (bias, se, rmse) = summarize(&samples, *t);
                ParamSummary {
                    name: name.clone(),
                    truth: *t,
                    bias,
                    se,
                    rmse,
                }
            })
            .collect();
        reports.push(MonteCarloReport {
            scenario: scenario.name.clone(),
            method,
            reps,
            failures,
            rows,
            diagnostics: mine.iter().map(|o| o.diagnostics.clone()).collect(),
        });
    }
    Ok(reports)
}

/// Sequential Monte Carlo run.
pub fn run_monte_carlo(
    scenario: &Scenario,
    methods: &[Method],
    cfg: &EstimatorConfig,
    reps: usize,
    seed: u64,
) -> Result<Vec<MonteCarloReport>> {
    check_request(scenario, methods, reps)?;
    let outcomes: Vec<_> = (0..reps)
        .map(|m| run_replication(scenario, methods, cfg, seed, m, None))
        .collect();
    assemble_reports(scenario, methods, &outcomes)
}

/// Argument checks shared by every runner.
pub fn check_request(scenario: &Scenario, methods: &[Method], reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::usage("reps must be at least 2"));
    }
    if methods.is_empty() {
        return Err(Error::usage("at least one method is required"));
    }
    let mut sorted = methods.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != methods.len() {
        return Err(Error::usage("methods must be distinct"));
    }
    scenario.validate()
}
