//! Parallel Monte Carlo and bootstrap runners.
//!
//! Each replication or draw derives its seeds from its index alone and
//! results are collected in index order, so output does not depend on the
//! number of threads.

use std::time::Instant;

use lmest_core::bootstrap::{assemble_bootstrap, bootstrap_draw, original_fit, BootstrapConfig, BootstrapResult};
use lmest_core::montecarlo::{assemble_reports, check_request, run_replication, EstimatorConfig, Method, MonteCarloReport, ReplicationOutcome};
use lmest_core::simulate::Scenario;
use lmest_core::{CovariatePanel, FitResult, ResponsePanel};
use rayon::prelude::*;

use crate::error::CliError;

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

/// Replications `range` of a Monte Carlo run, in order.
pub fn replications(
    scenario: &Scenario,
    methods: &[Method],
    cfg: &EstimatorConfig,
    range: std::ops::Range<usize>,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<Vec<ReplicationOutcome>>, CliError> {
    let origin = Instant::now();
    let clock = move || origin.elapsed().as_secs_f64();
    Ok(pool(threads)?.install(|| {
        range
            .into_par_iter()
            .map(|m| run_replication(scenario, methods, cfg, seed, m, Some(&clock)))
            .collect()
    }))
}

pub fn run_monte_carlo(
    scenario: &Scenario,
    methods: &[Method],
    cfg: &EstimatorConfig,
    reps: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<MonteCarloReport>, CliError> {
    check_request(scenario, methods, reps)?;
    let outcomes = replications(scenario, methods, cfg, 0..reps, seed, threads)?;
    Ok(assemble_reports(scenario, methods, &outcomes)?)
}

/// Original fit and bootstrap standard errors, draws evaluated in parallel.
pub fn run_bootstrap(
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    cfg: &BootstrapConfig,
    threads: Option<usize>,
) -> Result<(FitResult, BootstrapResult), CliError> {
    let fit = original_fit(panel, covs, cfg)?;
    let outcomes = pool(threads)?.install(|| {
        (0..cfg.draws)
            .into_par_iter()
            .map(|b| bootstrap_draw(panel, covs, cfg, &fit.params, b))
            .collect()
    });
    let res = assemble_bootstrap(&fit.params, outcomes)?;
    Ok((fit, res))
}
