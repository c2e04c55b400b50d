//! Command-line interface.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lmest_core::bootstrap::BootstrapConfig;
use lmest_core::montecarlo::{fit_methods, Method};
use lmest_core::report::{averaged_probability_tables, score_table};
use lmest_core::simulate::gen_panel;
use lmest_core::{CovariatePanel, FitResult, GammaLayout, LoglikKind};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io;
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "lmest", version, about = "Latent Markov models for categorical panel data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a scenario.
    Simulate {
        /// Preset name (see the error message for the list).
        scenario: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model to response (and covariate) files.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: Estimation,
        /// unit_id,group file for group-averaged probability tables.
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Monte Carlo bias/se/rmse for a scenario.
    Montecarlo {
        scenario: Option<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: Estimation,
        /// Comma-separated methods: fml, 3s, 3s-imp.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Nonparametric bootstrap standard errors.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: Estimation,
        /// Number of bootstrap draws.
        #[arg(long)]
        draws: Option<usize>,
        /// Permit bootstrapping the full-likelihood estimator.
        #[arg(long)]
        allow_fml: bool,
    },
    /// Item and section mean scores from a phi table.
    Scores {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        phi: Option<PathBuf>,
        /// item,section file (1-based).
        #[arg(long)]
        sections: Option<PathBuf>,
        /// Section used to order the states (1-based).
        #[arg(long)]
        pivot: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Item-count override for scenario variants.
    #[arg(long)]
    r: Option<usize>,
    /// Also write wall times to the output files.
    #[arg(long)]
    record_time: bool,
}

#[derive(Debug, Args)]
pub struct Estimation {
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_layout)]
    layout: Option<GammaLayout>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long)]
    imp_max_iter: Option<usize>,
    #[arg(long)]
    imp_tol: Option<f64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn parse_layout(s: &str) -> Result<GammaLayout, String> {
    match s {
        "pairwise" => Ok(GammaLayout::Pairwise),
        "difference" => Ok(GammaLayout::Difference),
        _ => Err(format!("unknown layout '{s}' (expected pairwise or difference)")),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl Common {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set_opt(&mut cfg.threads, self.threads);
        set_opt(&mut cfg.out, self.out);
        set_opt(&mut cfg.r, self.r);
        cfg.record_time |= self.record_time;
        Ok(cfg)
    }
}

impl Estimation {
    fn apply(self, cfg: &mut RunConfig) {
        set_opt(&mut cfg.responses, self.responses);
        set_opt(&mut cfg.covariates, self.covariates);
        set_opt(&mut cfg.method, self.method);
        set_opt(&mut cfg.k, self.k);
        set(&mut cfg.layout, self.layout);
        set(&mut cfg.em.max_iter, self.max_iter);
        set(&mut cfg.em.rel_tol, self.rel_tol);
        set(&mut cfg.em.n_starts, self.n_starts);
        set(&mut cfg.em.perturbation, self.perturbation);
        set(&mut cfg.three_step.imp_max_iter, self.imp_max_iter);
        set(&mut cfg.three_step.imp_tol, self.imp_tol);
    }
}

/// Runs the parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scenario, common } => {
            let mut cfg = common.resolve()?;
            set_opt(&mut cfg.scenario, scenario);
            cmd_simulate(&cfg)
        }
        Command::Fit { common, est, groups } => {
            let mut cfg = common.resolve()?;
            est.apply(&mut cfg);
            set_opt(&mut cfg.groups, groups);
            cmd_fit(&cfg)
        }
        Command::Montecarlo {
            scenario,
            common,
            est,
            methods,
            reps,
        } => {
            let mut cfg = common.resolve()?;
            est.apply(&mut cfg);
            set_opt(&mut cfg.scenario, scenario);
            set_opt(&mut cfg.methods, methods);
            set_opt(&mut cfg.reps, reps);
            cmd_montecarlo(&cfg)
        }
        Command::Bootstrap {
            common,
            est,
            draws,
            allow_fml,
        } => {
            let mut cfg = common.resolve()?;
            est.apply(&mut cfg);
            set_opt(&mut cfg.draws, draws);
            cfg.allow_fml |= allow_fml;
            cmd_bootstrap(&cfg)
        }
        Command::Scores {
            common,
            phi,
            sections,
            pivot,
        } => {
            let mut cfg = common.resolve()?;
            set_opt(&mut cfg.phi, phi);
            set_opt(&mut cfg.sections, sections);
            set(&mut cfg.pivot, pivot);
            cmd_scores(&cfg)
        }
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<&Path, CliError> {
    let out = cfg.out_dir()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    io::write_text(&out.join("config.toml"), &cfg.echo()?)?;
    Ok(out)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let scenario = cfg.resolve_scenario()?;
    let data = gen_panel(&scenario, cfg.seed)?;
    let out = prepare_out(cfg)?;
    let ids: Vec<String> = (1..=scenario.n).map(|i| i.to_string()).collect();
    io::write_responses(&out.join("responses.csv"), &ids, &data.responses)?;
    if let Some(c) = &data.covariates {
        io::write_covariates(&out.join("covariates.csv"), &ids, c)?;
    }
    io::write_states(&out.join("states.csv"), &ids, scenario.t, &data.states)?;
    #[derive(Serialize)]
    struct Manifest<'a> {
        seed: u64,
        scenario: &'a lmest_core::simulate::Scenario,
    }
    let manifest = toml::to_string(&Manifest {
        seed: cfg.seed,
        scenario: &scenario,
    })
    .map_err(|e| CliError::Usage(format!("cannot serialize manifest: {e}")))?;
    io::write_text(&out.join("manifest.toml"), &manifest)?;
    let truth = out.join("truth");
    std::fs::create_dir_all(&truth).map_err(|e| CliError::io(&truth, e))?;
    io::write_params(&truth, &scenario.truth)
}

struct Loaded {
    ids: Vec<String>,
    panel: lmest_core::ResponsePanel,
    covs: Option<CovariatePanel>,
}

fn load_data(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let r = io::read_responses(RunConfig::require(&cfg.responses, "--responses")?)?;
    let covs = match &cfg.covariates {
        Some(p) => Some(io::read_covariates(p, &r.ids, r.panel.occasions())?),
        None => None,
    };
    Ok(Loaded {
        ids: r.ids,
        panel: r.panel,
        covs,
    })
}

#[derive(Serialize)]
struct FitLog {
    method: Method,
    k: usize,
    loglik: f64,
    loglik_kind: &'static str,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    cycles: Option<usize>,
    state_collapse: bool,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
    iterations: Vec<usize>,
    start_logliks: Vec<f64>,
    trace: Vec<f64>,
}

fn fit_log(method: Method, fit: &FitResult, wall_time: Option<f64>) -> Result<String, CliError> {
    let log = FitLog {
        method,
        k: fit.params.k(),
        loglik: fit.loglik,
        loglik_kind: match fit.loglik_kind {
            LoglikKind::Full => "full",
            LoglikKind::PooledLc => "pooled-lc",
        },
        converged: fit.converged,
        cycles: fit.cycles,
        state_collapse: fit.state_collapse,
        degenerate: fit.degenerate,
        wall_time,
        iterations: fit.iterations.clone(),
        start_logliks: fit.start_logliks.clone(),
        trace: fit.trace.clone(),
    };
    toml::to_string(&log).map_err(|e| CliError::Usage(format!("cannot serialize fit log: {e}")))
}

fn warn_flags(fit: &FitResult) {
    if fit.state_collapse {
        eprintln!("warning: a latent state received almost no posterior mass");
    }
    if fit.degenerate {
        eprintln!("warning: latent estimates are degenerate (uninformative items, empty transition rows, or k above the number of distinct patterns)");
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<(), CliError> {
    let method = *RunConfig::require(&cfg.method, "--method")?;
    let k = *RunConfig::require(&cfg.k, "--k")?;
    let est = cfg.estimator()?;
    let data = load_data(cfg)?;
    let groups = match &cfg.groups {
        Some(p) => Some(io::read_groups(p, &data.ids)?),
        None => None,
    };
    let out = prepare_out(cfg)?;
    let t0 = Instant::now();
    let (_, fit, _) = fit_methods(&[method], &data.panel, data.covs.as_ref(), k, &est, cfg.seed, None)
        .pop()
        .expect("one method requested");
    let fit = fit?;
    let wall = t0.elapsed().as_secs_f64();
    eprintln!("{} fit finished in {:.3} s", method.name(), wall);
    warn_flags(&fit);
    io::write_params(out, &fit.params)?;
    io::write_text(&out.join("fit_log.toml"), &fit_log(method, &fit, cfg.record_time.then_some(wall))?)?;
    if let Some((groups, labels)) = groups {
        let covs = data
            .covs
            .clone()
            .unwrap_or_else(|| CovariatePanel::empty(data.panel.n(), data.panel.occasions()));
        let (tables, empty) = averaged_probability_tables(&fit.params.latent, &covs, &groups, labels.len())?;
        for g in empty {
            eprintln!("warning: group {} has no units", labels[g]);
        }
        io::write_group_tables(out, k, &labels, &tables)?;
    }
    if !fit.converged {
        return Err(CliError::NotConverged(format!(
            "{} fit did not converge; outputs were written",
            method.name()
        )));
    }
    Ok(())
}

pub fn cmd_montecarlo(cfg: &RunConfig) -> Result<(), CliError> {
    let scenario = cfg.resolve_scenario()?;
    let methods = cfg.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
    let reps = *RunConfig::require(&cfg.reps, "--reps")?;
    let est = cfg.estimator()?;
    let out = prepare_out(cfg)?;
    let reports = parallel::run_monte_carlo(&scenario, &methods, &est, reps, cfg.seed, cfg.threads)?;
    io::write_mc_report(&out.join("report.csv"), &reports)?;
    io::write_mc_diagnostics(&out.join("diagnostics.csv"), &reports, cfg.record_time)?;
    for r in &reports {
        if r.failures > 0 {
            eprintln!("warning: {} of {} {} replications failed", r.failures, r.reps, r.method.name());
        }
    }
    Ok(())
}

pub fn cmd_bootstrap(cfg: &RunConfig) -> Result<(), CliError> {
    let method = *RunConfig::require(&cfg.method, "--method")?;
    let k = *RunConfig::require(&cfg.k, "--k")?;
    let bcfg = BootstrapConfig {
        method,
        draws: *RunConfig::require(&cfg.draws, "--draws")?,
        seed: cfg.seed,
        k,
        estimator: cfg.estimator()?,
        allow_fml: cfg.allow_fml,
    };
    bcfg.validate()?;
    let data = load_data(cfg)?;
    let out = prepare_out(cfg)?;
    let (fit, res) = parallel::run_bootstrap(&data.panel, data.covs.as_ref(), &bcfg, cfg.threads)?;
    warn_flags(&fit);
    io::write_params(out, &fit.params)?;
    io::write_bootstrap(out, &fit.params, &res)?;
    if res.failures > 0 {
        eprintln!("warning: {} of {} bootstrap draws failed", res.failures, bcfg.draws);
    }
    Ok(())
}

pub fn cmd_scores(cfg: &RunConfig) -> Result<(), CliError> {
    let meas = io::read_phi(RunConfig::require(&cfg.phi, "--phi")?)?;
    let (sections, d) = io::read_sections(RunConfig::require(&cfg.sections, "--sections")?, meas.items())?;
    if cfg.pivot == 0 || cfg.pivot > d {
        return Err(CliError::Usage(format!("pivot must be a section in 1..={d}")));
    }
    let table = score_table(&meas, &sections, d, cfg.pivot - 1)?;
    let out = prepare_out(cfg)?;
    io::write_scores(out, &table)
}
