//! Nonparametric bootstrap over whole units.
//!
//! Draw `b` depends only on `(seed, b)`, so draws can be evaluated in any
//! order and the first `B` draws do not change when more are requested.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;

use crate::em::FitResult;
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::montecarlo::{fit_methods, EstimatorConfig, Method};
use crate::panel::{CovariatePanel, ResponsePanel};
use crate::params::ModelParams;
use crate::rng::{child_seed, rng_from};
use crate::simulate::align_states;

/// Bootstrap request.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub method: Method,
    pub draws: usize,
    pub seed: u64,
    pub k: usize,
    pub estimator: EstimatorConfig,
    /// Full maximum likelihood is refused unless set.
    pub allow_fml: bool,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws < 2 {
            return Err(Error::usage("bootstrap needs at least 2 draws"));
        }
        if self.method == Method::Fml && !self.allow_fml {
            return Err(Error::usage(
                "bootstrapping full maximum likelihood is disabled; pass the explicit override to enable it",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub names: Vec<String>,
    /// Standard deviation per parameter over successful draws (denominator `B - 1`).
    pub se: Vec<f64>,
    /// Aligned estimates of each draw, `None` for failed draws.
    pub draws: Vec<Option<Vec<f64>>>,
    pub errors: Vec<Option<String>>,
    pub failures: usize,
}

/// Unit indices of draw `b`.
pub fn resample_units(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = rng_from(child_seed(child_seed(seed, b as u64), 0));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn estimator_seed(seed: u64, b: usize) -> u64 {
    child_seed(child_seed(seed, b as u64), 1)
}

/// Fits the original data with the configured estimator.
pub fn original_fit(panel: &ResponsePanel, covs: Option<&CovariatePanel>, cfg: &BootstrapConfig) -> Result<FitResult> {
    cfg.validate()?;
    single_fit(panel, covs, cfg, cfg.seed)
}

fn single_fit(panel: &ResponsePanel, covs: Option<&CovariatePanel>, cfg: &BootstrapConfig, seed: u64) -> Result<FitResult> {
    let methods = [cfg.method];
    let (_, fit, _) = fit_methods(&methods, panel, covs, cfg.k, &cfg.estimator, seed, None)
        .pop()
        .expect("one method requested");
    fit
}

/// Resamples, refits and aligns draw `b` to `reference`, returning values in
/// the reference's naming order.
pub fn bootstrap_draw(
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    cfg: &BootstrapConfig,
    reference: &ModelParams,
    b: usize,
) -> Result<Vec<f64>> {
    let units = resample_units(panel.n(), cfg.seed, b);
    let p = panel.select_units(&units);
    let c = covs.map(|c| c.select_units(&units));
    let fit = single_fit(&p, c.as_ref(), cfg, estimator_seed(cfg.seed, b))?;
    let (aligned, _) = align_states(&fit.params, reference)?;
    Ok(aligned.named_values().into_iter().map(|(_, v)| v).collect())
}

/// Standard errors from per-draw outcomes (in draw order).
pub fn assemble_bootstrap(reference: &ModelParams, outcomes: Vec<Result<Vec<f64>>>) -> Result<BootstrapResult> {
    let names: Vec<String> = reference.named_values().into_iter().map(|(n, _)| n).collect();
    let total = outcomes.len();
    let mut draws = Vec::with_capacity(total);
    let mut errors = Vec::with_capacity(total);
    for o in outcomes {
        match o {
            Ok(v) => {
                draws.push(Some(v));
                errors.push(None);
            }
            Err(e) => {
                draws.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let failures = total - ok.len();
    if failures * 5 > total || ok.len() < 2 {
        return Err(Error::TooManyFailures { failed: failures, total });
    }
    let m = ok.len() as f64;
    let se = (0..names.len())
        .map(|p| {
            let mean = ok.iter().map(|v| v[p]).sum::<f64>() / m;
            let ss: f64 = ok.iter().map(|v| (v[p] - mean) * (v[p] - mean)).sum();
            sqrt(ss / (m - 1.0))
        })
        .collect();
    Ok(BootstrapResult {
        names,
        se,
        draws,
        errors,
        failures,
    })
}

/// Sequential bootstrap; returns the original fit and the bootstrap summary.
pub fn bootstrap_se(
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    cfg: &BootstrapConfig,
) -> Result<(FitResult, BootstrapResult)> {
    let fit = original_fit(panel, covs, cfg)?;
    let outcomes = (0..cfg.draws)
        .map(|b| bootstrap_draw(panel, covs, cfg, &fit.params, b))
        .collect();
    let res = assemble_bootstrap(&fit.params, outcomes)?;
    Ok((fit, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::scenario_preset;
    use alloc::vec;

    #[test]
    fn constant_draws_have_zero_se() {
        let truth = scenario_preset("basic-s1").unwrap().truth;
        let v: Vec<f64> = truth.named_values().into_iter().map(|(_, x)| x).collect();
        let res = assemble_bootstrap(&truth, vec![Ok(v.clone()), Ok(v)]).unwrap();
        assert!(res.se.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn resampling_prefix_is_stable() {
        assert_eq!(resample_units(30, 9, 4), resample_units(30, 9, 4));
        assert_ne!(resample_units(30, 9, 4), resample_units(30, 9, 5));
    }

    #[test]
    fn fml_needs_override() {
        let cfg = BootstrapConfig {
            method: Method::Fml,
            draws: 10,
            seed: 0,
            k: 2,
            estimator: EstimatorConfig::default(),
            allow_fml: false,
        };
        assert!(cfg.validate().is_err());
        assert!(BootstrapConfig { allow_fml: true, ..cfg }.validate().is_ok());
    }
}
