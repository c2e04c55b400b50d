//! Run configuration: a TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};

use lmest_core::montecarlo::{EstimatorConfig, Method};
use lmest_core::simulate::{scenario_preset, Scenario};
use lmest_core::{FitOptions, GammaLayout, ThreeStepOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Iterated three-step controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpConfig {
    pub imp_max_iter: usize,
    pub imp_tol: f64,
}

impl Default for ImpConfig {
    fn default() -> Self {
        let d = ThreeStepOptions::default();
        Self {
            imp_max_iter: d.imp_max_iter,
            imp_tol: d.imp_tol,
        }
    }
}

/// Every setting of every command. The thread count and output directory
/// are not echoed: neither affects results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub record_time: bool,
    pub scenario: Option<String>,
    pub r: Option<usize>,
    pub responses: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub method: Option<Method>,
    pub methods: Option<Vec<Method>>,
    pub k: Option<usize>,
    pub layout: GammaLayout,
    pub reps: Option<usize>,
    pub draws: Option<usize>,
    pub allow_fml: bool,
    pub phi: Option<PathBuf>,
    pub sections: Option<PathBuf>,
    pub pivot: usize,
    pub em: FitOptions,
    pub three_step: ImpConfig,
    /// A full scenario definition, used when `scenario` names no preset.
    pub custom_scenario: Option<Scenario>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            out: None,
            record_time: false,
            scenario: None,
            r: None,
            responses: None,
            covariates: None,
            groups: None,
            method: None,
            methods: None,
            k: None,
            layout: GammaLayout::Pairwise,
            reps: None,
            draws: None,
            allow_fml: false,
            phi: None,
            sections: None,
            pivot: 1,
            em: FitOptions::default(),
            three_step: ImpConfig::default(),
            custom_scenario: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {}", path.display(), e)))
    }

    /// The resolved configuration as TOML.
    pub fn echo(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.em.seed = c.seed;
        toml::to_string(&c).map_err(|e| CliError::Usage(format!("cannot serialize configuration: {e}")))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("an output directory is required (--out)".into()))
    }

    pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| CliError::Usage(format!("missing required setting {flag}")))
    }

    /// Preset or custom scenario, with the item-count override applied.
    pub fn resolve_scenario(&self) -> Result<Scenario, CliError> {
        let base = match (&self.scenario, &self.custom_scenario) {
            (Some(name), _) => scenario_preset(name)?,
            (None, Some(s)) => {
                s.validate()?;
                s.clone()
            }
            (None, None) => return Err(CliError::Usage("a scenario name or custom_scenario is required".into())),
        };
        Ok(match self.r {
            Some(r) => base.with_items(r)?,
            None => base,
        })
    }

    pub fn estimator(&self) -> Result<EstimatorConfig, CliError> {
        let fml = FitOptions { seed: self.seed, ..self.em };
        fml.validate()?;
        let three_step = ThreeStepOptions {
            improved: false,
            imp_max_iter: self.three_step.imp_max_iter,
            imp_tol: self.three_step.imp_tol,
            lc_opts: fml,
        };
        three_step.validate()?;
        Ok(EstimatorConfig {
            fml,
            three_step,
            layout: self.layout,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_echo() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 7
            threads = 3
            methods = ["fml", "3s-imp"]
            layout = "difference"
            [em]
            n_starts = 2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.methods, Some(vec![Method::Fml, Method::ThreeStepImp]));
        assert_eq!(cfg.em.n_starts, 2);
        assert_eq!(cfg.em.max_iter, 1000);
        let echo = cfg.echo().unwrap();
        assert!(!echo.contains("threads"));
        let back: RunConfig = toml::from_str(&echo).unwrap();
        assert_eq!(back.methods, cfg.methods);
        assert_eq!(back.em.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }

    #[test]
    fn custom_scenario_round_trips() {
        let cfg = RunConfig {
            custom_scenario: Some(scenario_preset("cov-s2").unwrap()),
            ..RunConfig::default()
        };
        let back: RunConfig = toml::from_str(&cfg.echo().unwrap()).unwrap();
        assert_eq!(back.resolve_scenario().unwrap(), cfg.custom_scenario.unwrap());
    }
}
