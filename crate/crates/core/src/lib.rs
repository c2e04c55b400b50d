//! Estimation of latent Markov models for multivariate categorical panel data.
//!
//! The crate covers the full pipeline for models in which `r` categorical
//! items are observed on `n` units at `T` occasions and depend on a
//! first-order hidden Markov chain over `k` states:
//!
//! * [`model`]: emission probabilities, covariate links and the scaled
//!   forward-backward recursions.
//! * [`em`]: full-maximum-likelihood EM for the basic and covariate models,
//!   and the pooled latent-class fit.
//! * [`mlogit`]: weighted multinomial logit solvers for the latent process.
//! * [`threestep`]: the three-step estimator and its iterated refinement.
//! * [`simulate`] and [`montecarlo`]: scenario presets, data generators,
//!   label alignment and bias/se/rmse summaries.
//! * [`report`] and [`bootstrap`]: score tables, averaged probability tables
//!   and nonparametric bootstrap standard errors.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. IO, parallel execution and the command line live in the `lmest`
//! companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bootstrap;
pub mod em;
pub mod error;
mod linalg;
pub(crate) mod math;
pub mod mlogit;
pub mod model;
pub mod montecarlo;
pub mod panel;
pub mod params;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod threestep;

pub use em::{FitOptions, FitResult, LCFit, LoglikKind};
pub use error::{Error, Result};
pub use model::{PosteriorMoments, StateMarginals};
pub use panel::{CovariatePanel, ResponsePanel, MISSING};
pub use params::{
    CovariateLatentParams, Gamma, GammaLayout, LatentChainParams, LatentParams,
    MeasurementParams, ModelParams, PROB_FLOOR,
};
pub use threestep::ThreeStepOptions;
