//! Three-step estimation: a pooled latent-class fit, posterior moments built
//! from it, and latent-process parameters fitted to those moments. The
//! improved variant iterates the last two steps with the response
//! probabilities frozen.

use alloc::vec;
use alloc::vec::Vec;

use crate::em::{fit_lc_pooled, update_chain, update_logits, FitOptions, FitResult, LCFit, LoglikKind};
use crate::error::{Error, Result};
use crate::math::exp;
use crate::model::{state_marginals, unit_log_emissions, PosteriorMoments, UnitChain};
use crate::panel::{CovariatePanel, ResponsePanel};
use crate::params::{CovariateLatentParams, GammaLayout, LatentChainParams, LatentParams, MeasurementParams, ModelParams};

/// Columns closer than this in every entry count as identical.
const UNINFORMATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ThreeStepOptions {
    pub improved: bool,
    pub imp_max_iter: usize,
    /// Max-abs change of the latent parameters that ends the iteration.
    pub imp_tol: f64,
    pub lc_opts: FitOptions,
}

impl Default for ThreeStepOptions {
    fn default() -> Self {
        Self {
            improved: false,
            imp_max_iter: 200,
            imp_tol: 1e-6,
            lc_opts: FitOptions::default(),
        }
    }
}

impl ThreeStepOptions {
    pub fn validate(&self) -> Result<()> {
        if self.imp_max_iter == 0 {
            return Err(Error::usage("imp_max_iter must be at least 1"));
        }
        if !(self.imp_tol > 0.0) {
            return Err(Error::usage("imp_tol must be positive"));
        }
        self.lc_opts.validate()
    }
}

fn check_meas(meas: &MeasurementParams, panel: &ResponsePanel) -> Result<()> {
    if meas.cats != panel.cats() {
        return Err(Error::usage("response tables do not match the panel's items"));
    }
    Ok(())
}

/// Normalizes `w` in place; false when the total is not positive.
fn normalize(w: &mut [f64]) -> bool {
    let s: f64 = w.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return false;
    }
    for x in w.iter_mut() {
        *x /= s;
    }
    true
}

/// Emissions of unit `i` scaled by their per-occasion maximum (`T x k`).
fn scaled_emissions(log_phi: &[Vec<f64>], k: usize, panel: &ResponsePanel, i: usize, out: &mut [f64]) {
    unit_log_emissions(log_phi, k, panel, i, out);
    for row in out.chunks_mut(k) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for x in row.iter_mut() {
            *x = if m == f64::NEG_INFINITY { 0.0 } else { exp(*x - m) };
        }
    }
}

/// Step 2: `b` proportional to class weight times emission at each
/// (unit, occasion), and `bb` the outer product of consecutive `b` vectors.
pub fn step2_moments(lc: &LCFit, panel: &ResponsePanel) -> Result<PosteriorMoments> {
    check_meas(&lc.phi, panel)?;
    let k = lc.phi.k;
    if lc.rho.len() != k {
        return Err(Error::usage("class weights do not match k"));
    }
    let t_len = panel.occasions();
    let log_phi = lc.phi.log_table();
    let mut mom = PosteriorMoments::zeros(panel.n(), t_len, k);
    let mut e = vec![0.0; t_len * k];
    for i in 0..panel.n() {
        scaled_emissions(&log_phi, k, panel, i, &mut e);
        let (b, bb) = mom.unit_slices_mut(i);
        for t in 0..t_len {
            let row = &mut b[t * k..(t + 1) * k];
            for u in 0..k {
                row[u] = lc.rho[u] * e[t * k + u];
            }
            if !normalize(row) {
                return Err(Error::DegeneratePosterior { unit: i, occasion: t });
            }
        }
        for t in 1..t_len {
            let block = &mut bb[(t - 1) * k * k..t * k * k];
            for u in 0..k {
                for v in 0..k {
                    block[u * k + v] = b[(t - 1) * k + u] * b[t * k + v];
                }
            }
        }
    }
    Ok(mom)
}

/// Step 3 without covariates. The flag reports a row (or the initial
/// vector) that received no mass and fell back to uniform.
pub fn step3_basic(moments: &PosteriorMoments) -> (LatentChainParams, bool) {
    update_chain(moments, None)
}

/// Step 3 with covariates: weighted logits for the initial and transition
/// models, warm-started at `start` when given.
pub fn step3_cov(
    moments: &PosteriorMoments,
    covs: &CovariatePanel,
    layout: GammaLayout,
    start: Option<&CovariateLatentParams>,
) -> Result<CovariateLatentParams> {
    if covs.n() != moments.n || covs.occasions() != moments.t {
        return Err(Error::usage("covariate panel does not match the moments"));
    }
    let zeros;
    let prev = match start {
        Some(p) => {
            if p.k != moments.k || p.q1 != covs.q1() || p.q2 != covs.q2() || p.gamma.layout() != layout {
                return Err(Error::usage("starting coefficients do not match the problem"));
            }
            p
        }
        None => {
            zeros = CovariateLatentParams::zeros(moments.k, covs.q1(), covs.q2(), layout);
            &zeros
        }
    };
    update_logits(moments, Some(covs), prev)
}

fn uninformative(meas: &MeasurementParams) -> bool {
    let k = meas.k;
    if k < 2 {
        return false;
    }
    meas.phi.iter().zip(&meas.cats).all(|(table, &c)| {
        (0..c).all(|y| {
            let row = &table[y * k..(y + 1) * k];
            row.iter().all(|&p| (p - row[0]).abs() < UNINFORMATIVE_TOL)
        })
    })
}

/// Plain three-step fit.
pub fn fit_3s(
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    k: usize,
    layout: GammaLayout,
    opts: &ThreeStepOptions,
) -> Result<FitResult> {
    opts.validate()?;
    if panel.occasions() < 2 {
        return Err(Error::usage(
            "transitions are not identifiable with a single occasion; fit the pooled latent-class model instead",
        ));
    }
    if let Some(c) = covs {
        c.check_matches(panel)?;
    }
    let lc = fit_lc_pooled(panel, k, &opts.lc_opts)?;
    let mom = step2_moments(&lc, panel)?;
    let (latent, empty_rows) = match covs {
        None => {
            let (chain, empty) = step3_basic(&mom);
            (LatentParams::Basic(chain), empty)
        }
        Some(c) => (LatentParams::Covariate(step3_cov(&mom, c, layout, None)?), false),
    };
    Ok(FitResult {
        degenerate: lc.degenerate || empty_rows || uninformative(&lc.phi),
        params: ModelParams { meas: lc.phi, latent },
        loglik: lc.loglik,
        loglik_kind: LoglikKind::PooledLc,
        iterations: lc.iterations,
        converged: lc.converged,
        start_logliks: lc.start_logliks,
        trace: lc.trace,
        cycles: None,
        state_collapse: lc.state_collapse,
    })
}

/// Iterated three-step fit, started from the plain three-step solution.
pub fn fit_3s_imp(
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    k: usize,
    layout: GammaLayout,
    opts: &ThreeStepOptions,
) -> Result<FitResult> {
    let base = fit_3s(panel, covs, k, layout, opts)?;
    fit_3s_imp_from(&base, panel, covs, opts)
}

/// Either estimator, as selected by `opts.improved`.
pub fn fit_three_step(
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    k: usize,
    layout: GammaLayout,
    opts: &ThreeStepOptions,
) -> Result<FitResult> {
    if opts.improved {
        fit_3s_imp(panel, covs, k, layout, opts)
    } else {
        fit_3s(panel, covs, k, layout, opts)
    }
}

/// Improved moments under the current latent parameters, with the response
/// tables held fixed.
///
/// `b` at occasion `t` is proportional to the marginal state probability at
/// `t` times the emission. The pair weight for `(u, v)` is `b` of `u` at
/// `t - 1` times the posterior of moving to `v` given origin `u` and the
/// occasion-`t` responses, so each origin row carries exactly its `b` mass.
pub fn improved_moments(
    meas: &MeasurementParams,
    latent: &LatentParams,
    covs: Option<&CovariatePanel>,
    panel: &ResponsePanel,
) -> Result<PosteriorMoments> {
    check_meas(meas, panel)?;
    let k = meas.k;
    if latent.k() != k {
        return Err(Error::usage("latent and measurement blocks disagree on k"));
    }
    let t_len = panel.occasions();
    let log_phi = meas.log_table();
    let mut mom = PosteriorMoments::zeros(panel.n(), t_len, k);
    let mut e = vec![0.0; t_len * k];
    for i in 0..panel.n() {
        scaled_emissions(&log_phi, k, panel, i, &mut e);
        let chain = UnitChain::from_latent(latent, covs, i, t_len)?;
        let lambda = state_marginals(&chain, t_len);
        let (b, bb) = mom.unit_slices_mut(i);
        for t in 0..t_len {
            let lt = lambda.at(t);
            let row = &mut b[t * k..(t + 1) * k];
            for u in 0..k {
                row[u] = lt[u] * e[t * k + u];
            }
            if !normalize(row) {
                return Err(Error::DegeneratePosterior { unit: i, occasion: t });
            }
        }
        for t in 1..t_len {
            let p = chain.trans_at(t);
            let block = &mut bb[(t - 1) * k * k..t * k * k];
            // Previous-occasion weight times the transition posterior given the origin state.
            for u in 0..k {
                let row = &mut block[u * k..(u + 1) * k];
                for v in 0..k {
                    row[v] = p[u * k + v] * e[t * k + v];
                }
                let s: f64 = row.iter().sum();
                let w = b[(t - 1) * k + u];
                if s > 0.0 {
                    for x in row.iter_mut() {
                        *x *= w / s;
                    }
                } else if w > 0.0 {
                    return Err(Error::DegeneratePosterior { unit: i, occasion: t });
                } else {
                    row.fill(0.0);
                }
            }
        }
    }
    Ok(mom)
}

fn max_abs_change(a: &LatentParams, b: &LatentParams) -> f64 {
    a.flat()
        .iter()
        .zip(b.flat().iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs the improvement cycles from an existing plain three-step fit.
pub fn fit_3s_imp_from(
    base: &FitResult,
    panel: &ResponsePanel,
    covs: Option<&CovariatePanel>,
    opts: &ThreeStepOptions,
) -> Result<FitResult> {
    opts.validate()?;
    let meas = &base.params.meas;
    let mut latent = base.params.latent.clone();
    let mut converged = false;
    let mut empty_rows = false;
    let mut cycles = 0;
    while cycles < opts.imp_max_iter {
        cycles += 1;
        let mom = improved_moments(meas, &latent, covs, panel)?;
        let next = match &latent {
            LatentParams::Basic(_) => {
                let (chain, empty) = step3_basic(&mom);
                empty_rows |= empty;
                LatentParams::Basic(chain)
            }
            LatentParams::Covariate(prev) => {
                let c = covs.ok_or_else(|| Error::usage("covariate fit needs its covariate panel"))?;
                LatentParams::Covariate(step3_cov(&mom, c, prev.gamma.layout(), Some(prev))?)
            }
        };
        let change = max_abs_change(&latent, &next);
        latent = next;
        if change < opts.imp_tol {
            converged = true;
            break;
        }
    }
    let mut out = base.clone();
    out.params.latent = latent;
    out.converged = base.converged && converged;
    out.cycles = Some(cycles);
    out.degenerate |= empty_rows;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lc(phi_u2: f64, rho: Vec<f64>) -> LCFit {
        LCFit {
            phi: MeasurementParams::new(2, vec![2], vec![vec![1.0 - 0.3, 1.0 - phi_u2, 0.3, phi_u2]]).unwrap(),
            rho,
            loglik: 0.0,
            iterations: vec![],
            converged: true,
            start_logliks: vec![],
            trace: vec![],
            state_collapse: false,
            degenerate: false,
        }
    }

    #[test]
    fn hand_evaluated_posterior() {
        let panel = ResponsePanel::new(1, 1, vec![2], vec![1]).unwrap();
        let m = step2_moments(&lc(0.7, vec![0.5, 0.5]), &panel).unwrap();
        assert!((m.b(0, 0)[0] - 0.3).abs() < 1e-15);
        assert!((m.b(0, 0)[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uninformative_tables_give_class_weights() {
        let panel = ResponsePanel::new(2, 3, vec![2], vec![0, 1, 1, 0, 0, 1]).unwrap();
        let m = step2_moments(&lc(0.3, vec![0.25, 0.75]), &panel).unwrap();
        for i in 0..2 {
            for t in 0..3 {
                assert!((m.b(i, t)[0] - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_prior_puts_all_mass_on_first_state() {
        let panel = ResponsePanel::new(1, 2, vec![2], vec![0, 1]).unwrap();
        let m = step2_moments(&lc(0.7, vec![1.0, 0.0]), &panel).unwrap();
        assert_eq!(m.b(0, 1), &[1.0, 0.0]);
        assert_eq!(m.bb(0, 1), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_normalizer_is_reported() {
        let panel = ResponsePanel::new(1, 2, vec![2], vec![0, 1]).unwrap();
        let err = step2_moments(&lc(0.7, vec![0.0, 0.0]), &panel).unwrap_err();
        assert_eq!(err, Error::DegeneratePosterior { unit: 0, occasion: 0 });
    }

    #[test]
    fn step3_constant_and_diagonal_moments() {
        let mut m = PosteriorMoments::zeros(3, 2, 2);
        for i in 0..3 {
            let (b, bb) = m.unit_slices_mut(i);
            b.copy_from_slice(&[0.5, 0.5, 0.5, 0.5]);
            bb.copy_from_slice(&[0.5, 0.0, 0.0, 0.5]);
        }
        let (chain, empty) = step3_basic(&m);
        assert!(!empty);
        assert_eq!(chain.pi, vec![0.5, 0.5]);
        assert_eq!(chain.trans, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_row_falls_back_to_uniform() {
        let mut m = PosteriorMoments::zeros(1, 2, 2);
        let (b, bb) = m.unit_slices_mut(0);
        b.copy_from_slice(&[1.0, 0.0, 1.0, 0.0]);
        bb.copy_from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let (chain, empty) = step3_basic(&m);
        assert!(empty);
        assert_eq!(&chain.trans[2..], &[0.5, 0.5]);
    }

    #[test]
    fn options_are_validated() {
        let o = ThreeStepOptions {
            imp_tol: 0.0,
            ..ThreeStepOptions::default()
        };
        assert!(o.validate().is_err());
    }
}
