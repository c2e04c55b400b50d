//! Emission probabilities, covariate links, state marginals and the scaled
//! forward-backward recursions.

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, softmax_in_place};
use crate::panel::{CovariatePanel, ResponsePanel, MISSING};
use crate::params::{CovariateLatentParams, Gamma, LatentChainParams, LatentParams, MeasurementParams};

/// Probability of the observed responses of unit `i` at occasion `t` given state `u`.
///
/// Missing items are skipped; an occasion with no observed item has emission 1.
pub fn emission_prob(
    meas: &MeasurementParams,
    panel: &ResponsePanel,
    i: usize,
    t: usize,
    u: usize,
) -> Result<f64> {
    panel.check_index(i, t)?;
    if u >= meas.k {
        return Err(Error::usage(alloc::format!("state {} out of range (k = {})", u, meas.k)));
    }
    if meas.items() != panel.items() {
        return Err(Error::usage("measurement block and panel disagree on item count"));
    }
    Ok((0..panel.items())
        .filter_map(|j| panel.get(i, t, j).map(|y| meas.get(j, y, u)))
        .product())
}

/// Writes `ln P(y_it | U_t = u)` for every occasion and state of unit `i` into `out` (`T x k`).
pub(crate) fn unit_log_emissions(log_phi: &[Vec<f64>], k: usize, panel: &ResponsePanel, i: usize, out: &mut [f64]) {
    for t in 0..panel.occasions() {
        let row = &mut out[t * k..(t + 1) * k];
        row.fill(0.0);
        for (j, &y) in panel.row(i, t).iter().enumerate() {
            if y == MISSING {
                continue;
            }
            let lp = &log_phi[j][y as usize * k..(y as usize + 1) * k];
            for (acc, &l) in row.iter_mut().zip(lp) {
                *acc += l;
            }
        }
    }
}

/// Initial-state probabilities at covariate vector `x1`; state 1 is the reference.
pub fn initial_probs(params: &CovariateLatentParams, x1: &[f64]) -> Result<Vec<f64>> {
    if x1.len() != params.q1 {
        return Err(Error::usage(alloc::format!(
            "initial design has length {} but q1 = {}",
            x1.len(),
            params.q1
        )));
    }
    let mut out = vec![0.0; params.k];
    initial_probs_into(params, x1, &mut out);
    Ok(out)
}

pub(crate) fn initial_probs_into(params: &CovariateLatentParams, x1: &[f64], out: &mut [f64]) {
    let k = params.k;
    out[0] = 0.0;
    for u in 1..k {
        let mut eta = params.beta_at(0, u);
        for (c, &x) in x1.iter().enumerate() {
            eta += x * params.beta_at(c + 1, u);
        }
        out[u] = eta;
    }
    softmax_in_place(out);
}

/// Transition matrix (row-major `k x k`) at covariate vector `x_t`; each row
/// uses the self-transition as reference.
pub fn transition_probs(params: &CovariateLatentParams, x_t: &[f64]) -> Result<Vec<f64>> {
    if x_t.len() != params.q2 {
        return Err(Error::usage(alloc::format!(
            "transition design has length {} but q2 = {}",
            x_t.len(),
            params.q2
        )));
    }
    let mut out = vec![0.0; params.k * params.k];
    transition_probs_into(params, x_t, &mut out);
    Ok(out)
}

pub(crate) fn transition_probs_into(params: &CovariateLatentParams, x: &[f64], out: &mut [f64]) {
    let k = params.k;
    match &params.gamma {
        Gamma::Pairwise { coef } => {
            let p2 = 1 + params.q2;
            for u in 0..k {
                let row = &mut out[u * k..(u + 1) * k];
                for v in 0..k {
                    row[v] = if u == v {
                        0.0
                    } else {
                        let g = &coef[(u * k + v) * p2..(u * k + v + 1) * p2];
                        g[0] + x.iter().zip(&g[1..]).map(|(a, b)| a * b).sum::<f64>()
                    };
                }
                softmax_in_place(row);
            }
        }
        Gamma::Difference { intercepts, slopes } => {
            let q2 = params.q2;
            let score = |u: usize| -> f64 {
                if u == 0 {
                    0.0
                } else {
                    x.iter().zip(&slopes[(u - 1) * q2..u * q2]).map(|(a, b)| a * b).sum()
                }
            };
            let scores: Vec<f64> = (0..k).map(score).collect();
            for u in 0..k {
                let row = &mut out[u * k..(u + 1) * k];
                for v in 0..k {
                    row[v] = if u == v {
                        0.0
                    } else {
                        intercepts[u * k + v] + scores[u] - scores[v]
                    };
                }
                softmax_in_place(row);
            }
        }
    }
}

/// Initial vector and transition matrices of one unit's chain.
#[derive(Debug, Clone)]
pub struct UnitChain<'a> {
    pub initial: Cow<'a, [f64]>,
    trans: Cow<'a, [f64]>,
    homogeneous: bool,
    k: usize,
}

impl<'a> UnitChain<'a> {
    /// Homogeneous chain borrowing the basic parameters.
    pub fn homogeneous(chain: &'a LatentChainParams) -> Self {
        Self {
            initial: Cow::Borrowed(&chain.pi),
            trans: Cow::Borrowed(&chain.trans),
            homogeneous: true,
            k: chain.k(),
        }
    }

    /// Chain of unit `i` under covariate logits; `covs` may be omitted when q1 = q2 = 0.
    pub fn for_unit(params: &CovariateLatentParams, covs: Option<&CovariatePanel>, i: usize, t_len: usize) -> Result<Self> {
        let k = params.k;
        let mut initial = vec![0.0; k];
        match covs {
            Some(c) => {
                if c.q1() != params.q1 || c.q2() != params.q2 {
                    return Err(Error::usage("covariate designs do not match coefficient dimensions"));
                }
                initial_probs_into(params, c.x_init(i), &mut initial);
                let mut trans = vec![0.0; t_len.saturating_sub(1) * k * k];
                for t in 1..t_len {
                    transition_probs_into(params, c.x_trans(i, t), &mut trans[(t - 1) * k * k..t * k * k]);
                }
                Ok(Self {
                    initial: Cow::Owned(initial),
                    trans: Cow::Owned(trans),
                    homogeneous: false,
                    k,
                })
            }
            None => {
                if params.q1 != 0 || params.q2 != 0 {
                    return Err(Error::usage("covariate model needs a covariate panel"));
                }
                initial_probs_into(params, &[], &mut initial);
                let mut trans = vec![0.0; k * k];
                transition_probs_into(params, &[], &mut trans);
                Ok(Self {
                    initial: Cow::Owned(initial),
                    trans: Cow::Owned(trans),
                    homogeneous: true,
                    k,
                })
            }
        }
    }

    /// Chain of unit `i` for either kind of latent block.
    pub fn from_latent(latent: &'a LatentParams, covs: Option<&CovariatePanel>, i: usize, t_len: usize) -> Result<Self> {
        match latent {
            LatentParams::Basic(c) => Ok(Self::homogeneous(c)),
            LatentParams::Covariate(c) => Self::for_unit(c, covs, i, t_len),
        }
    }

    /// Transition matrix into occasion `t` (0-based, `t >= 1`).
    #[inline]
    pub fn trans_at(&self, t: usize) -> &[f64] {
        let kk = self.k * self.k;
        if self.homogeneous {
            &self.trans
        } else {
            &self.trans[(t - 1) * kk..t * kk]
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Marginal state distribution at each occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMarginals {
    pub k: usize,
    /// Row-major `T x k`.
    pub lambda: Vec<f64>,
}

impl StateMarginals {
    pub fn at(&self, t: usize) -> &[f64] {
        &self.lambda[t * self.k..(t + 1) * self.k]
    }

    pub fn occasions(&self) -> usize {
        self.lambda.len() / self.k
    }
}

/// Propagates the initial distribution through the chain for `t_len` occasions.
pub fn state_marginals(chain: &UnitChain<'_>, t_len: usize) -> StateMarginals {
    let k = chain.k();
    let mut lambda = vec![0.0; t_len * k];
    lambda[..k].copy_from_slice(&chain.initial);
    for t in 1..t_len {
        let p = chain.trans_at(t);
        let (prev, cur) = lambda.split_at_mut(t * k);
        let prev = &prev[(t - 1) * k..];
        for v in 0..k {
            cur[v] = (0..k).map(|u| prev[u] * p[u * k + v]).sum();
        }
    }
    StateMarginals { k, lambda }
}

/// Posterior moments for one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPosterior {
    /// `T x k`: `P(U_t = u | y_i)`.
    pub b: Vec<f64>,
    /// `(T - 1) x k x k`: `P(U_{t-1} = u, U_t = v | y_i)`.
    pub bb: Vec<f64>,
    pub loglik: f64,
}

/// Expected state and transition indicators for every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub n: usize,
    pub t: usize,
    pub k: usize,
    pub b: Vec<f64>,
    pub bb: Vec<f64>,
    /// Total log-likelihood for exact posteriors; `None` for three-step approximations.
    pub loglik: Option<f64>,
}

impl PosteriorMoments {
    pub fn zeros(n: usize, t: usize, k: usize) -> Self {
        Self {
            n,
            t,
            k,
            b: vec![0.0; n * t * k],
            bb: vec![0.0; n * t.saturating_sub(1) * k * k],
            loglik: None,
        }
    }

    #[inline]
    pub fn b(&self, i: usize, t: usize) -> &[f64] {
        let off = (i * self.t + t) * self.k;
        &self.b[off..off + self.k]
    }

    /// Pairwise moments for the transition into occasion `t` (`t >= 1`).
    #[inline]
    pub fn bb(&self, i: usize, t: usize) -> &[f64] {
        let kk = self.k * self.k;
        let off = (i * (self.t - 1) + t - 1) * kk;
        &self.bb[off..off + kk]
    }

    pub(crate) fn unit_slices_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        let tk = self.t * self.k;
        let tkk = (self.t - 1) * self.k * self.k;
        (
            &mut self.b[i * tk..(i + 1) * tk],
            &mut self.bb[i * tkk..(i + 1) * tkk],
        )
    }
}

/// Scaled forward-backward pass over precomputed log emissions (`T x k`).
///
/// Emissions are shifted by their per-occasion maximum before exponentiation
/// and forward variables are renormalized at every occasion; the returned
/// log-likelihood adds both offsets back.
pub(crate) fn forward_backward_kernel(
    log_e: &[f64],
    chain: &UnitChain<'_>,
    unit: usize,
    b: &mut [f64],
    bb: &mut [f64],
) -> Result<f64> {
    let k = chain.k();
    let t_len = log_e.len() / k;
    let mut e = vec![0.0; t_len * k];
    let mut loglik = 0.0;
    for t in 0..t_len {
        let row = &log_e[t * k..(t + 1) * k];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY || m.is_nan() {
            return Err(Error::DegenerateLikelihood { unit, occasion: t });
        }
        loglik += m;
        for u in 0..k {
            e[t * k + u] = exp(row[u] - m);
        }
    }

    let mut alpha = vec![0.0; t_len * k];
    let mut scale = vec![0.0; t_len];
    for t in 0..t_len {
        let et = &e[t * k..(t + 1) * k];
        let (prev, cur) = alpha.split_at_mut(t * k);
        let cur = &mut cur[..k];
        if t == 0 {
            for u in 0..k {
                cur[u] = chain.initial[u] * et[u];
            }
        } else {
            let p = chain.trans_at(t);
            let prev = &prev[(t - 1) * k..];
            for v in 0..k {
                let mut s = 0.0;
                for u in 0..k {
                    s += prev[u] * p[u * k + v];
                }
                cur[v] = s * et[v];
            }
        }
        let c: f64 = cur.iter().sum();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::DegenerateLikelihood { unit, occasion: t });
        }
        for a in cur.iter_mut() {
            *a /= c;
        }
        scale[t] = c;
        loglik += ln(c);
    }

    let mut beta = vec![1.0; t_len * k];
    for t in (0..t_len.saturating_sub(1)).rev() {
        let p = chain.trans_at(t + 1);
        let (cur, next) = beta.split_at_mut((t + 1) * k);
        let cur = &mut cur[t * k..];
        let next = &next[..k];
        let en = &e[(t + 1) * k..(t + 2) * k];
        for u in 0..k {
            let mut s = 0.0;
            for v in 0..k {
                s += p[u * k + v] * en[v] * next[v];
            }
            cur[u] = s / scale[t + 1];
        }
    }

    for t in 0..t_len {
        let row = &mut b[t * k..(t + 1) * k];
        let mut s = 0.0;
        for u in 0..k {
            row[u] = alpha[t * k + u] * beta[t * k + u];
            s += row[u];
        }
        for x in row.iter_mut() {
            *x /= s;
        }
    }
    for t in 1..t_len {
        let p = chain.trans_at(t);
        let block = &mut bb[(t - 1) * k * k..t * k * k];
        let mut s = 0.0;
        for u in 0..k {
            let a = alpha[(t - 1) * k + u];
            for v in 0..k {
                let x = a * p[u * k + v] * e[t * k + v] * beta[t * k + v];
                block[u * k + v] = x;
                s += x;
            }
        }
        for x in block.iter_mut() {
            *x /= s;
        }
    }
    if !loglik.is_finite() {
        return Err(Error::Numerical(alloc::format!("non-finite log-likelihood for unit {}", unit)));
    }
    Ok(loglik)
}

/// Exact posterior moments and `ln p(y_i | x_i)` for unit `i`.
pub fn forward_backward(
    meas: &MeasurementParams,
    latent: &LatentParams,
    covs: Option<&CovariatePanel>,
    panel: &ResponsePanel,
    i: usize,
) -> Result<UnitPosterior> {
    panel.check_index(i, 0)?;
    check_dims(meas, latent, panel)?;
    let k = meas.k;
    let t_len = panel.occasions();
    let log_phi = meas.log_table();
    let mut log_e = vec![0.0; t_len * k];
    unit_log_emissions(&log_phi, k, panel, i, &mut log_e);
    let chain = UnitChain::from_latent(latent, covs, i, t_len)?;
    let mut b = vec![0.0; t_len * k];
    let mut bb = vec![0.0; t_len.saturating_sub(1) * k * k];
    let loglik = forward_backward_kernel(&log_e, &chain, i, &mut b, &mut bb)?;
    Ok(UnitPosterior { b, bb, loglik })
}

/// Exact posterior moments for every unit (the E-step).
pub fn e_step(
    meas: &MeasurementParams,
    latent: &LatentParams,
    covs: Option<&CovariatePanel>,
    panel: &ResponsePanel,
) -> Result<PosteriorMoments> {
    check_dims(meas, latent, panel)?;
    if let Some(c) = covs {
        c.check_matches(panel)?;
    }
    let k = meas.k;
    let t_len = panel.occasions();
    let log_phi = meas.log_table();
    let mut mom = PosteriorMoments::zeros(panel.n(), t_len, k);
    let mut log_e = vec![0.0; t_len * k];
    let mut total = 0.0;
    for i in 0..panel.n() {
        unit_log_emissions(&log_phi, k, panel, i, &mut log_e);
        let chain = UnitChain::from_latent(latent, covs, i, t_len)?;
        let (b, bb) = mom.unit_slices_mut(i);
        total += forward_backward_kernel(&log_e, &chain, i, b, bb)?;
    }
    mom.loglik = Some(total);
    Ok(mom)
}

fn check_dims(meas: &MeasurementParams, latent: &LatentParams, panel: &ResponsePanel) -> Result<()> {
    if meas.cats != panel.cats() {
        return Err(Error::usage("measurement block does not match the panel's items"));
    }
    if latent.k() != meas.k {
        return Err(Error::usage("latent and measurement blocks disagree on k"));
    }
    Ok(())
}
