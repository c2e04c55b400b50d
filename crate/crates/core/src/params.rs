//! Parameter blocks of the latent Markov model.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Lower clamp for conditional response probabilities after every M-step.
pub const PROB_FLOOR: f64 = 1e-10;

const SUM_TOL: f64 = 1e-10;

/// Conditional response probabilities: one `cats[j] x k` column-stochastic
/// table per item, stored row-major (`phi[j][y * k + u]`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementParams {
    pub k: usize,
    pub cats: Vec<usize>,
    pub phi: Vec<Vec<f64>>,
}

impl MeasurementParams {
    pub fn new(k: usize, cats: Vec<usize>, phi: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { k, cats, phi };
        m.validate()?;
        Ok(m)
    }

    /// Same table for every item, given as `cats x k` rows.
    pub fn repeated(k: usize, r: usize, table: &[f64], cats: usize) -> Result<Self> {
        Self::new(k, vec![cats; r], vec![table.to_vec(); r])
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if self.phi.len() != self.cats.len() {
            return Err(Error::usage("one phi table per item required"));
        }
        for (j, (table, &c)) in self.phi.iter().zip(&self.cats).enumerate() {
            if table.len() != c * self.k {
                return Err(Error::usage(format!("phi table {} has wrong size", j + 1)));
            }
            if table.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::usage(format!("phi table {} has entries outside [0,1]", j + 1)));
            }
            for u in 0..self.k {
                let s: f64 = (0..c).map(|y| table[y * self.k + u]).sum();
                if (s - 1.0).abs() > SUM_TOL {
                    return Err(Error::usage(format!(
                        "phi column {} of item {} sums to {}",
                        u + 1,
                        j + 1,
                        s
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn items(&self) -> usize {
        self.cats.len()
    }

    #[inline]
    pub fn get(&self, j: usize, y: usize, u: usize) -> f64 {
        self.phi[j][y * self.k + u]
    }

    /// Natural logs of every entry, same layout as `phi`.
    pub fn log_table(&self) -> Vec<Vec<f64>> {
        self.phi
            .iter()
            .map(|t| t.iter().map(|&p| crate::math::ln(p)).collect())
            .collect()
    }

    /// Clamps entries to `[PROB_FLOOR, 1 - PROB_FLOOR]` and renormalizes columns.
    pub fn apply_floor(&mut self) {
        let k = self.k;
        for (table, &c) in self.phi.iter_mut().zip(&self.cats) {
            for u in 0..k {
                let mut s = 0.0;
                for y in 0..c {
                    let p = &mut table[y * k + u];
                    *p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                    s += *p;
                }
                for y in 0..c {
                    table[y * k + u] /= s;
                }
            }
        }
    }

    /// Relabels states: new state `u` is old state `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k;
        let phi = self
            .phi
            .iter()
            .zip(&self.cats)
            .map(|(t, &c)| {
                let mut out = vec![0.0; c * k];
                for y in 0..c {
                    for u in 0..k {
                        out[y * k + u] = t[y * k + perm[u]];
                    }
                }
                out
            })
            .collect();
        Self {
            k,
            cats: self.cats.clone(),
            phi,
        }
    }
}

/// Initial vector and transition matrix of a homogeneous chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatentChainParams {
    pub pi: Vec<f64>,
    /// Row-major `k x k`, rows sum to one.
    pub trans: Vec<f64>,
}

impl LatentChainParams {
    pub fn new(pi: Vec<f64>, trans: Vec<f64>) -> Result<Self> {
        let c = Self { pi, trans };
        c.validate()?;
        Ok(c)
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.pi.len();
        if k == 0 || self.trans.len() != k * k {
            return Err(Error::usage("chain parameters have inconsistent sizes"));
        }
        if self.pi.iter().chain(&self.trans).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::usage("chain probabilities outside [0,1]"));
        }
        if (self.pi.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(Error::usage("initial probabilities do not sum to 1"));
        }
        for u in 0..k {
            if (self.trans[u * k..(u + 1) * k].iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
                return Err(Error::usage(format!("transition row {} does not sum to 1", u + 1)));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn trans_at(&self, u: usize, v: usize) -> f64 {
        self.trans[u * self.k() + v]
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k();
        let pi = perm.iter().map(|&p| self.pi[p]).collect();
        let mut trans = vec![0.0; k * k];
        for u in 0..k {
            for v in 0..k {
                trans[u * k + v] = self.trans[perm[u] * k + perm[v]];
            }
        }
        Self { pi, trans }
    }
}

/// Parameterization of the transition logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GammaLayout {
    /// Independent intercept and slopes for every ordered pair `u != v`.
    #[default]
    Pairwise,
    /// Pair intercepts plus per-state slopes entering as `g_u - g_v`, with `g_1 = 0`.
    Difference,
}

/// Transition logit coefficients.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Gamma {
    /// `coef[(u * k + v) * (1 + q2) + c]`: `c = 0` intercept, `c >= 1` slope on
    /// covariate `c`. Diagonal blocks are unused and kept at zero.
    Pairwise { coef: Vec<f64> },
    /// `intercepts[u * k + v]` (diagonal zero) and `slopes[(u - 1) * q2 + c]`
    /// for states `u = 2..k`.
    Difference { intercepts: Vec<f64>, slopes: Vec<f64> },
}

impl Gamma {
    pub fn zeros(layout: GammaLayout, k: usize, q2: usize) -> Self {
        match layout {
            GammaLayout::Pairwise => Gamma::Pairwise {
                coef: vec![0.0; k * k * (1 + q2)],
            },
            GammaLayout::Difference => Gamma::Difference {
                intercepts: vec![0.0; k * k],
                slopes: vec![0.0; k.saturating_sub(1) * q2],
            },
        }
    }

    pub fn layout(&self) -> GammaLayout {
        match self {
            Gamma::Pairwise { .. } => GammaLayout::Pairwise,
            Gamma::Difference { .. } => GammaLayout::Difference,
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        let (a, b): (&[f64], &[f64]) = match self {
            Gamma::Pairwise { coef } => (coef, &[]),
            Gamma::Difference { intercepts, slopes } => (intercepts, slopes),
        };
        a.iter().chain(b)
    }
}

/// Multinomial logit coefficients of the covariate-dependent chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariateLatentParams {
    pub k: usize,
    pub q1: usize,
    pub q2: usize,
    /// `(1 + q1) x (k - 1)` row-major: `beta[c * (k - 1) + (u - 1)]` for state `u >= 2`.
    pub beta: Vec<f64>,
    pub gamma: Gamma,
}

impl CovariateLatentParams {
    pub fn zeros(k: usize, q1: usize, q2: usize, layout: GammaLayout) -> Self {
        Self {
            k,
            q1,
            q2,
            beta: vec![0.0; (1 + q1) * k.saturating_sub(1)],
            gamma: Gamma::zeros(layout, k, q2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if self.beta.len() != (1 + self.q1) * (k - 1) {
            return Err(Error::usage("beta has wrong size"));
        }
        let ok = match &self.gamma {
            Gamma::Pairwise { coef } => coef.len() == k * k * (1 + self.q2),
            Gamma::Difference { intercepts, slopes } => {
                intercepts.len() == k * k && slopes.len() == (k - 1) * self.q2
            }
        };
        if !ok {
            return Err(Error::usage("gamma has wrong size"));
        }
        if self.beta.iter().chain(self.gamma.values()).any(|v| !v.is_finite()) {
            return Err(Error::usage("non-finite logit coefficient"));
        }
        Ok(())
    }

    #[inline]
    pub fn beta_at(&self, c: usize, u: usize) -> f64 {
        self.beta[c * (self.k - 1) + (u - 1)]
    }

    /// Relabels states, re-expressing coefficients against the fixed
    /// reference categories (state 1 initially, self-transition for rows).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k;
        let p1 = 1 + self.q1;
        // Full initial coefficient table with state 1 at zero, then shift to the new reference.
        let full_beta = |c: usize, u: usize| if u == 0 { 0.0 } else { self.beta_at(c, u) };
        let mut beta = vec![0.0; p1 * (k - 1)];
        for c in 0..p1 {
            let base = full_beta(c, perm[0]);
            for u in 1..k {
                beta[c * (k - 1) + (u - 1)] = full_beta(c, perm[u]) - base;
            }
        }
        let gamma = match &self.gamma {
            Gamma::Pairwise { coef } => {
                let p2 = 1 + self.q2;
                let mut out = vec![0.0; coef.len()];
                for u in 0..k {
                    for v in 0..k {
                        if u == v {
                            continue;
                        }
                        let src = (perm[u] * k + perm[v]) * p2;
                        let dst = (u * k + v) * p2;
                        out[dst..dst + p2].copy_from_slice(&coef[src..src + p2]);
                    }
                }
                Gamma::Pairwise { coef: out }
            }
            Gamma::Difference { intercepts, slopes } => {
                let q2 = self.q2;
                let mut ints = vec![0.0; k * k];
                for u in 0..k {
                    for v in 0..k {
                        ints[u * k + v] = intercepts[perm[u] * k + perm[v]];
                    }
                }
                let full = |u: usize, c: usize| if u == 0 { 0.0 } else { slopes[(u - 1) * q2 + c] };
                let mut sl = vec![0.0; slopes.len()];
                for u in 1..k {
                    for c in 0..q2 {
                        sl[(u - 1) * q2 + c] = full(perm[u], c) - full(perm[0], c);
                    }
                }
                Gamma::Difference {
                    intercepts: ints,
                    slopes: sl,
                }
            }
        };
        Self {
            k,
            q1: self.q1,
            q2: self.q2,
            beta,
            gamma,
        }
    }
}

/// Latent-process block: plain probabilities or covariate logits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LatentParams {
    Basic(LatentChainParams),
    Covariate(CovariateLatentParams),
}

impl LatentParams {
    pub fn k(&self) -> usize {
        match self {
            LatentParams::Basic(c) => c.k(),
            LatentParams::Covariate(c) => c.k,
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        match self {
            LatentParams::Basic(c) => LatentParams::Basic(c.permuted(perm)),
            LatentParams::Covariate(c) => LatentParams::Covariate(c.permuted(perm)),
        }
    }

    /// Flat list of free values, used for convergence checks.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            LatentParams::Basic(c) => c.pi.iter().chain(&c.trans).copied().collect(),
            LatentParams::Covariate(c) => c.beta.iter().chain(c.gamma.values()).copied().collect(),
        }
    }
}

/// Full parameter set: measurement block plus latent block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub meas: MeasurementParams,
    pub latent: LatentParams,
}

impl ModelParams {
    pub fn k(&self) -> usize {
        self.meas.k
    }

    pub fn validate(&self) -> Result<()> {
        self.meas.validate()?;
        if self.latent.k() != self.meas.k {
            return Err(Error::usage("measurement and latent blocks disagree on k"));
        }
        match &self.latent {
            LatentParams::Basic(c) => c.validate(),
            LatentParams::Covariate(c) => c.validate(),
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            meas: self.meas.permuted(perm),
            latent: self.latent.permuted(perm),
        }
    }

    /// Every parameter with a stable, 1-based name.
    ///
    /// Names: `phi_j_y_u` (category `y` 0-based), `pi_u`, `trans_u_v`,
    /// `beta_c_u` (`c = 0` intercept), `gamma_u_v_c` (pairwise),
    /// `gamma0_u_v` and `gamma1_u_c` (difference).
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let k = self.k();
        let mut out = Vec::new();
        for (j, (t, &c)) in self.meas.phi.iter().zip(&self.meas.cats).enumerate() {
            for y in 0..c {
                for u in 0..k {
                    out.push((format!("phi_{}_{}_{}", j + 1, y, u + 1), t[y * k + u]));
                }
            }
        }
        match &self.latent {
            LatentParams::Basic(ch) => {
                for u in 0..k {
                    out.push((format!("pi_{}", u + 1), ch.pi[u]));
                }
                for u in 0..k {
                    for v in 0..k {
                        out.push((format!("trans_{}_{}", u + 1, v + 1), ch.trans_at(u, v)));
                    }
                }
            }
            LatentParams::Covariate(cv) => {
                for u in 1..k {
                    for c in 0..=cv.q1 {
                        out.push((format!("beta_{}_{}", c, u + 1), cv.beta_at(c, u)));
                    }
                }
                match &cv.gamma {
                    Gamma::Pairwise { coef } => {
                        let p2 = 1 + cv.q2;
                        for u in 0..k {
                            for v in 0..k {
                                if u == v {
                                    continue;
                                }
                                for c in 0..p2 {
                                    out.push((
                                        format!("gamma_{}_{}_{}", u + 1, v + 1, c),
                                        coef[(u * k + v) * p2 + c],
                                    ));
                                }
                            }
                        }
                    }
                    Gamma::Difference { intercepts, slopes } => {
                        for u in 0..k {
                            for v in 0..k {
                                if u != v {
                                    out.push((format!("gamma0_{}_{}", u + 1, v + 1), intercepts[u * k + v]));
                                }
                            }
                        }
                        for u in 1..k {
                            for c in 0..cv.q2 {
                                out.push((format!("gamma1_{}_{}", u + 1, c + 1), slopes[(u - 1) * cv.q2 + c]));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
