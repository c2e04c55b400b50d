//! Scenario presets, data generators and label alignment.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::{ln, sqrt};
use crate::model::UnitChain;
use crate::panel::{CovariatePanel, ResponsePanel};
use crate::params::{
    CovariateLatentParams, Gamma, GammaLayout, LatentChainParams, LatentParams, MeasurementParams, ModelParams,
};
use crate::rng::{child_seed, rng_from, Rng};

/// Autoregressive coefficient of the simulated covariates.
pub const AR_COEF: f64 = 0.5;
/// Innovation variance of the simulated covariates.
pub const AR_NOISE_VAR: f64 = 1.0;
/// Largest k for which exhaustive alignment is attempted.
pub const MAX_ALIGN_K: usize = 6;

pub const PRESETS: &[&str] = &[
    "basic-s1",
    "basic-s2",
    "basic-s3",
    "basic-s4",
    "cov-s1",
    "cov-s2",
    "cov-s3",
    "cov-s4",
    "basic-s1-n1000",
    "basic-s1-t8",
    "basic-s1-n1000-t8",
];

/// Covariate generation settings; `q1` and `q2` columns are the first
/// columns of `max(q1, q2)` shared AR(1) series.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariateSpec {
    pub q1: usize,
    pub q2: usize,
    pub ar: f64,
    pub noise_var: f64,
}

impl CovariateSpec {
    pub fn series(&self) -> usize {
        self.q1.max(self.q2)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub t: usize,
    pub k: usize,
    pub truth: ModelParams,
    pub covariates: Option<CovariateSpec>,
}

impl Scenario {
    pub fn r(&self) -> usize {
        self.truth.meas.items()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 {
            return Err(Error::usage("scenario needs n >= 1 and T >= 1"));
        }
        self.truth.validate()?;
        if self.truth.k() != self.k {
            return Err(Error::usage("scenario k does not match its parameters"));
        }
        match (&self.truth.latent, &self.covariates) {
            (LatentParams::Basic(_), None) => Ok(()),
            (LatentParams::Covariate(c), Some(s)) if c.q1 == s.q1 && c.q2 == s.q2 => {
                if !(s.noise_var >= 0.0) || !s.ar.is_finite() {
                    return Err(Error::usage("covariate process settings must be finite"));
                }
                Ok(())
            }
            _ => Err(Error::usage("scenario covariate settings do not match its parameters")),
        }
    }

    /// Same scenario with `r` items, each with the first item's response table.
    pub fn with_items(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::usage("r must be at least 1"));
        }
        let meas = &self.truth.meas;
        let phi = vec![meas.phi[0].clone(); r];
        let cats = vec![meas.cats[0]; r];
        let mut out = self.clone();
        out.truth.meas = MeasurementParams::new(meas.k, cats, phi)?;
        Ok(out)
    }
}

fn binary_items(k: usize, r: usize, cols: &[(f64, f64)]) -> MeasurementParams {
    // Table rows are categories, columns states.
    let mut table = vec![0.0; 2 * k];
    for (u, &(p0, p1)) in cols.iter().enumerate() {
        table[u] = p0;
        table[k + u] = p1;
    }
    MeasurementParams::repeated(k, r, &table, 2).expect("preset tables are valid")
}

fn basic(name: &str, n: usize, t: usize, meas: MeasurementParams, pi: Vec<f64>, trans: Vec<f64>) -> Scenario {
    Scenario {
        name: name.to_string(),
        n,
        t,
        k: meas.k,
        truth: ModelParams {
            meas,
            latent: LatentParams::Basic(LatentChainParams { pi, trans }),
        },
        covariates: None,
    }
}

fn covariate(name: &str, meas: MeasurementParams, intercept: f64) -> Scenario {
    let k = meas.k;
    let (q1, q2) = (2, 2);
    let mut latent = CovariateLatentParams::zeros(k, q1, q2, GammaLayout::Pairwise);
    let slopes = [0.5, 1.0];
    for u in 1..k {
        latent.beta[(k - 1) + (u - 1)] = slopes[0];
        latent.beta[2 * (k - 1) + (u - 1)] = slopes[1];
    }
    if let Gamma::Pairwise { coef } = &mut latent.gamma {
        for u in 0..k {
            for v in 0..k {
                if u != v {
                    let base = (u * k + v) * (1 + q2);
                    coef[base] = intercept;
                    coef[base + 1] = slopes[0];
                    coef[base + 2] = slopes[1];
                }
            }
        }
    }
    Scenario {
        name: name.to_string(),
        n: 500,
        t: 5,
        k,
        truth: ModelParams {
            meas,
            latent: LatentParams::Covariate(latent),
        },
        covariates: Some(CovariateSpec {
            q1,
            q2,
            ar: AR_COEF,
            noise_var: AR_NOISE_VAR,
        }),
    }
}

/// A named preset, with `r = 5` items.
pub fn scenario_preset(name: &str) -> Result<Scenario> {
    let r = 5;
    let mild = [(0.7, 0.3), (0.3, 0.7)];
    let separated = [(0.9, 0.1), (0.1, 0.9)];
    let persistent = vec![0.9, 0.1, 0.1, 0.9];
    let half = vec![0.5, 0.5];
    let s = match name {
        "basic-s1" => basic(name, 500, 5, binary_items(2, r, &mild), half, persistent),
        "basic-s2" => basic(name, 500, 5, binary_items(2, r, &mild), half, vec![0.6, 0.4, 0.4, 0.6]),
        "basic-s3" => basic(name, 500, 5, binary_items(2, r, &separated), half, persistent),
        "basic-s4" => {
            let third = 1.0 / 3.0;
            basic(
                name,
                500,
                5,
                binary_items(3, r, &[(0.7, 0.3), (0.3, 0.7), (0.5, 0.5)]),
                vec![third; 3],
                vec![0.6, 0.2, 0.2, 0.2, 0.6, 0.2, 0.2, 0.2, 0.6],
            )
        }
        "basic-s1-n1000" => basic(name, 1000, 5, binary_items(2, r, &mild), half, persistent),
        "basic-s1-t8" => basic(name, 500, 8, binary_items(2, r, &mild), half, persistent),
        "basic-s1-n1000-t8" => basic(name, 1000, 8, binary_items(2, r, &mild), half, persistent),
        "cov-s1" => covariate(name, binary_items(2, r, &mild), ln(0.1 / 0.9)),
        "cov-s2" => covariate(name, binary_items(2, r, &mild), ln(0.4 / 0.6)),
        "cov-s3" => covariate(name, binary_items(2, r, &separated), ln(0.1 / 0.9)),
        "cov-s4" => covariate(name, binary_items(3, r, &[(0.9, 0.1), (0.1, 0.9), (0.5, 0.5)]), ln(0.4 / 0.6)),
        _ => {
            return Err(Error::Usage(alloc::format!(
                "unknown scenario '{}'; presets: {}",
                name,
                PRESETS.join(", ")
            )))
        }
    };
    Ok(s)
}

/// Independent AR(1) series per unit and column, started from the
/// stationary distribution; both designs use all `q` columns.
pub fn gen_covariates_ar1(n: usize, t: usize, q: usize, seed: u64) -> Result<CovariatePanel> {
    CovariatePanel::shared(n, t, q, ar1_series(n, t, q, AR_COEF, AR_NOISE_VAR, seed)?)
}

/// Unit-major `n x T x q` values.
fn ar1_series(n: usize, t: usize, q: usize, ar: f64, noise_var: f64, seed: u64) -> Result<Vec<f64>> {
    if !(ar.abs() < 1.0) {
        return Err(Error::usage("autoregressive coefficient must lie in (-1, 1)"));
    }
    let mut rng = rng_from(seed);
    let noise = Normal::new(0.0, sqrt(noise_var)).map_err(|_| Error::usage("invalid noise variance"))?;
    let stationary = Normal::new(0.0, sqrt(noise_var / (1.0 - ar * ar))).map_err(|_| Error::usage("invalid noise variance"))?;
    let mut series = vec![0.0; n * t * q];
    for i in 0..n {
        for c in 0..q {
            let mut x = stationary.sample(&mut rng);
            for occ in 0..t {
                if occ > 0 {
                    x = ar * x + noise.sample(&mut rng);
                }
                series[(i * t + occ) * q + c] = x;
            }
        }
    }
    Ok(series)
}

/// A simulated dataset with its true state paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub responses: ResponsePanel,
    pub covariates: Option<CovariatePanel>,
    /// `n x T` true states (0-based).
    pub states: Vec<usize>,
}

fn draw_categorical(rng: &mut Rng, probs: impl Iterator<Item = f64>) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if x < acc {
            return i;
        }
    }
    last
}

/// Draws covariates, state paths and responses for `scenario`.
pub fn gen_panel(scenario: &Scenario, seed: u64) -> Result<SimulatedData> {
    scenario.validate()?;
    let (n, t_len, k) = (scenario.n, scenario.t, scenario.k);
    let covs = match &scenario.covariates {
        None => None,
        Some(spec) => {
            let series = ar1_series(n, t_len, spec.series(), spec.ar, spec.noise_var, child_seed(seed, 0))?;
            Some(CovariatePanel::with_designs(
                n,
                t_len,
                spec.series(),
                series,
                (0..spec.q1).collect(),
                (0..spec.q2).collect(),
            )?)
        }
    };
    let meas = &scenario.truth.meas;
    let r = meas.items();
    let mut rng = rng_from(child_seed(seed, 1));
    let mut states = vec![0usize; n * t_len];
    let mut y = vec![0u16; n * t_len * r];
    for i in 0..n {
        let chain = UnitChain::from_latent(&scenario.truth.latent, covs.as_ref(), i, t_len)?;
        let mut u = draw_categorical(&mut rng, chain.initial.iter().copied());
        for occ in 0..t_len {
            if occ > 0 {
                let p = chain.trans_at(occ);
                u = draw_categorical(&mut rng, p[u * k..(u + 1) * k].iter().copied());
            }
            states[i * t_len + occ] = u;
            for j in 0..r {
                let c = meas.cats[j];
                let col = (0..c).map(|yy| meas.phi[j][yy * k + u]);
                y[(i * t_len + occ) * r + j] = draw_categorical(&mut rng, col) as u16;
            }
        }
    }
    Ok(SimulatedData {
        responses: ResponsePanel::new(n, t_len, meas.cats.clone(), y)?,
        covariates: covs,
        states,
    })
}

fn phi_distance(est: &MeasurementParams, truth: &MeasurementParams, perm: &[usize]) -> f64 {
    let k = truth.k;
    let mut d = 0.0;
    for (te, tt) in est.phi.iter().zip(&truth.phi) {
        let c = tt.len() / k;
        for y in 0..c {
            for u in 0..k {
                let diff = te[y * k + perm[u]] - tt[y * k + u];
                d += diff * diff;
            }
        }
    }
    d
}

/// Next permutation in lexicographic order; false after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Relabels `est` to best match `truth` on the response tables.
///
/// Returns the relabeled parameters and the permutation `perm`, where new
/// state `u` is `est`'s state `perm[u]`. Ties keep the lexicographically
/// first permutation, so an exact match returns the identity.
pub fn align_states(est: &ModelParams, truth: &ModelParams) -> Result<(ModelParams, Vec<usize>)> {
    let k = truth.k();
    if est.k() != k {
        return Err(Error::usage("cannot align fits with different k"));
    }
    if est.meas.cats != truth.meas.cats {
        return Err(Error::usage("cannot align fits over different items"));
    }
    if k > MAX_ALIGN_K {
        return Err(Error::usage(alloc::format!("alignment supports k <= {}", MAX_ALIGN_K)));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_d = phi_distance(&est.meas, &truth.meas, &perm);
    while next_permutation(&mut perm) {
        let d = phi_distance(&est.meas, &truth.meas, &perm);
        if d < best_d {
            best_d = d;
            best.copy_from_slice(&perm);
        }
    }
    Ok((est.permuted(&best), best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            let s = scenario_preset(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.r(), 5);
        }
        let err = scenario_preset("nope").unwrap_err();
        assert!(alloc::format!("{}", err).contains("basic-s1"));
    }

    #[test]
    fn basic_s1_values() {
        let s = scenario_preset("basic-s1").unwrap();
        assert_eq!((s.n, s.t, s.k), (500, 5, 2));
        let LatentParams::Basic(c) = &s.truth.latent else { panic!() };
        assert_eq!(c.trans, vec![0.9, 0.1, 0.1, 0.9]);
        assert_eq!(s.truth.meas.get(0, 1, 0), 0.3);
        assert_eq!(s.truth.meas.get(0, 1, 1), 0.7);
    }

    #[test]
    fn cov_s2_intercepts() {
        let s = scenario_preset("cov-s2").unwrap();
        let LatentParams::Covariate(c) = &s.truth.latent else { panic!() };
        let Gamma::Pairwise { coef } = &c.gamma else { panic!() };
        assert_eq!(coef[3], ln(0.4 / 0.6));
        assert_eq!(&coef[3..6], &[ln(0.4 / 0.6), 0.5, 1.0]);
        assert_eq!(c.beta, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn permutations_are_lexicographic() {
        let mut p = vec![0, 1, 2];
        let mut all = vec![p.clone()];
        while next_permutation(&mut p) {
            all.push(p.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 2, 1]);
        assert_eq!(all[5], vec![2, 1, 0]);
    }

    #[test]
    fn identity_chain_keeps_paths_constant() {
        let mut s = scenario_preset("basic-s1").unwrap();
        s.n = 50;
        s.truth.latent = LatentParams::Basic(LatentChainParams {
            pi: vec![0.5, 0.5],
            trans: vec![1.0, 0.0, 0.0, 1.0],
        });
        let d = gen_panel(&s, 3).unwrap();
        for i in 0..50 {
            let row = &d.states[i * 5..(i + 1) * 5];
            assert!(row.iter().all(|&u| u == row[0]));
        }
    }
}
