//! Full-maximum-likelihood EM for the basic and covariate latent Markov
//! models, and the pooled latent-class fit used as the first step of the
//! three-step estimator.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{exp, ln};
use crate::mlogit::{fit_transition_difference, fit_transition_pairwise, fit_weighted_mlogit, TransitionData, WeightedLogitProblem};
use crate::model::{e_step, PosteriorMoments};
use crate::panel::{CovariatePanel, ResponsePanel};
use crate::params::{
    CovariateLatentParams, Gamma, GammaLayout, LatentChainParams, LatentParams, MeasurementParams, ModelParams,
};
use crate::rng::{child_seed, rng_from};

/// Posterior mass below which a state counts as collapsed.
const COLLAPSE_MASS: f64 = 1e-8;

/// EM controls shared by every fitter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop when `|l_{m+1} - l_m| / (|l_m| + 1) < rel_tol`.
    pub rel_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Scale of the random-start perturbations; 0 gives identical starts.
    pub perturbation: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            rel_tol: 1e-8,
            n_starts: 10,
            seed: 0,
            perturbation: 1.0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::usage("max_iter must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::usage("rel_tol must be positive"));
        }
        if self.n_starts == 0 {
            return Err(Error::usage("n_starts must be at least 1"));
        }
        if !(self.perturbation >= 0.0) || !self.perturbation.is_finite() {
            return Err(Error::usage("perturbation must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// What `FitResult::loglik` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LoglikKind {
    /// The model log-likelihood `sum_i ln p(y_i | x_i)`.
    Full,
    /// The pooled latent-class log-likelihood of the first step.
    PooledLc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub loglik: f64,
    pub loglik_kind: LoglikKind,
    /// EM iterations (M-steps) per start.
    pub iterations: Vec<usize>,
    pub converged: bool,
    pub start_logliks: Vec<f64>,
    /// Log-likelihood after each E-step of the selected start.
    pub trace: Vec<f64>,
    /// Step-2/3 cycles of the iterated three-step estimator.
    pub cycles: Option<usize>,
    /// Some state received (almost) no posterior mass.
    pub state_collapse: bool,
    /// Degenerate latent estimates (uninformative data, empty rows, too many classes).
    pub degenerate: bool,
}

/// Pooled latent-class fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LCFit {
    pub phi: MeasurementParams,
    /// Marginal class probabilities.
    pub rho: Vec<f64>,
    pub loglik: f64,
    pub iterations: Vec<usize>,
    pub converged: bool,
    pub start_logliks: Vec<f64>,
    pub trace: Vec<f64>,
    pub state_collapse: bool,
    /// `k` exceeds the number of distinct response patterns.
    pub degenerate: bool,
}

/// Shape of the latent block to draw a start for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSpec {
    Basic,
    Covariate { q1: usize, q2: usize, layout: GammaLayout },
}

/// Outcome of EM from one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartRun {
    pub params: ModelParams,
    pub loglik: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub state_collapse: bool,
}

/// Per-item category frequencies over all non-missing entries (uniform for
/// an item that is never observed).
pub fn empirical_frequencies(panel: &ResponsePanel) -> Vec<Vec<f64>> {
    let mut counts: Vec<Vec<f64>> = panel.cats().iter().map(|&c| vec![0.0; c]).collect();
    for i in 0..panel.n() {
        for t in 0..panel.occasions() {
            for (j, c) in counts.iter_mut().enumerate() {
                if let Some(y) = panel.get(i, t, j) {
                    c[y] += 1.0;
                }
            }
        }
    }
    for c in counts.iter_mut() {
        let s: f64 = c.iter().sum();
        let len = c.len() as f64;
        for x in c.iter_mut() {
            *x = if s > 0.0 { *x / s } else { 1.0 / len };
        }
    }
    counts
}

/// Random starting values, deterministic in `seed`.
///
/// Response tables are the pooled frequencies times log-normal noise of scale
/// `perturbation`; the initial vector is uniform plus uniform noise; the
/// transition matrix puts weight `k` on the diagonal and 1 elsewhere before
/// noise; logit coefficients are centred normal with sd `0.1 * perturbation`.
pub fn random_start(k: usize, panel: &ResponsePanel, spec: LatentSpec, seed: u64, perturbation: f64) -> Result<ModelParams> {
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    let freqs = empirical_frequencies(panel);
    let mut rng = rng_from(seed);
    let s = if k == 1 { 0.0 } else { perturbation };
    let normal = |rng: &mut crate::rng::Rng| -> f64 { StandardNormal.sample(rng) };

    let mut phi = Vec::with_capacity(freqs.len());
    for f in &freqs {
        let c = f.len();
        let mut table = vec![0.0; c * k];
        for u in 0..k {
            let mut tot = 0.0;
            for y in 0..c {
                let z = if s > 0.0 { normal(&mut rng) } else { 0.0 };
                let v = f[y].max(1e-6) * exp(s * z);
                table[y * k + u] = v;
                tot += v;
            }
            for y in 0..c {
                table[y * k + u] /= tot;
            }
        }
        phi.push(table);
    }
    let mut meas = MeasurementParams {
        k,
        cats: panel.cats().to_vec(),
        phi,
    };
    meas.apply_floor();

    let latent = match spec {
        LatentSpec::Basic => {
            let mut pi: Vec<f64> = (0..k).map(|_| 1.0 + s * rng.random::<f64>()).collect();
            normalize(&mut pi);
            let mut trans = vec![0.0; k * k];
            for u in 0..k {
                let row = &mut trans[u * k..(u + 1) * k];
                for (v, x) in row.iter_mut().enumerate() {
                    let base = if u == v { k as f64 } else { 1.0 };
                    *x = base * (1.0 + s * rng.random::<f64>());
                }
                normalize(row);
            }
            LatentParams::Basic(LatentChainParams { pi, trans })
        }
        LatentSpec::Covariate { q1, q2, layout } => {
            let mut p = CovariateLatentParams::zeros(k, q1, q2, layout);
            let sd = 0.1 * s;
            for b in p.beta.iter_mut() {
                *b = sd * normal(&mut rng);
            }
            match &mut p.gamma {
                Gamma::Pairwise { coef } => {
                    for u in 0..k {
                        for v in 0..k {
                            if u != v {
                                for x in &mut coef[(u * k + v) * (1 + q2)..(u * k + v + 1) * (1 + q2)] {
                                    *x = sd * normal(&mut rng);
                                }
                            }
                        }
                    }
                }
                Gamma::Difference { intercepts, slopes } => {
                    for u in 0..k {
                        for v in 0..k {
                            if u != v {
                                intercepts[u * k + v] = sd * normal(&mut rng);
                            }
                        }
                    }
                    for x in slopes.iter_mut() {
                        *x = sd * normal(&mut rng);
                    }
                }
            }
            LatentParams::Covariate(p)
        }
    };
    Ok(ModelParams { meas, latent })
}

fn normalize(xs: &mut [f64]) {
    let s: f64 = xs.iter().sum();
    for x in xs.iter_mut() {
        *x /= s;
    }
}

/// Closed-form measurement update: `phi_{jy|u}` proportional to the posterior
/// mass of state `u` on entries with response `y`. Columns without any mass
/// keep their previous values; the probability floor is applied afterwards.
pub(crate) fn update_measurement(prev: &MeasurementParams, panel: &ResponsePanel, mom: &PosteriorMoments) -> MeasurementParams {
    let k = prev.k;
    let mut counts: Vec<Vec<f64>> = prev.cats.iter().map(|&c| vec![0.0; c * k]).collect();
    for i in 0..panel.n() {
        for t in 0..panel.occasions() {
            let b = mom.b(i, t);
            for (j, &y) in panel.row(i, t).iter().enumerate() {
                if y == crate::panel::MISSING {
                    continue;
                }
                let cell = &mut counts[j][y as usize * k..(y as usize + 1) * k];
                for u in 0..k {
                    cell[u] += b[u];
                }
            }
        }
    }
    for (j, table) in counts.iter_mut().enumerate() {
        let c = prev.cats[j];
        for u in 0..k {
            let tot: f64 = (0..c).map(|y| table[y * k + u]).sum();
            for y in 0..c {
                table[y * k + u] = if tot > 0.0 {
                    table[y * k + u] / tot
                } else {
                    prev.phi[j][y * k + u]
                };
            }
        }
    }
    let mut meas = MeasurementParams {
        k,
        cats: prev.cats.clone(),
        phi: counts,
    };
    meas.apply_floor();
    meas
}

/// Closed-form chain update from posterior moments. Empty transition rows
/// keep `prev`'s row (or become uniform when `prev` is `None`); returns whether
/// any row was empty.
pub(crate) fn update_chain(mom: &PosteriorMoments, prev: Option<&LatentChainParams>) -> (LatentChainParams, bool) {
    let k = mom.k;
    let mut pi = vec![0.0; k];
    for i in 0..mom.n {
        for (acc, b) in pi.iter_mut().zip(mom.b(i, 0)) {
            *acc += b;
        }
    }
    let mut trans = vec![0.0; k * k];
    for i in 0..mom.n {
        for t in 1..mom.t {
            for (acc, x) in trans.iter_mut().zip(mom.bb(i, t)) {
                *acc += x;
            }
        }
    }
    let mut empty = false;
    let ptot: f64 = pi.iter().sum();
    if ptot > 0.0 {
        normalize(&mut pi);
    } else {
        empty = true;
        pi = prev.map_or_else(|| vec![1.0 / k as f64; k], |p| p.pi.clone());
    }
    for u in 0..k {
        let row = &mut trans[u * k..(u + 1) * k];
        let tot: f64 = row.iter().sum();
        if tot > 0.0 {
            normalize(row);
        } else {
            empty = true;
            match prev {
                Some(p) => row.copy_from_slice(&p.trans[u * k..(u + 1) * k]),
                None => row.fill(1.0 / k as f64),
            }
        }
    }
    (LatentChainParams { pi, trans }, empty)
}

fn collapsed(mom: &PosteriorMoments) -> bool {
    let k = mom.k;
    let mut mass = vec![0.0; k];
    for chunk in mom.b.chunks(k) {
        for (m, b) in mass.iter_mut().zip(chunk) {
            *m += b;
        }
    }
    mass.iter().any(|&m| m < COLLAPSE_MASS)
}

fn rel_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / (prev.abs() + 1.0)
}

/// Transition logit data from posterior pair moments.
pub(crate) fn transition_data(mom: &PosteriorMoments, covs: Option<&CovariatePanel>, q2: usize) -> TransitionData {
    let k = mom.k;
    let mut design = Vec::with_capacity(mom.n * mom.t.saturating_sub(1) * q2);
    let mut weights = Vec::with_capacity(mom.n * mom.t.saturating_sub(1) * k * k);
    for i in 0..mom.n {
        for t in 1..mom.t {
            if let Some(c) = covs {
                design.extend_from_slice(c.x_trans(i, t));
            }
            weights.extend_from_slice(mom.bb(i, t));
        }
    }
    TransitionData { k, q: q2, design, weights }
}

/// Initial-probability logit data from first-occasion moments.
pub(crate) fn initial_problem(mom: &PosteriorMoments, covs: Option<&CovariatePanel>, q1: usize) -> WeightedLogitProblem {
    let k = mom.k;
    let mut design = Vec::with_capacity(mom.n * q1);
    let mut weights = Vec::with_capacity(mom.n * k);
    for i in 0..mom.n {
        if let Some(c) = covs {
            design.extend_from_slice(c.x_init(i));
        }
        weights.extend_from_slice(mom.b(i, 0));
    }
    WeightedLogitProblem {
        k,
        q: q1,
        design,
        weights,
        ref_class: 0,
    }
}

/// Maximizes the latent part of the expected complete-data log-likelihood
/// over logit coefficients, warm-started at `prev`.
pub(crate) fn update_logits(
    mom: &PosteriorMoments,
    covs: Option<&CovariatePanel>,
    prev: &CovariateLatentParams,
) -> Result<CovariateLatentParams> {
    let mut out = prev.clone();
    if prev.k < 2 {
        return Ok(out);
    }
    let init = initial_problem(mom, covs, prev.q1);
    out.beta = fit_weighted_mlogit(&init, Some(&prev.beta))?.coef;
    if mom.t > 1 {
        let data = transition_data(mom, covs, prev.q2);
        out.gamma = match prev.gamma {
            Gamma::Pairwise { .. } => fit_transition_pairwise(&data, Some(&prev.gamma))?.gamma,
            Gamma::Difference { .. } => fit_transition_difference(&data, Some(&prev.gamma))?.gamma,
        };
    }
    Ok(out)
}

/// EM for the basic model from a given start.
///
/// With `update_transitions = false` the chain's transition matrix is held
/// fixed.
pub fn em_basic_from(panel: &ResponsePanel, start: ModelParams, opts: &FitOptions, update_transitions: bool) -> Result<StartRun> {
    opts.validate()?;
    let LatentParams::Basic(_) = &start.latent else {
        return Err(Error::usage("basic EM needs a basic latent block"));
    };
    let mut params = start;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut collapse;
    loop {
        let mom = e_step(&params.meas, &params.latent, None, panel)?;
        let ll = mom.loglik.unwrap_or(f64::NAN);
        if !ll.is_finite() {
            return Err(Error::Numerical(alloc::format!("non-finite log-likelihood at EM iteration {}", iterations)));
        }
        collapse = collapsed(&mom);
        if let Some(&prev) = trace.last() {
            if rel_change(prev, ll) < opts.rel_tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iterations == opts.max_iter {
            break;
        }
        let LatentParams::Basic(chain) = &params.latent else { unreachable!() };
        let meas = update_measurement(&params.meas, panel, &mom);
        let (mut new_chain, _) = update_chain(&mom, Some(chain));
        if !update_transitions {
            new_chain.trans = chain.trans.clone();
        }
        params = ModelParams {
            meas,
            latent: LatentParams::Basic(new_chain),
        };
        iterations += 1;
    }
    Ok(StartRun {
        loglik: *trace.last().expect("at least one E-step"),
        params,
        trace,
        iterations,
        converged,
        state_collapse: collapse,
    })
}

/// EM for the covariate model from a given start.
pub fn em_cov_from(panel: &ResponsePanel, covs: &CovariatePanel, start: ModelParams, opts: &FitOptions) -> Result<StartRun> {
    opts.validate()?;
    covs.check_matches(panel)?;
    let LatentParams::Covariate(_) = &start.latent else {
        return Err(Error::usage("covariate EM needs a covariate latent block"));
    };
    let mut params = start;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut collapse;
    loop {
        let mom = e_step(&params.meas, &params.latent, Some(covs), panel)?;
        let ll = mom.loglik.unwrap_or(f64::NAN);
        if !ll.is_finite() {
            return Err(Error::Numerical(alloc::format!("non-finite log-likelihood at EM iteration {}", iterations)));
        }
        collapse = collapsed(&mom);
        if let Some(&prev) = trace.last() {
            if rel_change(prev, ll) < opts.rel_tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iterations == opts.max_iter {
            break;
        }
        let LatentParams::Covariate(cov) = &params.latent else { unreachable!() };
        let meas = update_measurement(&params.meas, panel, &mom);
        let latent = update_logits(&mom, Some(covs), cov).map_err(|e| Error::MStep {
            iteration: iterations + 1,
            source: Box::new(e),
        })?;
        params = ModelParams {
            meas,
            latent: LatentParams::Covariate(latent),
        };
        iterations += 1;
    }
    Ok(StartRun {
        loglik: *trace.last().expect("at least one E-step"),
        params,
        trace,
        iterations,
        converged,
        state_collapse: collapse,
    })
}

/// EM for the latent-class model on single-occasion rows from a given start.
///
/// Each E-step accumulates the measurement counts directly, so no posterior
/// table is stored. The returned chain carries the class weights as `pi` and
/// an identity transition matrix.
pub fn em_lc_from(panel: &ResponsePanel, start: MeasurementParams, rho: Vec<f64>, opts: &FitOptions) -> Result<StartRun> {
    opts.validate()?;
    if panel.occasions() != 1 {
        return Err(Error::usage("latent-class EM expects single-occasion rows; pool the panel first"));
    }
    let k = start.k;
    if rho.len() != k || start.cats != panel.cats() {
        return Err(Error::usage("latent-class start does not match the data"));
    }
    // Offsets of every observed cell into the flattened tables, fixed for the whole run.
    let mut item_off = Vec::with_capacity(start.cats.len());
    let mut width = 0;
    for &c in &start.cats {
        item_off.push(width);
        width += c * k;
    }
    let mut cells: Vec<usize> = Vec::new();
    let mut row_end = Vec::with_capacity(panel.n());
    for i in 0..panel.n() {
        for (j, &y) in panel.row(i, 0).iter().enumerate() {
            if y != crate::panel::MISSING {
                cells.push(item_off[j] + y as usize * k);
            }
        }
        row_end.push(cells.len());
    }
    let mut meas = start;
    let mut rho = rho;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut collapse;
    let mut post = vec![0.0; k];
    let mut log_phi = vec![0.0; width];
    let mut counts = vec![0.0; width];
    loop {
        for (j, t) in meas.phi.iter().enumerate() {
            for (d, &p) in log_phi[item_off[j]..].iter_mut().zip(t) {
                *d = ln(p);
            }
        }
        let log_rho: Vec<f64> = rho.iter().map(|&r| ln(r)).collect();
        counts.fill(0.0);
        let mut mass = vec![0.0; k];
        let mut ll = 0.0;
        let mut begin = 0;
        for (i, &end) in row_end.iter().enumerate() {
            let row = &cells[begin..end];
            begin = end;
            post.copy_from_slice(&log_rho);
            for &c in row {
                for (p, l) in post.iter_mut().zip(&log_phi[c..c + k]) {
                    *p += l;
                }
            }
            let m = post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY || m.is_nan() {
                return Err(Error::DegenerateLikelihood { unit: i, occasion: 0 });
            }
            let mut tot = 0.0;
            for p in post.iter_mut() {
                *p = exp(*p - m);
                tot += *p;
            }
            ll += m + ln(tot);
            for (u, p) in post.iter_mut().enumerate() {
                *p /= tot;
                mass[u] += *p;
            }
            for &c in row {
                for (a, p) in counts[c..c + k].iter_mut().zip(&post) {
                    *a += p;
                }
            }
        }
        if !ll.is_finite() {
            return Err(Error::Numerical(alloc::format!("non-finite log-likelihood at EM iteration {}", iterations)));
        }
        collapse = mass.iter().any(|&x| x < COLLAPSE_MASS);
        if let Some(&prev) = trace.last() {
            if rel_change(prev, ll) < opts.rel_tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iterations == opts.max_iter {
            break;
        }
        for (j, table) in meas.phi.iter_mut().enumerate() {
            let c = meas.cats[j];
            let acc = &counts[item_off[j]..item_off[j] + c * k];
            for u in 0..k {
                let t: f64 = (0..c).map(|y| acc[y * k + u]).sum();
                if t > 0.0 {
                    for y in 0..c {
                        table[y * k + u] = acc[y * k + u] / t;
                    }
                }
            }
        }
        meas.apply_floor();
        let total: f64 = mass.iter().sum();
        rho = mass.iter().map(|&x| x / total).collect();
        iterations += 1;
    }
    let mut trans = vec![0.0; k * k];
    for u in 0..k {
        trans[u * k + u] = 1.0;
    }
    Ok(StartRun {
        loglik: *trace.last().expect("at least one E-step"),
        params: ModelParams {
            meas,
            latent: LatentParams::Basic(LatentChainParams { pi: rho, trans }),
        },
        trace,
        iterations,
        converged,
        state_collapse: collapse,
    })
}

struct MultiStart {
    best: StartRun,
    iterations: Vec<usize>,
    start_logliks: Vec<f64>,
}

fn multi_start(opts: &FitOptions, mut run: impl FnMut(u64) -> Result<StartRun>) -> Result<MultiStart> {
    opts.validate()?;
    let mut best: Option<StartRun> = None;
    let mut iterations = Vec::with_capacity(opts.n_starts);
    let mut start_logliks = Vec::with_capacity(opts.n_starts);
    for s in 0..opts.n_starts {
        let r = run(child_seed(opts.seed, s as u64))?;
        iterations.push(r.iterations);
        start_logliks.push(r.loglik);
        // Strict comparison: ties go to the lowest start index.
        if best.as_ref().is_none_or(|b| r.loglik > b.loglik) {
            best = Some(r);
        }
    }
    Ok(MultiStart {
        best: best.expect("n_starts >= 1"),
        iterations,
        start_logliks,
    })
}

fn distinct_patterns(panel: &ResponsePanel) -> usize {
    let mut set = BTreeSet::new();
    for i in 0..panel.n() {
        for t in 0..panel.occasions() {
            set.insert(panel.row(i, t));
        }
    }
    set.len()
}

/// Pooled latent-class fit: every (unit, occasion) row is an independent observation.
pub fn fit_lc_pooled(panel: &ResponsePanel, k: usize, opts: &FitOptions) -> Result<LCFit> {
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    let pooled = panel.pooled();
    let ms = multi_start(opts, |seed| {
        let start = random_start(k, &pooled, LatentSpec::Basic, seed, opts.perturbation)?;
        let LatentParams::Basic(chain) = start.latent else { unreachable!() };
        em_lc_from(&pooled, start.meas, chain.pi, opts)
    })?;
    let LatentParams::Basic(chain) = ms.best.params.latent else { unreachable!() };
    Ok(LCFit {
        phi: ms.best.params.meas,
        rho: chain.pi,
        loglik: ms.best.loglik,
        iterations: ms.iterations,
        converged: ms.best.converged,
        start_logliks: ms.start_logliks,
        trace: ms.best.trace,
        state_collapse: ms.best.state_collapse,
        degenerate: k > distinct_patterns(panel),
    })
}

/// Full-maximum-likelihood fit of the basic model (best of `n_starts` EM runs).
pub fn fit_basic_lm_fml(panel: &ResponsePanel, k: usize, opts: &FitOptions) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    if panel.occasions() < 2 {
        return Err(Error::usage(
            "transitions are not identifiable with a single occasion; fit the pooled latent-class model instead",
        ));
    }
    let ms = multi_start(opts, |seed| {
        let start = random_start(k, panel, LatentSpec::Basic, seed, opts.perturbation)?;
        em_basic_from(panel, start, opts, true)
    })?;
    Ok(FitResult {
        degenerate: k > distinct_patterns(panel),
        params: ms.best.params,
        loglik: ms.best.loglik,
        loglik_kind: LoglikKind::Full,
        iterations: ms.iterations,
        converged: ms.best.converged,
        start_logliks: ms.start_logliks,
        trace: ms.best.trace,
        cycles: None,
        state_collapse: ms.best.state_collapse,
    })
}

/// Full-maximum-likelihood fit of the covariate model.
pub fn fit_cov_lm_fml(
    panel: &ResponsePanel,
    covs: &CovariatePanel,
    k: usize,
    layout: GammaLayout,
    opts: &FitOptions,
) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    if panel.occasions() < 2 {
        return Err(Error::usage(
            "transitions are not identifiable with a single occasion; fit the pooled latent-class model instead",
        ));
    }
    covs.check_matches(panel)?;
    let spec = LatentSpec::Covariate {
        q1: covs.q1(),
        q2: covs.q2(),
        layout,
    };
    let ms = multi_start(opts, |seed| {
        let start = random_start(k, panel, spec, seed, opts.perturbation)?;
        em_cov_from(panel, covs, start, opts)
    })?;
    Ok(FitResult {
        degenerate: k > distinct_patterns(panel),
        params: ms.best.params,
        loglik: ms.best.loglik,
        loglik_kind: LoglikKind::Full,
        iterations: ms.iterations,
        converged: ms.best.converged,
        start_logliks: ms.start_logliks,
        trace: ms.best.trace,
        cycles: None,
        state_collapse: ms.best.state_collapse,
    })
}
