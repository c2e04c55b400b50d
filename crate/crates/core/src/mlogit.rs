//! Weighted multinomial logit solvers for the latent-process regressions.
//!
//! Every problem here maximizes `sum_o sum_c w_oc ln p_c(x_o; theta)` where
//! `p` is a softmax of predictors that are linear in `theta`. The objective is
//! concave in `theta` for all three parameterizations, so a Newton iteration
//! with step-halving reaches the global maximum from any finite start.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::math::{exp, ln};
use crate::params::Gamma;

/// Coefficient magnitude treated as divergence (separation).
pub const DIVERGENCE_LIMIT: f64 = 30.0;
/// Ridge added to a singular negative Hessian before giving up.
pub const RIDGE: f64 = 1e-8;
/// Gradient max-norm at which Newton stops for the separable problems.
pub const GRAD_TOL: f64 = 1e-8;
/// Gradient max-norm at which the difference-layout fit stops.
pub const GRAD_TOL_DIFFERENCE: f64 = 1e-6;

const MAX_NEWTON_ITER: usize = 200;
const MAX_HALVINGS: usize = 60;

/// One weighted multinomial logit: per-observation covariates (intercept
/// added internally) and per-observation class weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLogitProblem {
    pub k: usize,
    pub q: usize,
    /// Row-major `n_obs x q`.
    pub design: Vec<f64>,
    /// Row-major `n_obs x k`, nonnegative.
    pub weights: Vec<f64>,
    pub ref_class: usize,
}

/// Fitted coefficients in `(1 + q) x (k - 1)` row-major layout; column `m`
/// belongs to the `m`-th non-reference class in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub coef: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl WeightedLogitProblem {
    pub fn n_obs(&self) -> usize {
        self.weights.len() / self.k.max(1)
    }

    pub fn n_params(&self) -> usize {
        (1 + self.q) * (self.k - 1)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::usage("a logit needs at least 2 classes"));
        }
        if self.ref_class >= self.k {
            return Err(Error::usage("reference class out of range"));
        }
        let n = self.n_obs();
        if self.weights.len() != n * self.k || self.design.len() != n * self.q {
            return Err(Error::usage("design and weights disagree on observation count"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::usage("weights must be finite and nonnegative"));
        }
        if !self.weights.chunks(self.k).any(|w| w.iter().sum::<f64>() > 0.0) {
            return Err(Error::usage("no observation has positive weight"));
        }
        if self.design.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("non-finite covariate"));
        }
        Ok(())
    }

    fn build(&self) -> SoftmaxDesign {
        let k = self.k;
        let q = self.q;
        let km1 = k - 1;
        let mut d = SoftmaxDesign::new(k, (1 + q) * km1);
        for o in 0..self.n_obs() {
            let x = &self.design[o * q..(o + 1) * q];
            d.push_obs(&self.weights[o * k..(o + 1) * k], 0, |c, terms| {
                if c == self.ref_class {
                    return;
                }
                let col = if c < self.ref_class { c } else { c - 1 };
                terms.push((col as u32, 1.0));
                for (l, &xv) in x.iter().enumerate() {
                    terms.push((((l + 1) * km1 + col) as u32, xv));
                }
            });
        }
        d
    }

    /// Weighted log-likelihood and its gradient at `coef`.
    pub fn objective(&self, coef: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.validate()?;
        if coef.len() != self.n_params() {
            return Err(Error::usage("coefficient vector has wrong length"));
        }
        let d = self.build();
        let (f, g) = d.value_grad(coef);
        Ok((f, g))
    }
}

/// Maximizes the weighted multinomial log-likelihood by Newton iterations.
pub fn fit_weighted_mlogit(problem: &WeightedLogitProblem, start: Option<&[f64]>) -> Result<LogitFit> {
    problem.validate()?;
    let design = problem.build();
    design.check_separation(None)?;
    let theta = match start {
        Some(s) if s.len() == problem.n_params() => s.to_vec(),
        Some(_) => return Err(Error::usage("start vector has wrong length")),
        None => vec![0.0; problem.n_params()],
    };
    design.newton(theta, GRAD_TOL, None)
}

/// Pairwise transition data: one observation per (unit, occasion `t >= 2`)
/// with its `k x k` block of expected transition indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionData {
    pub k: usize,
    pub q: usize,
    /// Row-major `n_obs x q`.
    pub design: Vec<f64>,
    /// Row-major `n_obs x k x k`.
    pub weights: Vec<f64>,
}

/// Fitted transition coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFit {
    pub gamma: Gamma,
    pub loglik: f64,
    pub iterations: usize,
}

impl TransitionData {
    pub fn n_obs(&self) -> usize {
        self.weights.len() / (self.k * self.k).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::usage("transition logits need at least 2 states"));
        }
        let n = self.n_obs();
        if self.weights.len() != n * self.k * self.k || self.design.len() != n * self.q {
            return Err(Error::usage("design and weights disagree on observation count"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::usage("weights must be finite and nonnegative"));
        }
        if self.design.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("non-finite covariate"));
        }
        Ok(())
    }

    /// The logit problem of origin state `u` (self-transition as reference).
    pub fn row_problem(&self, u: usize) -> WeightedLogitProblem {
        let k = self.k;
        let n = self.n_obs();
        let mut weights = Vec::with_capacity(n * k);
        for o in 0..n {
            let base = o * k * k + u * k;
            weights.extend_from_slice(&self.weights[base..base + k]);
        }
        WeightedLogitProblem {
            k,
            q: self.q,
            design: self.design.clone(),
            weights,
            ref_class: u,
        }
    }

    fn row_total(&self, u: usize) -> f64 {
        let k = self.k;
        (0..self.n_obs())
            .map(|o| self.weights[o * k * k + u * k..o * k * k + (u + 1) * k].iter().sum::<f64>())
            .sum()
    }

    /// Design over all origins for either layout, in compact parameter order.
    fn build(&self, layout_difference: bool) -> SoftmaxDesign {
        let k = self.k;
        let q = self.q;
        let km1 = k - 1;
        let n_params = if layout_difference {
            k * km1 + km1 * q
        } else {
            k * km1 * (1 + q)
        };
        let mut d = SoftmaxDesign::new(k, n_params);
        for o in 0..self.n_obs() {
            let x = &self.design[o * q..(o + 1) * q];
            for u in 0..k {
                let w = &self.weights[o * k * k + u * k..o * k * k + (u + 1) * k];
                d.push_obs(w, u, |v, terms| {
                    if v == u {
                        return;
                    }
                    let pair = u * km1 + if v < u { v } else { v - 1 };
                    if layout_difference {
                        terms.push((pair as u32, 1.0));
                        let slope_base = k * km1;
                        if u > 0 {
                            for (c, &xv) in x.iter().enumerate() {
                                terms.push(((slope_base + (u - 1) * q + c) as u32, xv));
                            }
                        }
                        if v > 0 {
                            for (c, &xv) in x.iter().enumerate() {
                                terms.push(((slope_base + (v - 1) * q + c) as u32, -xv));
                            }
                        }
                    } else {
                        let base = pair * (1 + q);
                        terms.push((base as u32, 1.0));
                        for (c, &xv) in x.iter().enumerate() {
                            terms.push(((base + 1 + c) as u32, xv));
                        }
                    }
                });
            }
        }
        d
    }

    /// The transition log-likelihood and its gradient, in `gamma`'s storage
    /// layout (unused diagonal entries get zero gradient).
    pub fn objective(&self, gamma: &Gamma) -> Result<(f64, Vec<f64>)> {
        self.validate()?;
        let diff = matches!(gamma, Gamma::Difference { .. });
        let theta = compact_gamma(gamma, self.k, self.q)?;
        let d = self.build(diff);
        let (f, g) = d.value_grad(&theta);
        Ok((f, expand_gamma_grad(&g, diff, self.k, self.q)))
    }
}

/// Row-wise fit of the pairwise transition logits.
///
/// Rows with zero total weight carry no information and keep their start values.
pub fn fit_transition_pairwise(data: &TransitionData, start: Option<&Gamma>) -> Result<TransitionFit> {
    data.validate()?;
    let k = data.k;
    let p = 1 + data.q;
    let mut coef = match start {
        Some(Gamma::Pairwise { coef }) if coef.len() == k * k * p => coef.clone(),
        Some(_) => return Err(Error::usage("pairwise start has wrong layout or size")),
        None => vec![0.0; k * k * p],
    };
    let mut loglik = 0.0;
    let mut iterations = 0;
    for u in 0..k {
        if !(data.row_total(u) > 0.0) {
            continue;
        }
        let problem = data.row_problem(u);
        let design = problem.build();
        design
            .check_separation(Some(u))
            .map_err(|e| tag_origin(e, u))?;
        let row_start = row_coef(&coef, k, data.q, u);
        let fit = design
            .newton(row_start, GRAD_TOL, Some(u))
            .map_err(|e| tag_origin(e, u))?;
        set_row_coef(&mut coef, &fit.coef, k, data.q, u);
        loglik += fit.loglik;
        iterations += fit.iterations;
    }
    Ok(TransitionFit {
        gamma: Gamma::Pairwise { coef },
        loglik,
        iterations,
    })
}

/// Joint fit of the difference-parameterized transition logits (slopes are
/// shared across rows, so rows are not separable).
pub fn fit_transition_difference(data: &TransitionData, start: Option<&Gamma>) -> Result<TransitionFit> {
    data.validate()?;
    let k = data.k;
    let theta = match start {
        Some(g @ Gamma::Difference { .. }) => compact_gamma(g, k, data.q)?,
        Some(_) => return Err(Error::usage("difference start has wrong layout")),
        None => vec![0.0; k * (k - 1) + (k - 1) * data.q],
    };
    let design = data.build(true);
    design.check_separation(None)?;
    let fit = design.newton(theta, GRAD_TOL_DIFFERENCE, None)?;
    let gamma = gamma_from_compact(&fit.coef, true, k, data.q);
    Ok(TransitionFit {
        gamma,
        loglik: fit.loglik,
        iterations: fit.iterations,
    })
}

fn tag_origin(e: Error, u: usize) -> Error {
    match e {
        Error::Separation { detail, .. } => Error::Separation { origin: Some(u), detail },
        other => other,
    }
}

fn row_coef(coef: &[f64], k: usize, q: usize, u: usize) -> Vec<f64> {
    let p = 1 + q;
    let km1 = k - 1;
    let mut out = vec![0.0; p * km1];
    for v in (0..k).filter(|&v| v != u) {
        let col = if v < u { v } else { v - 1 };
        for c in 0..p {
            out[c * km1 + col] = coef[(u * k + v) * p + c];
        }
    }
    out
}

fn set_row_coef(coef: &mut [f64], row: &[f64], k: usize, q: usize, u: usize) {
    let p = 1 + q;
    let km1 = k - 1;
    for v in (0..k).filter(|&v| v != u) {
        let col = if v < u { v } else { v - 1 };
        for c in 0..p {
            coef[(u * k + v) * p + c] = row[c * km1 + col];
        }
    }
}

fn compact_gamma(gamma: &Gamma, k: usize, q: usize) -> Result<Vec<f64>> {
    let km1 = k - 1;
    match gamma {
        Gamma::Pairwise { coef } => {
            let p = 1 + q;
            if coef.len() != k * k * p {
                return Err(Error::usage("pairwise gamma has wrong size"));
            }
            let mut out = Vec::with_capacity(k * km1 * p);
            for u in 0..k {
                for v in (0..k).filter(|&v| v != u) {
                    out.extend_from_slice(&coef[(u * k + v) * p..(u * k + v + 1) * p]);
                }
            }
            Ok(out)
        }
        Gamma::Difference { intercepts, slopes } => {
            if intercepts.len() != k * k || slopes.len() != km1 * q {
                return Err(Error::usage("difference gamma has wrong size"));
            }
            let mut out = Vec::with_capacity(k * km1 + km1 * q);
            for u in 0..k {
                for v in (0..k).filter(|&v| v != u) {
                    out.push(intercepts[u * k + v]);
                }
            }
            out.extend_from_slice(slopes);
            Ok(out)
        }
    }
}

fn gamma_from_compact(theta: &[f64], difference: bool, k: usize, q: usize) -> Gamma {
    let g = expand_gamma_grad(theta, difference, k, q);
    if difference {
        let (ints, slopes) = g.split_at(k * k);
        Gamma::Difference {
            intercepts: ints.to_vec(),
            slopes: slopes.to_vec(),
        }
    } else {
        Gamma::Pairwise { coef: g }
    }
}

/// Maps a compact vector back to `Gamma` storage order (zeros on the diagonal).
fn expand_gamma_grad(theta: &[f64], difference: bool, k: usize, q: usize) -> Vec<f64> {
    let km1 = k - 1;
    if difference {
        let mut out = vec![0.0; k * k + km1 * q];
        let mut idx = 0;
        for u in 0..k {
            for v in (0..k).filter(|&v| v != u) {
                out[u * k + v] = theta[idx];
                idx += 1;
            }
        }
        out[k * k..].copy_from_slice(&theta[k * km1..]);
        out
    } else {
        let p = 1 + q;
        let mut out = vec![0.0; k * k * p];
        let mut idx = 0;
        for u in 0..k {
            for v in (0..k).filter(|&v| v != u) {
                out[(u * k + v) * p..(u * k + v + 1) * p].copy_from_slice(&theta[idx..idx + p]);
                idx += p;
            }
        }
        out
    }
}

/// Sparse linear-softmax design shared by all solvers.
///
/// Observation `o` has class weights `w_oc`, a group id (the origin state for
/// transition rows) and, for every class, a sparse list of `(param, value)`
/// terms whose dot product with `theta` is the class predictor. Reference
/// classes have no terms (predictor 0).
struct SoftmaxDesign {
    k: usize,
    n_params: usize,
    weights: Vec<f64>,
    groups: Vec<usize>,
    class_start: Vec<usize>,
    terms: Vec<(u32, f64)>,
}

impl SoftmaxDesign {
    fn new(k: usize, n_params: usize) -> Self {
        Self {
            k,
            n_params,
            weights: Vec::new(),
            groups: Vec::new(),
            class_start: vec![0],
            terms: Vec::new(),
        }
    }

    fn push_obs(&mut self, w: &[f64], group: usize, mut fill: impl FnMut(usize, &mut Vec<(u32, f64)>)) {
        if w.iter().sum::<f64>() <= 0.0 {
            return;
        }
        self.weights.extend_from_slice(w);
        self.groups.push(group);
        for c in 0..self.k {
            fill(c, &mut self.terms);
            self.class_start.push(self.terms.len());
        }
    }

    fn n_obs(&self) -> usize {
        self.groups.len()
    }

    #[inline]
    fn class_terms(&self, o: usize, c: usize) -> &[(u32, f64)] {
        let idx = o * self.k + c;
        &self.terms[self.class_start[idx]..self.class_start[idx + 1]]
    }

    /// A class with terms but zero total weight within a group, or a reference
    /// class with zero weight while others have some, pushes coefficients to infinity.
    fn check_separation(&self, origin: Option<usize>) -> Result<()> {
        let k = self.k;
        let n_groups = self.groups.iter().copied().max().map_or(0, |g| g + 1);
        let mut totals = vec![0.0; n_groups * k];
        let mut has_terms = vec![false; n_groups * k];
        for o in 0..self.n_obs() {
            let g = self.groups[o];
            for c in 0..k {
                totals[g * k + c] += self.weights[o * k + c];
                if !self.class_terms(o, c).is_empty() {
                    has_terms[g * k + c] = true;
                }
            }
        }
        for g in 0..n_groups {
            let tot = &totals[g * k..(g + 1) * k];
            let group_total: f64 = tot.iter().sum();
            if !(group_total > 0.0) {
                continue;
            }
            for c in 0..k {
                if tot[c] <= 0.0 {
                    let which = if has_terms[g * k + c] { "class" } else { "reference class" };
                    return Err(Error::Separation {
                        origin: origin.or(if n_groups > 1 { Some(g) } else { None }),
                        detail: format!("{} {} has zero total weight", which, c + 1),
                    });
                }
            }
        }
        Ok(())
    }

    fn predictors(&self, o: usize, theta: &[f64], eta: &mut [f64]) {
        for (c, e) in eta.iter_mut().enumerate() {
            *e = self
                .class_terms(o, c)
                .iter()
                .map(|&(p, x)| theta[p as usize] * x)
                .sum();
        }
    }

    /// Log-softmax of `eta` into `logp`, probabilities into `eta`.
    fn log_softmax(eta: &mut [f64], logp: &mut [f64]) {
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for e in eta.iter() {
            z += exp(e - m);
        }
        let lz = m + ln(z);
        for (e, l) in eta.iter_mut().zip(logp.iter_mut()) {
            *l = *e - lz;
            *e = exp(*l);
        }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let k = self.k;
        let mut eta = vec![0.0; k];
        let mut logp = vec![0.0; k];
        let mut f = 0.0;
        for o in 0..self.n_obs() {
            self.predictors(o, theta, &mut eta);
            Self::log_softmax(&mut eta, &mut logp);
            for c in 0..k {
                let w = self.weights[o * k + c];
                if w > 0.0 {
                    f += w * logp[c];
                }
            }
        }
        f
    }

    fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (f, g, _) = self.eval(theta, false);
        (f, g)
    }

    /// Objective, gradient and (optionally) Hessian, row-major.
    fn eval(&self, theta: &[f64], hessian: bool) -> (f64, Vec<f64>, Vec<f64>) {
        let k = self.k;
        let np = self.n_params;
        let mut eta = vec![0.0; k];
        let mut logp = vec![0.0; k];
        let mut f = 0.0;
        let mut g = vec![0.0; np];
        let mut h = if hessian { vec![0.0; np * np] } else { Vec::new() };
        let mut gbar = vec![0.0; np];
        let mut touched: Vec<usize> = Vec::new();
        for o in 0..self.n_obs() {
            let w = &self.weights[o * k..(o + 1) * k];
            let total: f64 = w.iter().sum();
            self.predictors(o, theta, &mut eta);
            Self::log_softmax(&mut eta, &mut logp);
            let p = &eta;
            for c in 0..k {
                if w[c] > 0.0 {
                    f += w[c] * logp[c];
                }
                let resid = w[c] - total * p[c];
                for &(idx, x) in self.class_terms(o, c) {
                    g[idx as usize] += resid * x;
                }
            }
            if !hessian {
                continue;
            }
            // -H += W * (sum_c p_c x_c x_c' - xbar xbar'), xbar = sum_c p_c x_c
            touched.clear();
            for c in 0..k {
                let terms = self.class_terms(o, c);
                for &(a, xa) in terms {
                    let a = a as usize;
                    if gbar[a] == 0.0 && !touched.contains(&a) {
                        touched.push(a);
                    }
                    gbar[a] += p[c] * xa;
                    for &(b, xb) in terms {
                        h[a * np + b as usize] -= total * p[c] * xa * xb;
                    }
                }
            }
            for &a in &touched {
                for &b in &touched {
                    h[a * np + b] += total * gbar[a] * gbar[b];
                }
            }
            for &a in &touched {
                gbar[a] = 0.0;
            }
        }
        (f, g, h)
    }

    fn newton(&self, mut theta: Vec<f64>, tol: f64, origin: Option<usize>) -> Result<LogitFit> {
        let np = self.n_params;
        let total_weight: f64 = self.weights.iter().sum();
        for iter in 0..MAX_NEWTON_ITER {
            let (f, g, h) = self.eval(&theta, true);
            if !f.is_finite() {
                return Err(Error::Numerical(format!("non-finite logit objective at iteration {}", iter)));
            }
            let grad_norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if grad_norm < tol {
                return Ok(LogitFit {
                    coef: theta,
                    loglik: f,
                    iterations: iter,
                    grad_norm,
                });
            }
            let mut neg_h: Vec<f64> = h.iter().map(|x| -x).collect();
            let step = match cholesky_solve(&neg_h, &g) {
                Some(s) => s,
                None => {
                    for i in 0..np {
                        neg_h[i * np + i] += RIDGE;
                    }
                    cholesky_solve(&neg_h, &g).ok_or(Error::SingularHessian)?
                }
            };
            // Near the optimum the predicted gain drops below the resolution of
            // the objective and the line search can no longer tell steps apart;
            // the concave objective makes the full step safe there.
            let gain: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            if gain.abs() <= 1e-11 * (1.0 + f.abs()) {
                theta.iter_mut().zip(&step).for_each(|(t, s)| *t += s);
                continue;
            }
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
                let fc = self.value(&cand);
                if fc.is_finite() && fc >= f {
                    accepted = Some(cand);
                    break;
                }
                scale *= 0.5;
            }
            match accepted {
                Some(cand) => theta = cand,
                None => {
                    // Objective flat to machine precision: the gradient is rounding noise.
                    if grad_norm < 1e-6 * total_weight.max(1.0) {
                        return Ok(LogitFit {
                            coef: theta,
                            loglik: f,
                            iterations: iter,
                            grad_norm,
                        });
                    }
                    return Err(Error::NotConverged {
                        iterations: iter,
                        grad_norm,
                    });
                }
            }
            if let Some(big) = theta.iter().find(|x| x.abs() > DIVERGENCE_LIMIT) {
                return Err(Error::Separation {
                    origin,
                    detail: format!("coefficient reached {:.3} (limit {})", big, DIVERGENCE_LIMIT),
                });
            }
        }
        let (_, g, _) = self.eval(&theta, false);
        Err(Error::NotConverged {
            iterations: MAX_NEWTON_ITER,
            grad_norm: g.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_is_log_odds_of_weighted_frequencies() {
        let p = WeightedLogitProblem {
            k: 2,
            q: 0,
            design: vec![],
            weights: [0.25, 0.75].repeat(10),
            ref_class: 0,
        };
        let fit = fit_weighted_mlogit(&p, None).unwrap();
        assert!((fit.coef[0] - ln(3.0)).abs() < 1e-10);
        assert!(fit.grad_norm < GRAD_TOL);
    }

    #[test]
    fn all_weight_on_reference_is_separation() {
        let p = WeightedLogitProblem {
            k: 3,
            q: 1,
            design: vec![0.1, -0.4, 1.0],
            weights: [1.0, 0.0, 0.0].repeat(3),
            ref_class: 0,
        };
        assert!(matches!(fit_weighted_mlogit(&p, None), Err(Error::Separation { .. })));
    }

    #[test]
    fn self_transitions_only_is_separation_per_row() {
        let data = TransitionData {
            k: 2,
            q: 0,
            design: vec![],
            weights: [0.5, 0.0, 0.0, 0.5].repeat(4),
        };
        match fit_transition_pairwise(&data, None) {
            Err(Error::Separation { origin: Some(0), .. }) => {}
            other => panic!("expected separation in row 1, got {:?}", other),
        }
    }

    #[test]
    fn intercept_only_pairwise_matches_count_ratios() {
        let counts = [5.0, 2.0, 1.0, 1.0, 6.0, 3.0, 2.0, 2.0, 4.0];
        let data = TransitionData {
            k: 3,
            q: 0,
            design: vec![],
            weights: counts.to_vec(),
        };
        let fit = fit_transition_pairwise(&data, None).unwrap();
        let Gamma::Pairwise { coef } = fit.gamma else { panic!() };
        for u in 0..3 {
            for v in 0..3 {
                if u != v {
                    let want = ln(counts[u * 3 + v] / counts[u * 3 + u]);
                    assert!((coef[u * 3 + v] - want).abs() < 1e-9, "({u},{v})");
                }
            }
        }
    }

    #[test]
    fn wrong_start_layout_is_usage_error() {
        let data = TransitionData {
            k: 2,
            q: 0,
            design: vec![],
            weights: vec![0.4, 0.1, 0.2, 0.3],
        };
        let start = Gamma::zeros(crate::params::GammaLayout::Difference, 2, 0);
        assert!(matches!(fit_transition_pairwise(&data, Some(&start)), Err(Error::Usage(_))));
    }
}
