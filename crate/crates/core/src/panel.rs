//! Response and covariate panels.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Marker for a missing response.
pub const MISSING: u16 = u16::MAX;

/// Categorical responses indexed by (unit, occasion, item).
///
/// Categories are coded `0..cats[j]`; missing entries hold [`MISSING`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponsePanel {
    n: usize,
    t: usize,
    cats: Vec<usize>,
    y: Vec<u16>,
}

impl ResponsePanel {
    /// Builds a panel from values laid out unit-major, then occasion, then item.
    pub fn new(n: usize, t: usize, cats: Vec<usize>, y: Vec<u16>) -> Result<Self> {
        let r = cats.len();
        if n == 0 || t == 0 || r == 0 {
            return Err(Error::usage("panel needs n >= 1, T >= 1 and r >= 1"));
        }
        if let Some(j) = cats.iter().position(|&c| c < 2 || c >= MISSING as usize) {
            return Err(Error::usage(alloc::format!(
                "item {} has {} categories; need at least 2",
                j + 1,
                cats[j]
            )));
        }
        if y.len() != n * t * r {
            return Err(Error::usage(alloc::format!(
                "expected {} responses, got {}",
                n * t * r,
                y.len()
            )));
        }
        for (idx, &v) in y.iter().enumerate() {
            let j = idx % r;
            if v != MISSING && v as usize >= cats[j] {
                let i = idx / (t * r);
                let occ = (idx / r) % t;
                return Err(Error::usage(alloc::format!(
                    "response {} out of range for item {} (unit {}, occasion {})",
                    v,
                    j + 1,
                    i + 1,
                    occ + 1
                )));
            }
        }
        Ok(Self { n, t, cats, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn occasions(&self) -> usize {
        self.t
    }

    pub fn items(&self) -> usize {
        self.cats.len()
    }

    pub fn cats(&self) -> &[usize] {
        &self.cats
    }

    /// Response of unit `i` at occasion `t` on item `j`, `None` when missing.
    #[inline]
    pub fn get(&self, i: usize, t: usize, j: usize) -> Option<usize> {
        let v = self.y[self.offset(i, t) + j];
        (v != MISSING).then_some(v as usize)
    }

    /// Raw response row of unit `i` at occasion `t` (may contain [`MISSING`]).
    #[inline]
    pub fn row(&self, i: usize, t: usize) -> &[u16] {
        let off = self.offset(i, t);
        &self.y[off..off + self.cats.len()]
    }

    pub fn raw(&self) -> &[u16] {
        &self.y
    }

    #[inline]
    fn offset(&self, i: usize, t: usize) -> usize {
        (i * self.t + t) * self.cats.len()
    }

    pub(crate) fn check_index(&self, i: usize, t: usize) -> Result<()> {
        if i >= self.n || t >= self.t {
            return Err(Error::usage(alloc::format!(
                "index (unit {}, occasion {}) outside panel of {} units and {} occasions",
                i,
                t,
                self.n,
                self.t
            )));
        }
        Ok(())
    }

    /// Panel made of the listed units, in order (units may repeat).
    pub fn select_units(&self, units: &[usize]) -> Self {
        let stride = self.t * self.cats.len();
        let mut y = Vec::with_capacity(units.len() * stride);
        for &i in units {
            y.extend_from_slice(&self.y[i * stride..(i + 1) * stride]);
        }
        Self {
            n: units.len(),
            t: self.t,
            cats: self.cats.clone(),
            y,
        }
    }

    /// Every (unit, occasion) row as a separate single-occasion unit.
    pub fn pooled(&self) -> Self {
        Self {
            n: self.n * self.t,
            t: 1,
            cats: self.cats.clone(),
            y: self.y.clone(),
        }
    }

    /// Keeps the first `r` items only.
    pub fn first_items(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.items() {
            return Err(Error::usage("item count out of range"));
        }
        let mut y = Vec::with_capacity(self.n * self.t * r);
        for i in 0..self.n {
            for t in 0..self.t {
                y.extend_from_slice(&self.row(i, t)[..r]);
            }
        }
        Self::new(self.n, self.t, self.cats[..r].to_vec(), y)
    }
}

/// Covariates for the latent process.
///
/// The panel stores `q` raw series per (unit, occasion) and two designs drawn
/// from them: the initial-probability design uses the occasion-1 values of
/// the columns in `init_cols`, the transition design at occasion `t >= 2`
/// uses the occasion-`t` values of `trans_cols`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariatePanel {
    n: usize,
    t: usize,
    q: usize,
    series: Vec<f64>,
    init_cols: Vec<usize>,
    trans_cols: Vec<usize>,
    x_init: Vec<f64>,
    x_trans: Vec<f64>,
}

impl CovariatePanel {
    /// Panel where both designs use every column.
    pub fn shared(n: usize, t: usize, q: usize, series: Vec<f64>) -> Result<Self> {
        let cols: Vec<usize> = (0..q).collect();
        Self::with_designs(n, t, q, series, cols.clone(), cols)
    }

    /// Panel with distinct initial and transition designs (column subsets).
    pub fn with_designs(
        n: usize,
        t: usize,
        q: usize,
        series: Vec<f64>,
        init_cols: Vec<usize>,
        trans_cols: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 || t == 0 {
            return Err(Error::usage("covariate panel needs n >= 1 and T >= 1"));
        }
        if series.len() != n * t * q {
            return Err(Error::usage(alloc::format!(
                "expected {} covariate values, got {}",
                n * t * q,
                series.len()
            )));
        }
        if let Some(pos) = series.iter().position(|v| !v.is_finite()) {
            let (i, occ) = if q == 0 { (0, 0) } else { (pos / (t * q), (pos / q) % t) };
            return Err(Error::usage(alloc::format!(
                "covariates must be complete and finite (unit {}, occasion {})",
                i + 1,
                occ + 1
            )));
        }
        if init_cols.iter().chain(&trans_cols).any(|&c| c >= q) {
            return Err(Error::usage("design column index out of range"));
        }
        let q1 = init_cols.len();
        let q2 = trans_cols.len();
        let mut x_init = Vec::with_capacity(n * q1);
        let mut x_trans = Vec::with_capacity(n * t * q2);
        for i in 0..n {
            let base = i * t * q;
            x_init.extend(init_cols.iter().map(|&c| series[base + c]));
            for occ in 0..t {
                x_trans.extend(trans_cols.iter().map(|&c| series[base + occ * q + c]));
            }
        }
        Ok(Self {
            n,
            t,
            q,
            series,
            init_cols,
            trans_cols,
            x_init,
            x_trans,
        })
    }

    /// Panel without covariates (intercept-only designs).
    pub fn empty(n: usize, t: usize) -> Self {
        Self::shared(n, t, 0, Vec::new()).expect("empty panel is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn occasions(&self) -> usize {
        self.t
    }

    /// Number of raw series.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn q1(&self) -> usize {
        self.init_cols.len()
    }

    pub fn q2(&self) -> usize {
        self.trans_cols.len()
    }

    pub fn init_cols(&self) -> &[usize] {
        &self.init_cols
    }

    pub fn trans_cols(&self) -> &[usize] {
        &self.trans_cols
    }

    /// Raw series values of unit `i` at occasion `t`.
    pub fn series(&self, i: usize, t: usize) -> &[f64] {
        let off = (i * self.t + t) * self.q;
        &self.series[off..off + self.q]
    }

    /// Initial-probability design of unit `i`.
    #[inline]
    pub fn x_init(&self, i: usize) -> &[f64] {
        let q1 = self.q1();
        &self.x_init[i * q1..(i + 1) * q1]
    }

    /// Transition design of unit `i` at occasion `t` (0-based, meaningful for `t >= 1`).
    #[inline]
    pub fn x_trans(&self, i: usize, t: usize) -> &[f64] {
        let q2 = self.q2();
        let off = (i * self.t + t) * q2;
        &self.x_trans[off..off + q2]
    }

    pub fn select_units(&self, units: &[usize]) -> Self {
        let stride = self.t * self.q;
        let mut series = Vec::with_capacity(units.len() * stride);
        for &i in units {
            series.extend_from_slice(&self.series[i * stride..(i + 1) * stride]);
        }
        Self::with_designs(
            units.len(),
            self.t,
            self.q,
            series,
            self.init_cols.clone(),
            self.trans_cols.clone(),
        )
        .expect("subset of a valid panel is valid")
    }

    pub(crate) fn check_matches(&self, panel: &ResponsePanel) -> Result<()> {
        if self.n != panel.n() || self.t != panel.occasions() {
            return Err(Error::usage(alloc::format!(
                "covariate panel is {}x{} but responses are {}x{}",
                self.n,
                self.t,
                panel.n(),
                panel.occasions()
            )));
        }
        Ok(())
    }
}
