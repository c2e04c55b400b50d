//! Summaries of fitted models: item and section mean scores, state ordering,
//! and group-averaged initial and transition probabilities.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::UnitChain;
use crate::panel::CovariatePanel;
use crate::params::{LatentParams, MeasurementParams};

/// Item, section and ordering tables for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub k: usize,
    /// `r x k` item mean scores.
    pub mu: Vec<f64>,
    /// `d x k` section mean scores.
    pub mu_bar: Vec<f64>,
    pub section_map: Vec<usize>,
    /// States sorted ascending on the pivot section.
    pub state_order: Vec<usize>,
}

/// `mu[j * k + u] = sum_y y * phi_{jy|u} / (c_j - 1)`.
pub fn item_mean_score(meas: &MeasurementParams) -> Result<Vec<f64>> {
    let k = meas.k;
    let mut mu = Vec::with_capacity(meas.items() * k);
    for (j, (table, &c)) in meas.phi.iter().zip(&meas.cats).enumerate() {
        if c < 2 {
            return Err(Error::Usage(alloc::format!(
                "item {} has a single category; its mean score is undefined",
                j + 1
            )));
        }
        for u in 0..k {
            let s: f64 = (1..c).map(|y| y as f64 * table[y * k + u]).sum();
            mu.push(s / (c - 1) as f64);
        }
    }
    Ok(mu)
}

/// Unweighted average of item scores within each section. `section_map[j]`
/// is item `j`'s section in `0..d`.
pub fn section_mean_score(mu: &[f64], k: usize, section_map: &[usize], d: usize) -> Result<Vec<f64>> {
    if k == 0 || mu.len() != section_map.len() * k {
        return Err(Error::usage("section map must assign every item exactly once"));
    }
    let mut sums = vec![0.0; d * k];
    let mut counts = vec![0usize; d];
    for (j, &s) in section_map.iter().enumerate() {
        if s >= d {
            return Err(Error::Usage(alloc::format!("item {} maps to unknown section {}", j + 1, s + 1)));
        }
        counts[s] += 1;
        for u in 0..k {
            sums[s * k + u] += mu[j * k + u];
        }
    }
    if let Some(s) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Usage(alloc::format!("section {} has no items", s + 1)));
    }
    for s in 0..d {
        for u in 0..k {
            sums[s * k + u] /= counts[s] as f64;
        }
    }
    Ok(sums)
}

/// States sorted ascending by their score in section `pivot`; ties keep the
/// original index order.
pub fn order_states(mu_bar: &[f64], k: usize, pivot: usize) -> Result<Vec<usize>> {
    if k == 0 || (pivot + 1) * k > mu_bar.len() {
        return Err(Error::usage("pivot section out of range"));
    }
    let row = &mu_bar[pivot * k..(pivot + 1) * k];
    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps ties in index order.
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap_or(core::cmp::Ordering::Equal));
    Ok(order)
}

pub fn score_table(meas: &MeasurementParams, section_map: &[usize], d: usize, pivot: usize) -> Result<ScoreTable> {
    let k = meas.k;
    if section_map.len() != meas.items() {
        return Err(Error::usage("section map must assign every item exactly once"));
    }
    let mu = item_mean_score(meas)?;
    let mu_bar = section_mean_score(&mu, k, section_map, d)?;
    let state_order = order_states(&mu_bar, k, pivot)?;
    Ok(ScoreTable {
        k,
        mu,
        mu_bar,
        section_map: section_map.to_vec(),
        state_order,
    })
}

/// Group means of per-unit initial vectors and transition matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTables {
    pub group: usize,
    pub units: usize,
    pub initial: Vec<f64>,
    /// `(T - 1) x k x k`, transitions into occasions `2..T`.
    pub trans: Vec<f64>,
}

/// Averages each unit's initial probabilities and transition matrices within
/// groups (`groups[i]` in `0..n_groups`). Empty groups are omitted and
/// listed in the second return value.
pub fn averaged_probability_tables(
    latent: &LatentParams,
    covs: &CovariatePanel,
    groups: &[usize],
    n_groups: usize,
) -> Result<(Vec<GroupTables>, Vec<usize>)> {
    let n = covs.n();
    let t_len = covs.occasions();
    let k = latent.k();
    if groups.len() != n {
        return Err(Error::usage("grouping must assign every unit"));
    }
    if let Some(i) = groups.iter().position(|&g| g >= n_groups) {
        return Err(Error::Usage(alloc::format!("unit {} has an unknown group", i + 1)));
    }
    let kk = k * k;
    let steps = t_len.saturating_sub(1);
    let mut tables: Vec<GroupTables> = (0..n_groups)
        .map(|g| GroupTables {
            group: g,
            units: 0,
            initial: vec![0.0; k],
            trans: vec![0.0; steps * kk],
        })
        .collect();
    for i in 0..n {
        let chain = UnitChain::from_latent(latent, Some(covs), i, t_len).or_else(|e| match latent {
            // Probabilities without covariates ignore the covariate panel.
            LatentParams::Basic(_) => UnitChain::from_latent(latent, None, i, t_len),
            _ => Err(e),
        })?;
        let g = &mut tables[groups[i]];
        g.units += 1;
        for (a, p) in g.initial.iter_mut().zip(chain.initial.iter()) {
            *a += p;
        }
        for t in 1..t_len {
            for (a, p) in g.trans[(t - 1) * kk..t * kk].iter_mut().zip(chain.trans_at(t)) {
                *a += p;
            }
        }
    }
    let mut kept = Vec::new();
    let mut empty = Vec::new();
    for mut g in tables {
        if g.units == 0 {
            empty.push(g.group);
            continue;
        }
        let m = g.units as f64;
        for x in g.initial.iter_mut().chain(g.trans.iter_mut()) {
            *x /= m;
        }
        kept.push(g);
    }
    Ok((kept, empty))
}
