//! CSV formats.
//!
//! Responses and covariates are long tables with one row per unit and
//! occasion (`unit_id,time,...`); a blank response is missing. Categories are
//! 0-based integers. Parameters are written as labeled wide tables plus a
//! long `params.csv`. Floats use the shortest representation that parses
//! back to the same value, so re-serializing an ingested file reproduces it.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use lmest_core::bootstrap::BootstrapResult;
use lmest_core::montecarlo::MonteCarloReport;
use lmest_core::report::{GroupTables, ScoreTable};
use lmest_core::{CovariatePanel, Gamma, LatentParams, MeasurementParams, ModelParams, ResponsePanel, MISSING};

use crate::error::CliError;

/// A response panel with its unit labels in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedResponses {
    pub ids: Vec<String>,
    pub panel: ResponsePanel,
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(f))
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn parse_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{}:{}: {}", path.display(), line, msg))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(path, line, e)
}

fn check_prefix(path: &Path, header: &csv::StringRecord, prefix: &str) -> Result<usize, CliError> {
    if header.len() < 2 || &header[0] != "unit_id" || &header[1] != "time" {
        return Err(parse_err(path, 1, "header must start with unit_id,time"));
    }
    for (c, name) in header.iter().enumerate().skip(2) {
        let want = format!("{}{}", prefix, c - 1);
        if name != want {
            return Err(parse_err(path, 1, format!("expected column {want}, found {name}")));
        }
    }
    Ok(header.len() - 2)
}

/// Rows keyed by (unit position, occasion) after checking the panel is balanced.
struct LongTable {
    ids: Vec<String>,
    t: usize,
    rows: HashMap<(usize, usize), (u64, csv::StringRecord)>,
}

fn read_long(path: &Path, prefix: &str) -> Result<(usize, LongTable), CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let width = check_prefix(path, &header, prefix)?;
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows = HashMap::new();
    let mut t_max = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty unit_id"));
        }
        let time: usize = rec[1]
            .trim()
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| parse_err(path, line, format!("time must be a positive integer, found '{}'", &rec[1])))?;
        let next = ids.len();
        let unit = *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id.clone());
            next
        });
        if rows.insert((unit, time - 1), (line, rec)).is_some() {
            return Err(parse_err(path, line, format!("duplicate row for unit {id}, time {time}")));
        }
        t_max = t_max.max(time);
    }
    if ids.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    for (u, id) in ids.iter().enumerate() {
        for t in 0..t_max {
            if !rows.contains_key(&(u, t)) {
                return Err(CliError::Parse(format!(
                    "{}: unit {} has no row for time {} (panels must be balanced)",
                    path.display(),
                    id,
                    t + 1
                )));
            }
        }
    }
    Ok((width, LongTable { ids, t: t_max, rows }))
}

/// Reads `unit_id,time,item_1..item_r`. Each item's category count is its
/// largest observed category plus one (at least 2).
pub fn read_responses(path: &Path) -> Result<LoadedResponses, CliError> {
    let (r, table) = read_long(path, "item_")?;
    if r == 0 {
        return Err(parse_err(path, 1, "no item columns"));
    }
    let n = table.ids.len();
    let mut y = Vec::with_capacity(n * table.t * r);
    let mut cats = vec![2usize; r];
    for u in 0..n {
        for t in 0..table.t {
            let (line, rec) = &table.rows[&(u, t)];
            for j in 0..r {
                let s = rec[j + 2].trim();
                if s.is_empty() {
                    y.push(MISSING);
                    continue;
                }
                let v: u16 = s
                    .parse()
                    .ok()
                    .filter(|&v| v != MISSING)
                    .ok_or_else(|| parse_err(path, *line, format!("item_{}: invalid category '{}'", j + 1, s)))?;
                cats[j] = cats[j].max(v as usize + 1);
                y.push(v);
            }
        }
    }
    let panel = ResponsePanel::new(n, table.t, cats, y)?;
    Ok(LoadedResponses { ids: table.ids, panel })
}

pub fn write_responses(path: &Path, ids: &[String], panel: &ResponsePanel) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["unit_id".to_string(), "time".to_string()];
    header.extend((1..=panel.items()).map(|j| format!("item_{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, id) in ids.iter().enumerate() {
        for t in 0..panel.occasions() {
            let mut row = vec![id.clone(), (t + 1).to_string()];
            row.extend((0..panel.items()).map(|j| panel.get(i, t, j).map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads `unit_id,time,x_1..x_q` for the units of `ids`; both logit designs
/// use every column.
pub fn read_covariates(path: &Path, ids: &[String], t: usize) -> Result<CovariatePanel, CliError> {
    let (q, table) = read_long(path, "x_")?;
    if table.t != t {
        return Err(CliError::Parse(format!(
            "{}: covariates cover {} occasions, responses {}",
            path.display(),
            table.t,
            t
        )));
    }
    let pos: HashMap<&str, usize> = table.ids.iter().enumerate().map(|(u, id)| (id.as_str(), u)).collect();
    if table.ids.len() != ids.len() {
        return Err(CliError::Parse(format!(
            "{}: covariates list {} units, responses {}",
            path.display(),
            table.ids.len(),
            ids.len()
        )));
    }
    let mut series = Vec::with_capacity(ids.len() * t * q);
    for id in ids {
        let u = *pos
            .get(id.as_str())
            .ok_or_else(|| CliError::Parse(format!("{}: no covariates for unit {}", path.display(), id)))?;
        for occ in 0..t {
            let (line, rec) = &table.rows[&(u, occ)];
            for c in 0..q {
                let s = rec[c + 2].trim();
                let v: f64 = s
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| parse_err(path, *line, format!("x_{}: invalid value '{}'", c + 1, s)))?;
                series.push(v);
            }
        }
    }
    Ok(CovariatePanel::shared(ids.len(), t, q, series)?)
}

pub fn write_covariates(path: &Path, ids: &[String], covs: &CovariatePanel) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["unit_id".to_string(), "time".to_string()];
    header.extend((1..=covs.q()).map(|c| format!("x_{c}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, id) in ids.iter().enumerate() {
        for t in 0..covs.occasions() {
            let mut row = vec![id.clone(), (t + 1).to_string()];
            row.extend(covs.series(i, t).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_states(path: &Path, ids: &[String], t_len: usize, states: &[usize]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["unit_id", "time", "state"]).map_err(|e| csv_err(path, e))?;
    for (i, id) in ids.iter().enumerate() {
        for t in 0..t_len {
            let s = (states[i * t_len + t] + 1).to_string();
            w.write_record([id.as_str(), &(t + 1).to_string(), &s]).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads `unit_id,<column>` pairs, returning each unit's label.
fn read_unit_labels(path: &Path, column: &str, ids: &[String]) -> Result<Vec<String>, CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != 2 || &header[0] != "unit_id" || &header[1] != column {
        return Err(parse_err(path, 1, format!("header must be unit_id,{column}")));
    }
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if map.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
            return Err(parse_err(path, line, format!("duplicate unit {}", &rec[0])));
        }
    }
    ids.iter()
        .map(|id| {
            map.get(id)
                .cloned()
                .ok_or_else(|| CliError::Parse(format!("{}: unit {} has no {}", path.display(), id, column)))
        })
        .collect()
}

/// Group index per unit and group labels in order of first appearance.
pub fn read_groups(path: &Path, ids: &[String]) -> Result<(Vec<usize>, Vec<String>), CliError> {
    let labels = read_unit_labels(path, "group", ids)?;
    let mut names: Vec<String> = Vec::new();
    let groups = labels
        .iter()
        .map(|l| match names.iter().position(|n| n == l) {
            Some(g) => g,
            None => {
                names.push(l.clone());
                names.len() - 1
            }
        })
        .collect();
    Ok((groups, names))
}

/// Reads `item,section` with 1-based indices; returns 0-based sections and their count.
pub fn read_sections(path: &Path, r: usize) -> Result<(Vec<usize>, usize), CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != 2 || &header[0] != "item" || &header[1] != "section" {
        return Err(parse_err(path, 1, "header must be item,section"));
    }
    let mut map = vec![None; r];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let idx = |s: &str| s.trim().parse::<usize>().ok().filter(|&v| v >= 1);
        let (Some(j), Some(s)) = (idx(&rec[0]), idx(&rec[1])) else {
            return Err(parse_err(path, line, "item and section must be positive integers"));
        };
        if j > r {
            return Err(parse_err(path, line, format!("item {j} out of range (r = {r})")));
        }
        if map[j - 1].replace(s - 1).is_some() {
            return Err(parse_err(path, line, format!("item {j} assigned twice")));
        }
    }
    let sections: Vec<usize> = map
        .iter()
        .enumerate()
        .map(|(j, s)| s.ok_or_else(|| CliError::Parse(format!("{}: item {} has no section", path.display(), j + 1))))
        .collect::<Result<_, _>>()?;
    let d = sections.iter().max().map_or(0, |m| m + 1);
    Ok((sections, d))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn state_header(first: &[&str], k: usize, label: &str) -> Vec<String> {
    let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    h.extend((1..=k).map(|u| format!("{label}_{u}")));
    h
}

/// `item,category,state_1..state_k`.
pub fn write_phi(path: &Path, meas: &MeasurementParams) -> Result<(), CliError> {
    let k = meas.k;
    let mut w = writer(path)?;
    w.write_record(state_header(&["item", "category"], k, "state")).map_err(|e| csv_err(path, e))?;
    for (j, &c) in meas.cats.iter().enumerate() {
        for y in 0..c {
            let mut row = vec![(j + 1).to_string(), y.to_string()];
            row.extend((0..k).map(|u| num(meas.get(j, y, u))));
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads the `write_phi` format. Items and categories must be complete and
/// in order.
pub fn read_phi(path: &Path) -> Result<MeasurementParams, CliError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || &header[0] != "item" || &header[1] != "category" {
        return Err(parse_err(path, 1, "header must be item,category,state_1..state_k"));
    }
    let k = header.len() - 2;
    let mut phi: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let (Ok(j), Ok(y)) = (rec[0].trim().parse::<usize>(), rec[1].trim().parse::<usize>()) else {
            return Err(parse_err(path, line, "item and category must be integers"));
        };
        if j == phi.len() + 1 && y == 0 {
            phi.push(Vec::new());
        } else if j != phi.len() || phi.is_empty() || y != phi[j - 1].len() / k {
            return Err(parse_err(path, line, "rows must list items and categories in order"));
        }
        for u in 0..k {
            let v: f64 = rec[u + 2]
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid probability '{}'", &rec[u + 2])))?;
            phi[j - 1].push(v);
        }
    }
    let cats = phi.iter().map(|t| t.len() / k).collect();
    Ok(MeasurementParams::new(k, cats, phi)?)
}

/// Writes `phi.csv`, the latent tables and the long `params.csv` into `dir`.
pub fn write_params(dir: &Path, params: &ModelParams) -> Result<(), CliError> {
    write_phi(&dir.join("phi.csv"), &params.meas)?;
    let k = params.k();
    match &params.latent {
        LatentParams::Basic(chain) => {
            let p = dir.join("pi.csv");
            let mut w = writer(&p)?;
            w.write_record(["state", "prob"]).map_err(|e| csv_err(&p, e))?;
            for (u, v) in chain.pi.iter().enumerate() {
                w.write_record([(u + 1).to_string(), num(*v)]).map_err(|e| csv_err(&p, e))?;
            }
            w.flush().map_err(|e| CliError::io(&p, e))?;
            let p = dir.join("trans.csv");
            let mut w = writer(&p)?;
            w.write_record(state_header(&["from"], k, "to")).map_err(|e| csv_err(&p, e))?;
            for u in 0..k {
                let mut row = vec![(u + 1).to_string()];
                row.extend((0..k).map(|v| num(chain.trans_at(u, v))));
                w.write_record(&row).map_err(|e| csv_err(&p, e))?;
            }
            w.flush().map_err(|e| CliError::io(&p, e))?;
        }
        LatentParams::Covariate(cv) => {
            let p = dir.join("beta.csv");
            let mut w = writer(&p)?;
            let mut h = vec!["coefficient".to_string()];
            h.extend((2..=k).map(|u| format!("state_{u}")));
            w.write_record(&h).map_err(|e| csv_err(&p, e))?;
            for c in 0..=cv.q1 {
                let mut row = vec![coef_label(c)];
                row.extend((1..k).map(|u| num(cv.beta_at(c, u))));
                w.write_record(&row).map_err(|e| csv_err(&p, e))?;
            }
            w.flush().map_err(|e| CliError::io(&p, e))?;
            let p = dir.join("gamma.csv");
            let mut w = writer(&p)?;
            match &cv.gamma {
                Gamma::Pairwise { coef } => {
                    let mut h = vec!["from".to_string(), "to".to_string()];
                    h.extend((0..=cv.q2).map(coef_label));
                    w.write_record(&h).map_err(|e| csv_err(&p, e))?;
                    for u in 0..k {
                        for v in (0..k).filter(|&v| v != u) {
                            let mut row = vec![(u + 1).to_string(), (v + 1).to_string()];
                            let base = (u * k + v) * (1 + cv.q2);
                            row.extend(coef[base..base + 1 + cv.q2].iter().map(|x| num(*x)));
                            w.write_record(&row).map_err(|e| csv_err(&p, e))?;
                        }
                    }
                }
                Gamma::Difference { intercepts, slopes } => {
                    w.write_record(["from", "to", "intercept"]).map_err(|e| csv_err(&p, e))?;
                    for u in 0..k {
                        for v in (0..k).filter(|&v| v != u) {
                            w.write_record([(u + 1).to_string(), (v + 1).to_string(), num(intercepts[u * k + v])])
                                .map_err(|e| csv_err(&p, e))?;
                        }
                    }
                    let s = dir.join("gamma_slopes.csv");
                    let mut ws = writer(&s)?;
                    let mut h = vec!["state".to_string()];
                    h.extend((1..=cv.q2).map(|c| format!("x_{c}")));
                    ws.write_record(&h).map_err(|e| csv_err(&s, e))?;
                    for u in 1..k {
                        let mut row = vec![(u + 1).to_string()];
                        row.extend(slopes[(u - 1) * cv.q2..u * cv.q2].iter().map(|x| num(*x)));
                        ws.write_record(&row).map_err(|e| csv_err(&s, e))?;
                    }
                    ws.flush().map_err(|e| CliError::io(&s, e))?;
                }
            }
            w.flush().map_err(|e| CliError::io(&p, e))?;
        }
    }
    let p = dir.join("params.csv");
    let mut w = writer(&p)?;
    w.write_record(["name", "value"]).map_err(|e| csv_err(&p, e))?;
    for (name, v) in params.named_values() {
        w.write_record([name, num(v)]).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))
}

fn coef_label(c: usize) -> String {
    if c == 0 {
        "intercept".to_string()
    } else {
        format!("x_{c}")
    }
}

/// One row per parameter; `bias,se,rmse` columns per method.
pub fn write_mc_report(path: &Path, reports: &[MonteCarloReport]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut h = vec!["name".to_string(), "truth".to_string()];
    for r in reports {
        let m = r.method.name();
        h.extend([format!("{m}_bias"), format!("{m}_se"), format!("{m}_rmse")]);
    }
    w.write_record(&h).map_err(|e| csv_err(path, e))?;
    if let Some(first) = reports.first() {
        for (p, row) in first.rows.iter().enumerate() {
            let mut rec = vec![row.name.clone(), num(row.truth)];
            for r in reports {
                let s = &r.rows[p];
                rec.extend([num(s.bias), num(s.se), num(s.rmse)]);
            }
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Per-replication diagnostics; wall times only when `with_time`.
pub fn write_mc_diagnostics(path: &Path, reports: &[MonteCarloReport], with_time: bool) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut h = vec!["method", "rep", "converged", "iterations", "cycles", "error"];
    if with_time {
        h.push("wall_time");
    }
    w.write_record(&h).map_err(|e| csv_err(path, e))?;
    for r in reports {
        for d in &r.diagnostics {
            let mut rec = vec![
                r.method.name().to_string(),
                (d.rep + 1).to_string(),
                d.converged.to_string(),
                d.iterations.to_string(),
                d.cycles.map(|c| c.to_string()).unwrap_or_default(),
                d.error.clone().unwrap_or_default(),
            ];
            if with_time {
                rec.push(d.wall_time.map(num).unwrap_or_default());
            }
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_bootstrap(dir: &Path, reference: &ModelParams, res: &BootstrapResult) -> Result<(), CliError> {
    let p = dir.join("se.csv");
    let mut w = writer(&p)?;
    w.write_record(["name", "estimate", "se"]).map_err(|e| csv_err(&p, e))?;
    for ((name, est), se) in reference.named_values().into_iter().zip(&res.se) {
        w.write_record([name, num(est), num(*se)]).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))?;
    let p = dir.join("draws.csv");
    let mut w = writer(&p)?;
    let mut h = vec!["draw".to_string()];
    h.extend(res.names.iter().cloned());
    h.push("error".to_string());
    w.write_record(&h).map_err(|e| csv_err(&p, e))?;
    for (b, (d, e)) in res.draws.iter().zip(&res.errors).enumerate() {
        let mut rec = vec![(b + 1).to_string()];
        match d {
            Some(v) => rec.extend(v.iter().map(|x| num(*x))),
            None => rec.extend(std::iter::repeat_n(String::new(), res.names.len())),
        }
        rec.push(e.clone().unwrap_or_default());
        w.write_record(&rec).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))
}

pub fn write_scores(dir: &Path, table: &ScoreTable) -> Result<(), CliError> {
    let k = table.k;
    let p = dir.join("mu.csv");
    let mut w = writer(&p)?;
    w.write_record(state_header(&["item", "section"], k, "state")).map_err(|e| csv_err(&p, e))?;
    for (j, s) in table.section_map.iter().enumerate() {
        let mut row = vec![(j + 1).to_string(), (s + 1).to_string()];
        row.extend(table.mu[j * k..(j + 1) * k].iter().map(|x| num(*x)));
        w.write_record(&row).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))?;
    let p = dir.join("mu_bar.csv");
    let mut w = writer(&p)?;
    w.write_record(state_header(&["section"], k, "state")).map_err(|e| csv_err(&p, e))?;
    for (s, row) in table.mu_bar.chunks(k).enumerate() {
        let mut rec = vec![(s + 1).to_string()];
        rec.extend(row.iter().map(|x| num(*x)));
        w.write_record(&rec).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))?;
    let p = dir.join("state_order.csv");
    let mut w = writer(&p)?;
    w.write_record(["rank", "state"]).map_err(|e| csv_err(&p, e))?;
    for (rank, u) in table.state_order.iter().enumerate() {
        w.write_record([(rank + 1).to_string(), (u + 1).to_string()]).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))
}

/// `avg_initial.csv` and `avg_trans.csv` for the non-empty groups.
pub fn write_group_tables(dir: &Path, k: usize, labels: &[String], tables: &[GroupTables]) -> Result<(), CliError> {
    let p = dir.join("avg_initial.csv");
    let mut w = writer(&p)?;
    w.write_record(state_header(&["group", "units"], k, "state")).map_err(|e| csv_err(&p, e))?;
    for g in tables {
        let mut row = vec![labels[g.group].clone(), g.units.to_string()];
        row.extend(g.initial.iter().map(|x| num(*x)));
        w.write_record(&row).map_err(|e| csv_err(&p, e))?;
    }
    w.flush().map_err(|e| CliError::io(&p, e))?;
    let p = dir.join("avg_trans.csv");
    let mut w = writer(&p)?;
    w.write_record(state_header(&["group", "time", "from"], k, "to")).map_err(|e| csv_err(&p, e))?;
    for g in tables {
        for (step, block) in g.trans.chunks(k * k).enumerate() {
            for u in 0..k {
                let mut row = vec![labels[g.group].clone(), (step + 2).to_string(), (u + 1).to_string()];
                row.extend(block[u * k..(u + 1) * k].iter().map(|x| num(*x)));
                w.write_record(&row).map_err(|e| csv_err(&p, e))?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(&p, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}
