//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Monte Carlo criteria use 100 replications (50 for the trend check). With
//! `LMEST_FAST=1` they use 25 and every Monte Carlo tolerance is doubled.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lmest::parallel::replications;
use lmest_core::em::{em_basic_from, em_cov_from, em_lc_from, fit_basic_lm_fml, random_start, LatentSpec};
use lmest_core::mlogit::{TransitionData, WeightedLogitProblem};
use lmest_core::model::forward_backward;
use lmest_core::montecarlo::{assemble_reports, EstimatorConfig, Method, MonteCarloReport, ParamSummary, ReplicationOutcome};
use lmest_core::rng::{rng_from, Rng};
use lmest_core::simulate::{gen_panel, scenario_preset, Scenario};
use lmest_core::threestep::fit_3s;
use lmest_core::*;
use rand::Rng as _;

const SEED: u64 = 20240;

struct Run {
    fast: bool,
    results: Vec<(usize, bool, String)>,
}

impl Run {
    fn report(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        let line = format!("[{id:>2}] {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.results.push((id, pass, line));
    }

    fn scale(&self) -> f64 {
        if self.fast {
            2.0
        } else {
            1.0
        }
    }

    fn reps(&self, full: usize) -> usize {
        if self.fast {
            25
        } else {
            full
        }
    }

    /// `[lo, hi]` widened about its midpoint in fast mode.
    fn interval(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * self.scale();
        (mid - half, mid + half)
    }
}

fn simplex(rng: &mut Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn oracle(run: &mut Run) {
    let mut rng = rng_from(SEED);
    let mut worst_ll: f64 = 0.0;
    let mut worst_post: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let t_len = rng.random_range(1..=4);
        let r = rng.random_range(1..=2);
        let cats: Vec<usize> = (0..r).map(|_| rng.random_range(2..=3)).collect();
        let phi = cats
            .iter()
            .map(|&c| {
                let cols: Vec<Vec<f64>> = (0..k).map(|_| simplex(&mut rng, c)).collect();
                (0..c * k).map(|x| cols[x % k][x / k]).collect()
            })
            .collect();
        let meas = MeasurementParams::new(k, cats.clone(), phi).unwrap();
        let pi = simplex(&mut rng, k);
        let trans: Vec<f64> = (0..k).flat_map(|_| simplex(&mut rng, k)).collect();
        let chain = LatentChainParams::new(pi.clone(), trans.clone()).unwrap();
        let latent = LatentParams::Basic(chain);
        let n = 2;
        let y: Vec<u16> = (0..n * t_len)
            .flat_map(|_| cats.clone())
            .map(|c| if rng.random::<f64>() < 0.15 { MISSING } else { rng.random_range(0..c) as u16 })
            .collect();
        let panel = ResponsePanel::new(n, t_len, cats.clone(), y).unwrap();
        for i in 0..n {
            let mut lik = 0.0;
            let mut b = vec![0.0; t_len * k];
            let mut bb = vec![0.0; t_len.saturating_sub(1) * k * k];
            for code in 0..k.pow(t_len as u32) {
                let path: Vec<usize> = (0..t_len).map(|t| code / k.pow(t as u32) % k).collect();
                let mut p = pi[path[0]];
                for t in 1..t_len {
                    p *= trans[path[t - 1] * k + path[t]];
                }
                for (t, &u) in path.iter().enumerate() {
                    for j in 0..r {
                        if let Some(v) = panel.get(i, t, j) {
                            p *= meas.get(j, v, u);
                        }
                    }
                }
                lik += p;
                for (t, &u) in path.iter().enumerate() {
                    b[t * k + u] += p;
                    if t > 0 {
                        bb[((t - 1) * k + path[t - 1]) * k + u] += p;
                    }
                }
            }
            let post = forward_backward(&meas, &latent, None, &panel, i).unwrap();
            worst_ll = worst_ll.max(((post.loglik - lik.ln()) / lik.ln().abs().max(1e-300)).abs());
            for (x, y) in post.b.iter().zip(&b).chain(post.bb.iter().zip(&bb)) {
                worst_post = worst_post.max((x - y / lik).abs());
            }
        }
    }
    let pass = worst_ll <= 1e-10 && worst_post <= 1e-10;
    run.report(
        1,
        "forward-backward vs path enumeration",
        pass,
        format!("max rel loglik error {worst_ll:.2e}, max posterior error {worst_post:.2e} (limit 1e-10)"),
    );
}

fn monotonicity(run: &mut Run) {
    let basic = gen_panel(&scenario_preset("basic-s1").unwrap(), SEED).unwrap().responses;
    let cov = gen_panel(&scenario_preset("cov-s1").unwrap(), SEED).unwrap();
    let (cpanel, covs) = (cov.responses, cov.covariates.unwrap());
    let pooled = basic.pooled();
    let opts = FitOptions {
        rel_tol: 1e-12,
        max_iter: 300,
        ..FitOptions::default()
    };
    let spec = LatentSpec::Covariate {
        q1: 2,
        q2: 2,
        layout: GammaLayout::Pairwise,
    };
    let drop = |trace: &[f64]| trace.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let (mut b, mut c, mut l) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in 0..20 {
        let start = random_start(2, &basic, LatentSpec::Basic, s, 1.0).unwrap();
        b = b.max(drop(&em_basic_from(&basic, start, &opts, true).unwrap().trace));
        let start = random_start(2, &cpanel, spec, s, 1.0).unwrap();
        c = c.max(drop(&em_cov_from(&cpanel, &covs, start, &opts).unwrap().trace));
        let start = random_start(2, &pooled, LatentSpec::Basic, s, 1.0).unwrap();
        let LatentParams::Basic(ch) = start.latent else { unreachable!() };
        l = l.max(drop(&em_lc_from(&pooled, start.meas, ch.pi, &opts).unwrap().trace));
    }
    let pass = b <= 1e-9 && c <= 1e-9 && l <= 1e-9;
    run.report(
        2,
        "EM monotonicity over 20 starts",
        pass,
        format!("largest loglik decrease: basic {b:.2e}, covariate {c:.2e}, pooled {l:.2e} (limit 1e-9)"),
    );
}

fn central(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    a.iter()
        .zip(n)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn gradients(run: &mut Run) {
    let mut rng = rng_from(SEED + 7);
    let n = 40;
    let mut worst = [0.0f64; 3];
    for _ in 0..20 {
        let (k, q) = (3, 2);
        let design: Vec<f64> = (0..n * q).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let p = WeightedLogitProblem {
            k,
            q,
            design: design.clone(),
            weights: (0..n).flat_map(|_| simplex(&mut rng, k)).collect(),
            ref_class: 0,
        };
        let x: Vec<f64> = (0..p.n_params()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let g = p.objective(&x).unwrap().1;
        worst[0] = worst[0].max(rel_err(&g, &central(|c| p.objective(c).unwrap().0, &x)));
        let data = TransitionData {
            k,
            q,
            design,
            weights: (0..n).flat_map(|_| simplex(&mut rng, k * k)).collect(),
        };
        let coef: Vec<f64> = (0..k * k * (1 + q)).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let pair = |v: &[f64]| {
            let mut c = v.to_vec();
            for u in 0..k {
                c[(u * k + u) * (1 + q)..(u * k + u + 1) * (1 + q)].fill(0.0);
            }
            Gamma::Pairwise { coef: c }
        };
        let g = data.objective(&pair(&coef)).unwrap().1;
        let num = central(|v| data.objective(&pair(v)).unwrap().0, &coef);
        // Diagonal blocks are fixed at zero; compare the free coefficients.
        let free: Vec<usize> = (0..coef.len()).filter(|&i| (i / (1 + q)) % (k + 1) != 0).collect();
        let (ga, na): (Vec<f64>, Vec<f64>) = free.iter().map(|&i| (g[i], num[i])).unzip();
        worst[1] = worst[1].max(rel_err(&ga, &na));
        let split = k * k;
        let diff = |v: &[f64]| {
            let mut ints = v[..split].to_vec();
            for u in 0..k {
                ints[u * k + u] = 0.0;
            }
            Gamma::Difference {
                intercepts: ints,
                slopes: v[split..].to_vec(),
            }
        };
        let x: Vec<f64> = (0..split + (k - 1) * q).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let g = data.objective(&diff(&x)).unwrap().1;
        let num = central(|v| data.objective(&diff(v)).unwrap().0, &x);
        let free: Vec<usize> = (0..x.len()).filter(|&i| i >= split || i % (k + 1) != 0).collect();
        let (ga, na): (Vec<f64>, Vec<f64>) = free.iter().map(|&i| (g[i], num[i])).unzip();
        worst[2] = worst[2].max(rel_err(&ga, &na));
    }
    let pass = worst.iter().all(|&w| w <= 1e-5);
    run.report(
        7,
        "analytic vs finite-difference gradients",
        pass,
        format!(
            "max rel error: initial {:.2e}, pairwise {:.2e}, difference {:.2e} (limit 1e-5)",
            worst[0], worst[1], worst[2]
        ),
    );
}

fn scenario(name: &str, r: usize) -> Scenario {
    scenario_preset(name).unwrap().with_items(r).unwrap()
}

fn simulate(s: &Scenario, methods: &[Method], reps: usize) -> Vec<Vec<ReplicationOutcome>> {
    let t0 = Instant::now();
    let out = replications(s, methods, &EstimatorConfig::default(), 0..reps, SEED, None).unwrap();
    eprintln!("  {} r={} reps={} ({:.0} s)", s.name, s.r(), reps, t0.elapsed().as_secs_f64());
    out
}

fn reports(s: &Scenario, methods: &[Method], outcomes: &[Vec<ReplicationOutcome>]) -> Vec<MonteCarloReport> {
    assemble_reports(s, methods, outcomes).unwrap()
}

fn pick(reports: &[MonteCarloReport], m: Method) -> &MonteCarloReport {
    reports.iter().find(|r| r.method == m).unwrap()
}

fn phi_rows(r: &MonteCarloReport) -> impl Iterator<Item = &ParamSummary> {
    r.rows.iter().filter(|p| p.name.starts_with("phi_") && p.name.split('_').nth(2) == Some("1"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_cycles(r: &MonteCarloReport) -> f64 {
    median(r.diagnostics.iter().filter_map(|d| d.cycles).map(|c| c as f64).collect())
}

fn monte_carlo(run: &mut Run) {
    let reps = run.reps(100);
    let trend_reps = run.reps(50);
    let all = [Method::Fml, Method::ThreeStep, Method::ThreeStepImp];
    let ts = [Method::ThreeStep, Method::ThreeStepImp];

    let s1 = scenario("basic-s1", 5);
    let b5 = simulate(&s1, &all, reps);
    let c1 = scenario("cov-s1", 5);
    let c5 = simulate(&c1, &all, reps);
    let b5r = reports(&s1, &all, &b5);
    let c5r = reports(&c1, &all, &c5);

    // Response-table precision.
    let (flo, fhi) = run.interval(0.010, 0.022);
    let (tlo, thi) = run.interval(0.015, 0.028);
    let bias_lim = 0.01 * run.scale();
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, reps_) in [("basic", &b5r), ("covariate", &c5r)] {
        for (m, lo, hi) in [(Method::Fml, flo, fhi), (Method::ThreeStep, tlo, thi)] {
            let r = pick(reps_, m);
            let se: Vec<f64> = phi_rows(r).map(|p| p.se).collect();
            let bias = phi_rows(r).map(|p| p.bias.abs()).fold(0.0, f64::max);
            let (smin, smax) = (se.iter().cloned().fold(f64::INFINITY, f64::min), se.iter().cloned().fold(0.0, f64::max));
            ok &= smin >= lo && smax <= hi && bias <= bias_lim && r.failures == 0;
            parts.push(format!("{label} {} se {smin:.4}-{smax:.4} max|bias| {bias:.4}", m.name()));
        }
    }
    run.report(
        3,
        "response-table se and bias at r=5",
        ok,
        format!("{} (se FML in [{flo:.3},{fhi:.3}], 3S in [{tlo:.3},{thi:.3}], |bias| <= {bias_lim})", parts.join("; ")),
    );

    // Transition attenuation.
    let s50 = scenario("basic-s1", 50);
    let b50 = simulate(&s50, &ts, reps);
    let b50r = reports(&s50, &ts, &b50);
    let t3 = pick(&b5r, Method::ThreeStep).row("trans_1_1").unwrap().bias;
    let ti = pick(&b5r, Method::ThreeStepImp).row("trans_1_1").unwrap().bias;
    let t50 = pick(&b50r, Method::ThreeStep).row("trans_1_1").unwrap().bias;
    let (alo, ahi) = run.interval(-0.36, -0.24);
    let (ilo, ihi) = run.interval(-0.23, -0.13);
    let lim = 0.02 * run.scale();
    run.report(
        4,
        "three-step transition attenuation",
        (alo..=ahi).contains(&t3) && (ilo..=ihi).contains(&ti) && t50.abs() <= lim,
        format!(
            "3S bias(p11) r=5 {t3:.4} in [{alo:.2},{ahi:.2}]; r=50 {t50:.4} within {lim}; 3S-IMP r=5 {ti:.4} in [{ilo:.2},{ihi:.2}]"
        ),
    );

    // Separated states.
    let s3 = scenario("basic-s3", 20);
    let s3r = reports(&s3, &[Method::ThreeStep], &simulate(&s3, &[Method::ThreeStep], reps));
    let worst = s3r[0]
        .rows
        .iter()
        .filter(|p| p.name.starts_with("trans_"))
        .map(|p| p.bias.abs())
        .fold(0.0, f64::max);
    let lim = 0.005 * run.scale();
    run.report(
        5,
        "separated states at r=20",
        worst <= lim,
        format!("3S max |bias| of transitions {worst:.4} (limit {lim})"),
    );

    // Covariate attenuation.
    let c50s = scenario("cov-s1", 50);
    let c50r = reports(&c50s, &[Method::ThreeStep], &simulate(&c50s, &[Method::ThreeStep], reps));
    let name = "gamma_1_2_0";
    let g3 = pick(&c5r, Method::ThreeStep).row(name).unwrap().bias;
    let gi = pick(&c5r, Method::ThreeStepImp).row(name).unwrap().bias;
    let g50 = c50r[0].row(name).unwrap().bias;
    let (glo, ghi) = run.interval(1.5, 2.1);
    let (jlo, jhi) = run.interval(1.0, 1.5);
    let lim = 0.12 * run.scale();
    run.report(
        6,
        "covariate transition intercept attenuation",
        (glo..=ghi).contains(&g3) && (jlo..=jhi).contains(&gi) && g50.abs() <= lim,
        format!(
            "3S bias r=5 {g3:.4} in [{glo:.2},{ghi:.2}]; r=50 {g50:.4} within {lim:.2}; 3S-IMP r=5 {gi:.4} in [{jlo:.2},{jhi:.2}]"
        ),
    );

    // Consistency trend, on the first replications of each run.
    let mut trend: Vec<(usize, Vec<MonteCarloReport>)> = Vec::new();
    trend.push((5, reports(&s1, &ts, &b5[..trend_reps])));
    for r in [10, 20] {
        let s = scenario("basic-s1", r);
        trend.push((r, reports(&s, &ts, &simulate(&s, &ts, trend_reps))));
    }
    trend.push((50, reports(&s50, &ts, &b50[..trend_reps])));
    let mut ok = true;
    let mut parts = Vec::new();
    for m in ts {
        for name in ["trans_1_2", "trans_2_1"] {
            let seq: Vec<f64> = trend.iter().map(|(_, rs)| pick(rs, m).row(name).unwrap().rmse).collect();
            ok &= seq.windows(2).all(|w| w[1] < w[0]);
            parts.push(format!(
                "{} {name} {}",
                m.name(),
                seq.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ")
            ));
        }
    }
    run.report(8, "rmse of off-diagonal transitions falls with r", ok, parts.join("; "));

    // Iteration counts.
    let m5 = median_cycles(pick(&b5r, Method::ThreeStepImp));
    let m50 = median_cycles(pick(&b50r, Method::ThreeStepImp));
    let (clo, chi) = run.interval(15.0, 40.0);
    let clim = 8.0 * run.scale();
    run.report(
        9,
        "iterated three-step cycle counts",
        (clo..=chi).contains(&m5) && m50 <= clim,
        format!("median cycles r=5 {m5} in [{clo},{chi}]; r=50 {m50} <= {clim}"),
    );
}

fn speed(run: &mut Run) {
    let s = scenario("basic-s1", 50);
    let panel = gen_panel(&s, SEED).unwrap().responses;
    let mut fml = Vec::new();
    let mut three = Vec::new();
    for i in 0..10 {
        let opts = FitOptions {
            seed: i,
            ..FitOptions::default()
        };
        let t0 = Instant::now();
        fit_basic_lm_fml(&panel, 2, &opts).unwrap();
        fml.push(t0.elapsed().as_secs_f64());
        let ts = ThreeStepOptions {
            lc_opts: opts,
            ..ThreeStepOptions::default()
        };
        let t0 = Instant::now();
        fit_3s(&panel, None, 2, GammaLayout::Pairwise, &ts).unwrap();
        three.push(t0.elapsed().as_secs_f64());
    }
    let (f, t) = (median(fml), median(three));
    run.report(
        10,
        "three-step faster than full likelihood",
        t < f,
        format!("median wall time over 10 fits at n=500, T=5, r=50: 3S {t:.3} s, FML {f:.3} s"),
    );
}

fn lmest(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lmest"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(run: &mut Run) {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path();
    let sim = base.join("sim");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut ok = lmest(&["simulate", "cov-s1", "--seed", "11", "--out", &s(&sim)]);
    let resp = s(&sim.join("responses.csv"));
    let covs = s(&sim.join("covariates.csv"));
    let phi = base.join("phi.csv");
    std::fs::copy(sim.join("truth/phi.csv"), &phi).unwrap();
    let sections = base.join("sections.csv");
    std::fs::write(&sections, "item,section\n1,1\n2,1\n3,2\n4,2\n5,2\n").unwrap();
    let mut compared = 0;
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let root = base.join(format!("run{i}"));
        let o = |name: &str| s(&root.join(name));
        let commands: Vec<Vec<String>> = vec![
            vec!["simulate".into(), "cov-s1".into(), "--seed".into(), "11".into(), "--out".into(), o("simulate")],
            vec![
                "fit".into(),
                "--responses".into(),
                resp.clone(),
                "--covariates".into(),
                covs.clone(),
                "--method".into(),
                "3s-imp".into(),
                "--k".into(),
                "2".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                o("fit"),
            ],
            vec![
                "montecarlo".into(),
                "basic-s3".into(),
                "--methods".into(),
                "fml,3s,3s-imp".into(),
                "--reps".into(),
                "4".into(),
                "--seed".into(),
                "3".into(),
                "--out".into(),
                o("mc"),
            ],
            vec![
                "bootstrap".into(),
                "--responses".into(),
                resp.clone(),
                "--method".into(),
                "3s".into(),
                "--k".into(),
                "2".into(),
                "--draws".into(),
                "6".into(),
                "--seed".into(),
                "2".into(),
                "--out".into(),
                o("boot"),
            ],
            vec!["scores".into(), "--phi".into(), s(&phi), "--sections".into(), s(&sections), "--pivot".into(), "2".into(), "--out".into(), o("scores")],
        ];
        for mut c in commands {
            c.extend(["--threads".to_string(), threads.to_string()]);
            let args: Vec<&str> = c.iter().map(String::as_str).collect();
            ok &= lmest(&args);
        }
    }
    let (a, b) = (files(&base.join("run0")), files(&base.join("run1")));
    ok &= a.len() == b.len() && !a.is_empty();
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        ok &= na == nb && da == db;
        compared += 1;
    }
    run.report(
        11,
        "byte-identical outputs across repeats and thread counts",
        ok,
        format!("{compared} files compared over simulate, fit, montecarlo, bootstrap and scores (1 vs 3 threads)"),
    );
}

fn main() {
    let fast = std::env::var("LMEST_FAST").map(|v| v == "1").unwrap_or(false);
    let mut run = Run {
        fast,
        results: Vec::new(),
    };
    println!("acceptance ({} mode)", if fast { "fast: 25 reps, tolerances x2" } else { "full" });
    oracle(&mut run);
    monotonicity(&mut run);
    monte_carlo(&mut run);
    gradients(&mut run);
    speed(&mut run);
    determinism(&mut run);
    run.results.sort_by_key(|r| r.0);
    println!("summary:");
    for r in &run.results {
        println!("{}", r.2);
    }
    let failed: Vec<usize> = run.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", run.results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
