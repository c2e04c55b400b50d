use lmest_core::em::{em_basic_from, em_cov_from, em_lc_from, fit_basic_lm_fml, fit_cov_lm_fml, fit_lc_pooled, random_start, LatentSpec};
use lmest_core::model::{e_step, initial_probs, transition_probs};
use lmest_core::simulate::{gen_panel, scenario_preset};
use lmest_core::threestep::{fit_3s, fit_3s_imp, step2_moments, step3_basic};
use lmest_core::*;

fn basic_data(r: usize, n: usize, seed: u64) -> ResponsePanel {
    let mut s = scenario_preset("basic-s1").unwrap().with_items(r).unwrap();
    s.n = n;
    gen_panel(&s, seed).unwrap().responses
}

fn cov_data(seed: u64) -> (ResponsePanel, CovariatePanel) {
    let d = gen_panel(&scenario_preset("cov-s1").unwrap(), seed).unwrap();
    (d.responses, d.covariates.unwrap())
}

fn assert_monotone(trace: &[f64], what: &str) {
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "{what}: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn em_never_decreases_the_loglik() {
    let panel = basic_data(5, 500, 1);
    let (cpanel, covs) = cov_data(2);
    let pooled = panel.pooled();
    let opts = FitOptions {
        max_iter: 200,
        rel_tol: 1e-12,
        ..FitOptions::default()
    };
    let spec = LatentSpec::Covariate {
        q1: 2,
        q2: 2,
        layout: GammaLayout::Pairwise,
    };
    for seed in 0..20 {
        let start = random_start(2, &panel, LatentSpec::Basic, seed, 1.0).unwrap();
        let run = em_basic_from(&panel, start, &opts, true).unwrap();
        assert_monotone(&run.trace, "basic");

        let start = random_start(2, &pooled, LatentSpec::Basic, seed, 1.0).unwrap();
        let LatentParams::Basic(chain) = start.latent else { unreachable!() };
        let run = em_lc_from(&pooled, start.meas, chain.pi, &opts).unwrap();
        assert_monotone(&run.trace, "pooled");
    }
    let short = FitOptions { max_iter: 60, ..opts };
    for seed in 0..20 {
        let start = random_start(2, &cpanel, spec, seed, 1.0).unwrap();
        let run = em_cov_from(&cpanel, &covs, start, &short).unwrap();
        assert_monotone(&run.trace, "covariate");
    }
}

#[test]
fn iterates_stay_stochastic() {
    let panel = basic_data(3, 200, 3);
    let start = random_start(3, &panel, LatentSpec::Basic, 4, 1.0).unwrap();
    for m in 1..15 {
        let opts = FitOptions {
            max_iter: m,
            rel_tol: 1e-300,
            ..FitOptions::default()
        };
        let run = em_basic_from(&panel, start.clone(), &opts, true).unwrap();
        run.params.validate().unwrap();
    }
}

#[test]
fn single_occasion_basic_em_is_the_latent_class_em() {
    let panel = basic_data(4, 300, 5).pooled();
    assert_eq!(panel.occasions(), 1);
    let opts = FitOptions::default();
    for seed in 0..3 {
        let start = random_start(2, &panel, LatentSpec::Basic, seed, 1.0).unwrap();
        let LatentParams::Basic(chain) = &start.latent else { unreachable!() };
        let lc = em_lc_from(&panel, start.meas.clone(), chain.pi.clone(), &opts).unwrap();
        let lm = em_basic_from(&panel, start, &opts, true).unwrap();
        assert_eq!(lc.iterations, lm.iterations);
        assert!((lc.loglik - lm.loglik).abs() < 1e-10);
        for (a, b) in lc.params.meas.phi.iter().flatten().zip(lm.params.meas.phi.iter().flatten()) {
            assert!((a - b).abs() < 1e-10);
        }
        let (LatentParams::Basic(a), LatentParams::Basic(b)) = (&lc.params.latent, &lm.params.latent) else { unreachable!() };
        for (x, y) in a.pi.iter().zip(&b.pi) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn covariate_model_without_covariates_is_the_basic_model() {
    let panel = basic_data(5, 400, 6);
    let covs = CovariatePanel::empty(panel.n(), panel.occasions());
    let opts = FitOptions {
        n_starts: 4,
        rel_tol: 1e-10,
        ..FitOptions::default()
    };
    let a = fit_basic_lm_fml(&panel, 2, &opts).unwrap();
    for layout in [GammaLayout::Pairwise, GammaLayout::Difference] {
        let b = fit_cov_lm_fml(&panel, &covs, 2, layout, &opts).unwrap();
        assert!((a.loglik - b.loglik).abs() < 1e-6, "{layout:?}: {} vs {}", a.loglik, b.loglik);
    }
}

#[test]
fn single_state_fit_is_independence_model() {
    let panel = basic_data(3, 200, 7);
    let fit = fit_basic_lm_fml(&panel, 1, &FitOptions::default()).unwrap();
    let freq = lmest_core::em::empirical_frequencies(&panel);
    let mut ll = 0.0;
    for (j, f) in freq.iter().enumerate() {
        for (y, &p) in f.iter().enumerate() {
            assert!((fit.params.meas.get(j, y, 0) - p).abs() < 1e-10);
        }
        for i in 0..panel.n() {
            for t in 0..panel.occasions() {
                if let Some(y) = panel.get(i, t, j) {
                    ll += f[y].ln();
                }
            }
        }
    }
    assert!((fit.loglik - ll).abs() < 1e-8);
}

#[test]
fn generating_parameters_are_nearly_a_fixed_point() {
    let s = scenario_preset("basic-s1").unwrap();
    let panel = basic_data(5, 20000, 8);
    let opts = FitOptions {
        max_iter: 1,
        rel_tol: 1e-300,
        ..FitOptions::default()
    };
    let run = em_basic_from(&panel, s.truth.clone(), &opts, true).unwrap();
    assert_eq!(run.iterations, 1);
    for ((name, a), (_, b)) in run.params.named_values().into_iter().zip(s.truth.named_values()) {
        assert!((a - b).abs() < 0.02, "{name}: {a} vs {b}");
    }
}

#[test]
fn posterior_pairs_marginalize_to_singles() {
    let s = scenario_preset("basic-s2").unwrap();
    let panel = gen_panel(&s, 9).unwrap().responses;
    let mom = e_step(&s.truth.meas, &s.truth.latent, None, &panel).unwrap();
    let k = s.k;
    for i in 0..panel.n() {
        for t in 1..panel.occasions() {
            let bb = mom.bb(i, t);
            let prev = mom.b(i, t - 1);
            let cur = mom.b(i, t);
            for u in 0..k {
                let row: f64 = (0..k).map(|v| bb[u * k + v]).sum();
                let col: f64 = (0..k).map(|v| bb[v * k + u]).sum();
                assert!((row - prev[u]).abs() < 1e-8);
                assert!((col - cur[u]).abs() < 1e-8);
            }
        }
    }
}

fn three_step_opts(improved: bool) -> ThreeStepOptions {
    ThreeStepOptions {
        improved,
        lc_opts: FitOptions {
            n_starts: 3,
            ..FitOptions::default()
        },
        ..ThreeStepOptions::default()
    }
}

#[test]
fn three_step_intercept_only_matches_basic() {
    let panel = basic_data(5, 500, 10);
    let covs = CovariatePanel::empty(panel.n(), panel.occasions());
    for improved in [false, true] {
        let opts = three_step_opts(improved);
        let fit = if improved { fit_3s_imp } else { fit_3s };
        let a = fit(&panel, None, 2, GammaLayout::Pairwise, &opts).unwrap();
        let b = fit(&panel, Some(&covs), 2, GammaLayout::Pairwise, &opts).unwrap();
        let LatentParams::Basic(chain) = &a.params.latent else { panic!() };
        let LatentParams::Covariate(cov) = &b.params.latent else { panic!() };
        let pi = initial_probs(cov, &[]).unwrap();
        let trans = transition_probs(cov, &[]).unwrap();
        // The iterated fits stop within imp_tol of the same fixed point.
        let tol = if improved { 1e-5 } else { 1e-8 };
        for (x, y) in chain.pi.iter().zip(&pi).chain(chain.trans.iter().zip(&trans)) {
            assert!((x - y).abs() < tol, "improved={improved}: {x} vs {y}");
        }
        assert_eq!(a.params.meas, b.params.meas);
    }
}

#[test]
fn step_two_rows_are_normalized() {
    let panel = basic_data(5, 200, 11);
    let lc = fit_lc_pooled(&panel, 2, &FitOptions::default()).unwrap();
    let mom = step2_moments(&lc, &panel).unwrap();
    for i in 0..panel.n() {
        for t in 0..panel.occasions() {
            assert!((mom.b(i, t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if t > 0 {
                assert!((mom.bb(i, t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn relabeling_step_one_relabels_step_three() {
    let panel = gen_panel(&scenario_preset("basic-s2").unwrap(), 12).unwrap().responses;
    let lc = fit_lc_pooled(&panel, 3, &FitOptions::default()).unwrap();
    let (chain, _) = step3_basic(&step2_moments(&lc, &panel).unwrap());
    let perm = [2, 0, 1];
    let mut lc2 = lc.clone();
    lc2.phi = lc.phi.permuted(&perm);
    lc2.rho = perm.iter().map(|&u| lc.rho[u]).collect();
    let (chain2, _) = step3_basic(&step2_moments(&lc2, &panel).unwrap());
    let expect = chain.permuted(&perm);
    for (a, b) in chain2.pi.iter().zip(&expect.pi).chain(chain2.trans.iter().zip(&expect.trans)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn three_step_with_separated_states_matches_fml() {
    let s = scenario_preset("basic-s3").unwrap().with_items(20).unwrap();
    let panel = gen_panel(&s, 13).unwrap().responses;
    let opts = FitOptions {
        n_starts: 3,
        ..FitOptions::default()
    };
    let fml = fit_basic_lm_fml(&panel, 2, &opts).unwrap();
    let ts = fit_3s(&panel, None, 2, GammaLayout::Pairwise, &three_step_opts(false)).unwrap();
    let (a, _) = lmest_core::simulate::align_states(&fml.params, &s.truth).unwrap();
    let (b, _) = lmest_core::simulate::align_states(&ts.params, &s.truth).unwrap();
    let (LatentParams::Basic(x), LatentParams::Basic(y)) = (&a.latent, &b.latent) else { panic!() };
    for (p, q) in x.trans.iter().zip(&y.trans) {
        assert!((p - q).abs() < 0.01, "{p} vs {q}");
    }
}

#[test]
fn improved_three_step_starts_from_plain_and_keeps_phi() {
    let panel = basic_data(5, 300, 14);
    let a = fit_3s(&panel, None, 2, GammaLayout::Pairwise, &three_step_opts(false)).unwrap();
    let b = fit_3s_imp(&panel, None, 2, GammaLayout::Pairwise, &three_step_opts(true)).unwrap();
    assert_eq!(a.params.meas, b.params.meas);
    assert_eq!(a.loglik, b.loglik);
    assert!(b.cycles.unwrap() >= 1);
    assert!(b.converged);
}
