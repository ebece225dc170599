mod common;

use common::*;
use fasm::cohort::simulate_cohort;
use fasm::coxfit::{fit, log_partial_likelihood, FitConfig, Ties};
use fasm::error::Error;
use fasm::pipeline::biased_cohort_spec;
use fasm::rashomon::performance_r2pl;

#[test]
fn objective_matches_direct_summation() {
    for seed in 0..50 {
        let (ds, names, beta) = random_cox_problem(seed);
        for (ties, efron) in [(Ties::Efron, true), (Ties::Breslow, false)] {
            let lib = log_partial_likelihood(&ds, &names, &beta, ties)
                .unwrap()
                .value;
            let direct = cox_loglik(&ds, &beta, efron);
            assert!(
                (lib - direct).abs() <= 1e-10 * direct.abs().max(1.0),
                "seed {seed}: {lib} vs {direct}"
            );
        }
    }
}

#[test]
fn derivatives_match_central_differences() {
    for seed in 0..50 {
        let (ds, names, beta) = random_cox_problem(seed);
        for ties in [Ties::Efron, Ties::Breslow] {
            let (g, h, eig) = derivative_check(&ds, &names, &beta, ties);
            assert!(g < 1e-5, "seed {seed} {ties:?}: gradient rel err {g}");
            assert!(h < 1e-5, "seed {seed} {ties:?}: hessian rel err {h}");
            assert!(eig <= 1e-8, "seed {seed} {ties:?}: max eigenvalue {eig}");
        }
    }
}

#[test]
fn listed_fixture_is_perfectly_separated() {
    let ds = six_subject_fixture(SPEC_FIXTURE_X);
    let names = vec!["x1".to_string()];
    let (argmax, _) = grid_argmax(|b| cox_loglik(&ds, &[b], true));
    assert_eq!(argmax, 5.0);
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=100 {
        let v = cox_loglik(&ds, &[-5.0 + 0.1 * k as f64], true);
        assert!(v > prev);
        prev = v;
    }
    let err = fit(&ds, &names, &FitConfig::default(), Ties::Efron).unwrap_err();
    assert!(matches!(err, Error::Separation { .. }), "{err}");
}

#[test]
fn newton_matches_grid_search_on_overlapping_fixture() {
    let ds = six_subject_fixture([2.1, 1.3, 1.7, 0.4, 0.8, 0.1]);
    let names = vec!["x1".to_string()];
    let (argmax, best) = grid_argmax(|b| cox_loglik(&ds, &[b], true));
    let (model, summary) = fit(&ds, &names, &FitConfig::default(), Ties::Efron).unwrap();
    assert!(
        (model.beta[0] - argmax).abs() <= 2e-3,
        "{} vs {argmax}",
        model.beta[0]
    );
    assert!(summary.converged);

    let null = cox_loglik(&ds, &[0.0], true);
    let expected = 1.0 - (-2.0 * (best - null) / 6.0).exp();
    let r2 = performance_r2pl(&ds, &names, &[argmax], Ties::Efron).unwrap();
    assert!((r2 - expected).abs() < 1e-9, "{r2} vs {expected}");
}

#[test]
fn large_simulation_recovers_true_coefficients() {
    let mut covered = 0;
    for seed in 0..20 {
        let spec = biased_cohort_spec(5000, seed);
        let ds = simulate_cohort(&spec).unwrap();
        let truth = spec.beta_vector();
        let (model, summary) = fit(
            &ds,
            &spec.variable_names(),
            &FitConfig::default(),
            Ties::Efron,
        )
        .unwrap();
        let inside = (0..truth.len())
            .all(|k| (model.beta[k] - truth[k]).abs() <= 3.0 * summary.standard_errors[k]);
        covered += usize::from(inside);
    }
    assert!(covered >= 19, "{covered}/20 seeds within 3 SE");
}

#[test]
fn efron_equals_breslow_without_ties() {
    for seed in 0..20 {
        let (ds, names, beta) = random_cox_problem(seed);
        // Break ties by a per-row offset.
        let subjects = ds
            .subjects()
            .iter()
            .enumerate()
            .map(|(i, s)| fasm::cohort::Subject {
                time: s.time + i as f64 * 1e-3,
                ..s.clone()
            })
            .collect();
        let ds = fasm::cohort::SurvivalDataset::new(names.clone(), subjects).unwrap();
        let e = log_partial_likelihood(&ds, &names, &beta, Ties::Efron)
            .unwrap()
            .value;
        let b = log_partial_likelihood(&ds, &names, &beta, Ties::Breslow)
            .unwrap()
            .value;
        assert!((e - b).abs() <= 1e-12 * e.abs().max(1.0));
    }
}
