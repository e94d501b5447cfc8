use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vinesign::copula::{BivariateCopula, Family};
use vinesign::dvine::{SignLikelihoodTable, VineSpec};
use vinesign::estimate::{
    fit_sequential, fit_tree1, parse_candidates, tau_initializer, EstimationConfig, FamilyPolicy,
};

fn iid_signs(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

fn gaussian(truncation: usize) -> EstimationConfig {
    EstimationConfig {
        truncation,
        ..Default::default()
    }
}

fn rho(c: &BivariateCopula) -> f64 {
    c.parameter().unwrap_or(0.0)
}

#[test]
fn iid_signs_give_small_correlation() {
    let s = iid_signs(2000, 1);
    let fit = fit_tree1(&s, &vec![0.5; 2000], &gaussian(1)).unwrap();
    assert!(rho(&fit.copula).abs() < 0.06, "{}", fit.copula);
    assert_eq!(fit.windows, 1999);
}

#[test]
fn alternating_signs_give_negative_correlation() {
    let s: Vec<bool> = (0..200).map(|t| t % 2 == 0).collect();
    let fit = fit_tree1(&s, &vec![0.5; 200], &gaussian(1)).unwrap();
    assert!(rho(&fit.copula) < -0.5, "{}", fit.copula);
}

#[test]
fn extreme_margins_keep_the_likelihood_finite() {
    let s = iid_signs(300, 2);
    let margins: Vec<f64> = (0..300)
        .map(|t| match t % 3 {
            0 => 0.0,
            1 => 1.0,
            _ => 0.5,
        })
        .collect();
    let fit = fit_sequential(&s, &margins, &gaussian(2)).unwrap();
    assert!(fit.loglik().is_finite());
    assert!(fit.trees.iter().all(|t| t.loglik.is_finite()));
}

#[test]
fn truncation_one_leaves_later_trees_independent() {
    let s = iid_signs(200, 3);
    let fit = fit_sequential(&s, &vec![0.5; 200], &gaussian(1)).unwrap();
    assert_eq!(fit.trees.len(), 1);
    assert_eq!(fit.spec.truncation(), 1);
    for l in 2..200 {
        assert!(fit.spec.tree(l).is_independence());
    }
}

#[test]
fn markov_data_has_no_second_tree_dependence() {
    let spec = VineSpec::new(
        vec![0.5; 3000],
        vec![BivariateCopula::gaussian(0.6).unwrap()],
    )
    .unwrap();
    let table = SignLikelihoodTable::new(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = table.sample(&mut rng);
    let fit = fit_sequential(&s, spec.margins(), &gaussian(2)).unwrap();
    let t1 = fit.trees[0].copula.kendall_tau();
    let t2 = fit.trees[1].copula.kendall_tau();
    let want = BivariateCopula::gaussian(0.6).unwrap().kendall_tau();
    assert!((t1 - want).abs() < 0.06, "tree 1 tau {t1}");
    assert!(t2.abs() < 0.08, "tree 2 tau {t2}");
}

#[test]
fn estimation_is_deterministic() {
    let s = iid_signs(400, 5);
    let cfg = EstimationConfig {
        family: FamilyPolicy::Aic(Family::aic_candidates()),
        truncation: 2,
        jitter_seed: 9,
        ..Default::default()
    };
    let a = fit_sequential(&s, &vec![0.5; 400], &cfg).unwrap();
    let b = fit_sequential(&s, &vec![0.5; 400], &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tau_initializer_behaviour() {
    let s = iid_signs(5000, 6);
    assert!(tau_initializer(&s, 1, Family::GAUSSIAN).abs() < 0.05);
    let ones = vec![true; 500];
    // jitter breaks every tie at random, so the tau is near zero
    assert!(tau_initializer(&ones, 1, Family::GAUSSIAN).abs() < 0.1);
    let alt: Vec<bool> = (0..500).map(|t| t % 2 == 0).collect();
    let r = tau_initializer(&alt, 1, Family::GAUSSIAN);
    assert!(r < -0.5);
    // infeasible for Clayton: neutral start
    assert_eq!(
        tau_initializer(&alt, 1, Family::CLAYTON),
        Family::CLAYTON.neutral_start()
    );
}

#[test]
fn deeper_truncation_never_lowers_the_likelihood() {
    let spec = VineSpec::new(
        vec![0.5; 600],
        vec![
            BivariateCopula::gaussian(0.4).unwrap(),
            BivariateCopula::gaussian(-0.3).unwrap(),
        ],
    )
    .unwrap();
    let table = SignLikelihoodTable::new(&spec).unwrap();
    let s = table.sample(&mut ChaCha8Rng::seed_from_u64(7));
    for family in [
        FamilyPolicy::default(),
        FamilyPolicy::Aic(Family::aic_candidates()),
    ] {
        let mut prev = f64::NEG_INFINITY;
        for p in 1..=4 {
            let cfg = EstimationConfig {
                family: family.clone(),
                truncation: p,
                ..Default::default()
            };
            let fit = fit_sequential(&s, spec.margins(), &cfg).unwrap();
            // the pooled gains equal the joint log-likelihood ratio
            let ll = fit.spec.log_pmf(&s).unwrap() - 600.0 * 0.5f64.ln();
            assert!((ll - fit.loglik()).abs() < 1e-6 * (1.0 + ll.abs()));
            assert!(ll >= prev - 1e-9, "p={p}: {ll} < {prev}");
            prev = ll;
        }
    }
}

#[test]
fn time_reversal_leaves_the_fit_unchanged() {
    let spec = VineSpec::new(
        vec![0.5; 500],
        vec![BivariateCopula::gaussian(0.5).unwrap()],
    )
    .unwrap();
    let s = SignLikelihoodTable::new(&spec)
        .unwrap()
        .sample(&mut ChaCha8Rng::seed_from_u64(8));
    let r: Vec<bool> = s.iter().rev().copied().collect();
    let a = fit_sequential(&s, spec.margins(), &gaussian(2)).unwrap();
    let b = fit_sequential(&r, spec.margins(), &gaussian(2)).unwrap();
    assert!((rho(&a.trees[0].copula) - rho(&b.trees[0].copula)).abs() < 1e-6);
    assert!((a.loglik() - b.loglik()).abs() < 1e-6);
}

#[test]
fn single_candidate_policy_returns_it() {
    let s = iid_signs(300, 9);
    for name in ["clayton", "gumbel", "indep", "js(gaussian)"] {
        let fam = parse_candidates(name).unwrap();
        let cfg = EstimationConfig {
            family: FamilyPolicy::Aic(fam.clone()),
            truncation: 1,
            ..Default::default()
        };
        let fit = fit_tree1(&s, &vec![0.5; 300], &cfg).unwrap();
        assert_eq!(fit.copula.family(), fam[0]);
    }
}

#[test]
fn aic_selects_dependence_when_present() {
    let spec = VineSpec::new(
        vec![0.5; 501],
        vec![BivariateCopula::gaussian(0.7).unwrap()],
    )
    .unwrap();
    let s = SignLikelihoodTable::new(&spec)
        .unwrap()
        .sample(&mut ChaCha8Rng::seed_from_u64(10));
    let cfg = EstimationConfig {
        family: FamilyPolicy::Aic(vec![Family::INDEPENDENCE, Family::GAUSSIAN]),
        truncation: 1,
        ..Default::default()
    };
    let fit = fit_tree1(&s, spec.margins(), &cfg).unwrap();
    assert_eq!(fit.copula.family(), Family::GAUSSIAN);
    assert!(fit.gain > 10.0);
}

#[test]
fn rejects_bad_inputs() {
    assert!(fit_sequential(&[true, false], &[0.5, 0.5], &gaussian(1)).is_err());
    assert!(fit_sequential(&[true, false, true], &[0.5, 0.5], &gaussian(1)).is_err());
    assert!(fit_sequential(&[true, false, true], &[0.5, 1.5, 0.5], &gaussian(1)).is_err());
}
