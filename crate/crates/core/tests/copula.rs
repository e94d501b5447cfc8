use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vinesign::copula::{aic_score, BivariateCopula, CdfPair, Family, PreparedCells, PROB_FLOOR};

fn grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn families() -> Vec<BivariateCopula> {
    vec![
        BivariateCopula::independence(),
        BivariateCopula::gaussian(0.7).unwrap(),
        BivariateCopula::gaussian(-0.95).unwrap(),
        BivariateCopula::clayton(2.0).unwrap(),
        BivariateCopula::clayton(15.0).unwrap(),
        BivariateCopula::gumbel(1.5).unwrap(),
        BivariateCopula::gumbel(6.0).unwrap(),
        BivariateCopula::gaussian(0.6).unwrap().jointly_symmetric(),
        BivariateCopula::clayton(3.0).unwrap().jointly_symmetric(),
    ]
}

#[test]
fn boundary_conditions_and_frechet_bounds() {
    for c in families() {
        for &u in &grid() {
            assert!(c.cdf(u, 0.0).abs() < 1e-12 && c.cdf(0.0, u).abs() < 1e-12);
            assert!((c.cdf(u, 1.0) - u).abs() < 1e-12, "{c}");
            assert!((c.cdf(1.0, u) - u).abs() < 1e-12, "{c}");
            for &v in &grid() {
                let x = c.cdf(u, v);
                assert!(x >= (u + v - 1.0).max(0.0) - 1e-15 && x <= u.min(v) + 1e-15);
            }
        }
    }
}

#[test]
fn two_increasing_on_grid() {
    let g = grid();
    for c in families() {
        for i in 0..20 {
            for j in 0..20 {
                let m = c.cdf(g[i + 1], g[j + 1]) - c.cdf(g[i], g[j + 1]) - c.cdf(g[i + 1], g[j])
                    + c.cdf(g[i], g[j]);
                assert!(m >= -1e-12, "{c} at ({i},{j}): {m}");
            }
        }
    }
}

#[test]
fn independence_examples() {
    let c = BivariateCopula::independence();
    assert!((c.cdf(0.3, 0.7) - 0.21).abs() < 1e-15);
    let half = CdfPair::bernoulli(0.5, true);
    let (_, m) = c.rectangle(half, half).unwrap();
    assert!((m - 0.25).abs() < 1e-15);
}

#[test]
fn gaussian_rectangle_at_the_median() {
    let c = BivariateCopula::gaussian(0.5).unwrap();
    let half = CdfPair::bernoulli(0.5, true);
    let (k, m) = c.rectangle(half, half).unwrap();
    assert!((m - 1.0 / 3.0).abs() < 1e-14);
    assert_eq!(k.cpp, 1.0);
    assert!((k.cmm - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn degenerate_rectangle_has_zero_mass() {
    for c in families() {
        let flat = CdfPair::new(0.37, 0.37);
        let (_, m) = c.rectangle(flat, CdfPair::new(0.9, 0.1)).unwrap();
        assert!(m.abs() < 1e-15);
    }
}

#[test]
fn full_square_has_unit_mass() {
    for c in families() {
        let all = CdfPair::new(1.0, 0.0);
        let (_, m) = c.rectangle(all, all).unwrap();
        assert_eq!(m, 1.0);
    }
}

// (1/4)[C(u,v) - C(u,1-v) - C(1-u,v) + C(1-u,1-v) + 2u + 2v - 1]: the average
// of the four reflections, written independently of the nine-term sum.
fn js_oracle(base: &BivariateCopula, u: f64, v: f64) -> f64 {
    let c = |a: f64, b: f64| base.cdf(a, b);
    0.25 * (c(u, v)
        + (u - c(u, 1.0 - v))
        + (v - c(1.0 - u, v))
        + (c(1.0 - u, 1.0 - v) + u + v - 1.0))
}

#[test]
fn jointly_symmetric_matches_reflection_average() {
    for base in [
        BivariateCopula::clayton(2.0).unwrap(),
        BivariateCopula::gaussian(0.8).unwrap(),
        BivariateCopula::gumbel(3.0).unwrap(),
    ] {
        let js = base.jointly_symmetric();
        for &u in &grid() {
            for &v in &grid() {
                assert!((js.cdf(u, v) - js_oracle(&base, u, v)).abs() < 1e-14);
            }
        }
    }
    let js = BivariateCopula::clayton(2.0).unwrap().jointly_symmetric();
    assert!((js.cdf(0.5, 1.0) - 0.5).abs() < 1e-15);
}

#[test]
fn jointly_symmetric_independence_is_independence() {
    let js = BivariateCopula::independence().jointly_symmetric();
    for &u in &grid() {
        for &v in &grid() {
            assert!((js.cdf(u, v) - u * v).abs() < 1e-14);
        }
    }
}

// tau = 4 E[C(U, V)] - 1, with E taken over an n x n grid of cells weighted by
// their copula mass.
fn numerical_tau(c: &BivariateCopula, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut prev: Vec<f64> = (0..=n).map(|j| c.cdf(0.0, j as f64 * h)).collect();
    let mut acc = 0.0;
    for i in 1..=n {
        let cur: Vec<f64> = (0..=n).map(|j| c.cdf(i as f64 * h, j as f64 * h)).collect();
        for j in 1..=n {
            let mass = cur[j] - cur[j - 1] - prev[j] + prev[j - 1];
            let mid = 0.25 * (cur[j] + cur[j - 1] + prev[j] + prev[j - 1]);
            acc += mid * mass;
        }
        prev = cur;
    }
    4.0 * acc - 1.0
}

#[test]
fn tau_inversion_round_trips() {
    for (fam, tau) in [
        (Family::GAUSSIAN, 0.0),
        (Family::GAUSSIAN, 0.3),
        (Family::GAUSSIAN, -0.4),
        (Family::CLAYTON, 0.5),
        (Family::CLAYTON, 0.2),
        (Family::GUMBEL, 0.5),
        (Family::GUMBEL, 0.25),
    ] {
        let theta = fam.tau_to_parameter(tau).unwrap();
        let c = fam.with_parameter(theta).unwrap();
        let got = numerical_tau(&c, 600);
        assert!((got - tau).abs() < 1e-3, "{fam} tau={tau}: {got}");
        assert!((c.kendall_tau() - tau).abs() < 1e-12);
    }
    assert_eq!(Family::CLAYTON.tau_to_parameter(0.5).unwrap(), 2.0);
    assert_eq!(Family::GUMBEL.tau_to_parameter(0.5).unwrap(), 2.0);
    assert!(Family::CLAYTON.tau_to_parameter(-0.1).is_err());
    assert!(Family::GUMBEL.tau_to_parameter(1.0).is_err());
    assert!(Family::GAUSSIAN.tau_to_parameter(-1.0).is_err());
}

#[test]
fn js_gaussian_has_zero_tau() {
    let c = BivariateCopula::gaussian(0.8).unwrap().jointly_symmetric();
    assert!(numerical_tau(&c, 400).abs() < 1e-3);
}

#[test]
fn aic_examples() {
    let half = |s| CdfPair::bernoulli(0.5, s);
    let pairs: Vec<_> = [(true, true), (false, true), (true, false), (false, false)]
        .iter()
        .map(|&(a, b)| (half(a), half(b)))
        .collect();
    let ind = BivariateCopula::independence();
    let aic = aic_score(&ind, &pairs).unwrap();
    assert!((aic + 2.0 * 4.0 * 0.25f64.ln()).abs() < 1e-12);
    // identical likelihood, one extra parameter
    let g0 = BivariateCopula::gaussian(0.0).unwrap();
    assert!((aic_score(&g0, &pairs).unwrap() - aic - 2.0).abs() < 1e-12);
    assert!(aic_score(&ind, &[]).is_err());
}

#[test]
fn aic_prefers_gaussian_on_dependent_pairs() {
    // 500 pairs from a Gaussian(0.7) sign law
    let truth = BivariateCopula::gaussian(0.7).unwrap();
    let p11 = truth
        .rectangle(CdfPair::bernoulli(0.5, true), CdfPair::bernoulli(0.5, true))
        .unwrap()
        .1;
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let pairs: Vec<_> = (0..500)
        .map(|_| {
            let a = rng.random_bool(0.5);
            // P[b = a] = 2 p11
            let b = if rng.random_bool(2.0 * p11) { a } else { !a };
            (CdfPair::bernoulli(0.5, a), CdfPair::bernoulli(0.5, b))
        })
        .collect();
    let ind = aic_score(&BivariateCopula::independence(), &pairs).unwrap();
    let gau = aic_score(&truth, &pairs).unwrap();
    assert!(gau < ind, "{gau} vs {ind}");
}

#[test]
fn prepared_cells_match_rectangle_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pairs: Vec<(CdfPair, CdfPair)> = (0..60)
        .map(|_| {
            let (qa, qb) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            (
                CdfPair::bernoulli(qa, rng.random_bool(0.5)),
                CdfPair::bernoulli(qb, rng.random_bool(0.5)),
            )
        })
        .collect();
    let cells = PreparedCells::new(pairs.clone()).unwrap();
    for c in families() {
        let direct: f64 = pairs
            .iter()
            .map(|(a, b)| c.rectangle(*a, *b).unwrap().1.max(PROB_FLOOR).ln())
            .sum();
        let fast = cells.loglik(&c).unwrap();
        assert!((fast - direct).abs() < 1e-12 * direct.abs().max(1.0), "{c:?}: {fast} vs {direct}");
    }
}
