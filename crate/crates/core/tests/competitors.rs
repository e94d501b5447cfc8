use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vinesign::competitors::{
    binomial_cutoff, binomial_upper_tail, cd_sign_test, hc0_covariance, t_test, white_t_test,
};
use vinesign::dgp::{generate, DgpSpec, ErrorScheme};
use vinesign::regression::{ols, RegressionData};
use vinesign::seeds;

fn sample(seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = x.iter().map(|x| 0.5 * x + rng.random_range(-1.0..1.0) * (1.0 + x.abs())).collect();
    let rows: Vec<Vec<f64>> = x.iter().map(|x| vec![1.0, *x]).collect();
    RegressionData::new(y, &rows).unwrap()
}

#[test]
fn hc0_matches_scalar_formula() {
    // no intercept: Var = sum x^2 e^2 / (sum x^2)^2
    let data = {
        let d = sample(1);
        let x: Vec<f64> = d.rows().map(|r| r[1]).collect();
        RegressionData::scalar(d.y().to_vec(), x).unwrap()
    };
    let fit = ols(&data).unwrap();
    let v = hc0_covariance(&data, &fit.residuals, &fit.xtx_inv);
    let sxx: f64 = data.rows().map(|r| r[0] * r[0]).sum();
    let meat: f64 = data.rows().zip(&fit.residuals).map(|(r, e)| r[0] * r[0] * e * e).sum();
    assert!((v[(0, 0)] - meat / (sxx * sxx)).abs() < 1e-14 * v[(0, 0)].max(1.0));
}

#[test]
fn homoskedastic_case_of_hc0_is_sigma_squared_inverse() {
    // equal squared residuals make the sandwich collapse
    let data = sample(2);
    let fit = ols(&data).unwrap();
    let e: Vec<f64> = (0..data.len()).map(|t| if t % 2 == 0 { 0.7 } else { -0.7 }).collect();
    let v = hc0_covariance(&data, &e, &fit.xtx_inv);
    let expected = &fit.xtx_inv * 0.49;
    assert!((v - expected).abs().max() < 1e-12);
}

#[test]
fn t_statistic_matches_textbook_value() {
    // y = 1 + 2x + (+-1) at x = 1..6 with alternating errors
    let x: Vec<f64> = (1..=6).map(f64::from).collect();
    let e = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let y: Vec<f64> = x.iter().zip(e).map(|(x, e)| 1.0 + 2.0 * x + e).collect();
    let rows: Vec<Vec<f64>> = x.iter().map(|x| vec![1.0, *x]).collect();
    let data = RegressionData::new(y, &rows).unwrap();
    let out = t_test(&data, &[0.0, 2.0], 0.05).unwrap();
    // regress e on (1, x): b = sxe / sxx, ssr = sum e^2 - sxe^2 / sxx (mean e = 0)
    let sxx = 17.5;
    let sxe: f64 = x.iter().zip(e).map(|(x, e)| (x - 3.5) * e).sum();
    let b = sxe / sxx;
    let ssr = 6.0 - sxe * sxe / sxx;
    let t = b / (ssr / 4.0 / sxx).sqrt();
    assert!((out.statistic - t).abs() < 1e-12, "{} vs {t}", out.statistic);
    // Student t(4) 97.5% point
    assert!((out.critical - 2.776_445_105_197_793).abs() < 1e-9);
}

#[test]
fn exact_fit_is_an_infinite_t() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| 3.0 + 0.5 * i as f64).collect();
    let data = RegressionData::new(y, &rows).unwrap();
    let out = t_test(&data, &[0.0, 0.0], 0.05).unwrap();
    assert_eq!(out.statistic, f64::INFINITY);
    assert!(out.reject);
    let out = t_test(&data, &[3.0, 0.5], 0.05).unwrap();
    assert_eq!(out.statistic, 0.0);
}

#[test]
fn scale_invariance() {
    let data = sample(3);
    // y -> lambda y maps H(beta0) to H(lambda beta0)
    for lambda in [0.01, 7.0] {
        let scaled = data.scaled(lambda);
        let b0 = [0.0, 0.3];
        let b1 = [0.0, 0.3 * lambda];
        let a = t_test(&data, &b0, 0.05).unwrap();
        let b = t_test(&scaled, &b1, 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9);
        let a = white_t_test(&data, &b0, 0.05).unwrap();
        let b = white_t_test(&scaled, &b1, 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9);
        let a = cd_sign_test(&data, &b0, 0.05).unwrap();
        let b = cd_sign_test(&scaled, &b1, 0.05).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn lattice_cutoff_at_fifty() {
    let (c, size) = binomial_cutoff(50, 0.05);
    assert_eq!(c, 31);
    // sum_{k>=31} C(50,k) / 2^50 computed with exact integers
    let mut num: u128 = 0;
    let mut coef: u128 = 1;
    for k in 0..=50u128 {
        if k >= 31 {
            num += coef;
        }
        coef = coef * (50 - k) / (k + 1);
    }
    let exact = num as f64 / 2f64.powi(50);
    assert!((size - exact).abs() < 1e-14);
    assert!((size - 0.0595).abs() < 5e-4);
    assert_eq!(binomial_upper_tail(50, 0), 1.0);
}

#[test]
fn cd_statistic_counts_aligned_signs() {
    let rows: Vec<Vec<f64>> = [1.0, -1.0, 2.0, -2.0, 0.5, 1.5, -0.5, 3.0, -3.0, 1.0]
        .iter()
        .map(|x| vec![*x])
        .collect();
    let y = vec![1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0];
    let data = RegressionData::new(y, &rows).unwrap();
    let out = cd_sign_test(&data, &[0.0], 0.05).unwrap();
    // aligned at t = 0, 2, 3, 5, 6, 7, 9
    assert_eq!(out.statistic, 7.0);
    assert!(cd_sign_test(&data.subset(0..9), &[0.0], 0.05).is_err());
}

#[test]
fn sizes_under_normal_errors() {
    let reps = 2000;
    let spec = DgpSpec {
        scheme: ErrorScheme::Normal,
        rho: 0.0,
        ..Default::default()
    };
    let mut counts = [0usize; 3];
    for r in 0..reps {
        let data = generate(&spec, &mut seeds::rng(5, &[r])).unwrap();
        counts[0] += t_test(&data, &[0.0], 0.05).unwrap().reject as usize;
        counts[1] += white_t_test(&data, &[0.0], 0.05).unwrap().reject as usize;
        counts[2] += cd_sign_test(&data, &[0.0], 0.05).unwrap().reject as usize;
    }
    let se = (0.06f64 * 0.94 / reps as f64).sqrt();
    let t = counts[0] as f64 / reps as f64;
    let cd = counts[2] as f64 / reps as f64;
    assert!((t - 0.05).abs() < 3.0 * se, "t {t}");
    assert!((cd - 0.0595).abs() < 3.0 * se, "cd {cd}");
    // White's test over-rejects mildly in small samples
    let wt = counts[1] as f64 / reps as f64;
    assert!(wt > 0.03 && wt < 0.10, "wt {wt}");
}
