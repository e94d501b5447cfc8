//! Benchmark tests: the least-squares t-test, its White (HC0) variant, and a
//! sign-alignment test in the spirit of Campbell and Dufour.
//!
//! All three test one coefficient (the last column of `X`, the predictor)
//! against a hypothesized value.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::factorial::ln_binomial;

use crate::error::{domain, Error, Result};
use crate::regression::{ols, OlsFit, RegressionData};

#[derive(Clone, Debug, PartialEq)]
pub struct CompetitorOutcome {
    pub name: &'static str,
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
    pub alpha: f64,
    /// Exact size of the realized cutoff, for lattice tests.
    pub realized_size: Option<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn shifted(data: &RegressionData, beta0: &[f64]) -> Result<RegressionData> {
    if beta0.len() != data.ncols() {
        return domain(format!(
            "coefficient vector of length {} for {} regressors",
            beta0.len(),
            data.ncols()
        ));
    }
    let y = data
        .y()
        .iter()
        .zip(data.rows())
        .map(|(y, x)| y - x.iter().zip(beta0).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let x = data.rows().flatten().copied().collect();
    RegressionData::from_flat(y, x, data.ncols())
}

// last coefficient and full fit of the regression of y - X beta0 on X
fn slope_fit(data: &RegressionData, beta0: &[f64]) -> Result<(f64, OlsFit)> {
    let k = data.ncols();
    if data.len() <= k {
        return domain(format!("{} observations for {k} coefficients", data.len()));
    }
    let fit = ols(&shifted(data, beta0)?)?;
    Ok((fit.beta[k - 1], fit))
}

/// Two-sided t-test with Student-t(T - k) cutoff.
pub fn t_test(data: &RegressionData, beta0: &[f64], alpha: f64) -> Result<CompetitorOutcome> {
    check_alpha(alpha)?;
    let (b, fit) = slope_fit(data, beta0)?;
    let k = data.ncols();
    let df = (data.len() - k) as f64;
    let s2 = fit.residuals.iter().map(|e| e * e).sum::<f64>() / df;
    let se = (s2 * fit.xtx_inv[(k - 1, k - 1)]).sqrt();
    let t = ratio(b, se);
    let critical = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Evaluation(e.to_string()))?
        .inverse_cdf(1.0 - alpha / 2.0);
    Ok(CompetitorOutcome {
        name: "t",
        statistic: t,
        critical,
        reject: t.abs() > critical,
        alpha,
        realized_size: None,
    })
}

// b / se with an exact fit mapped to a signed infinity
fn ratio(b: f64, se: f64) -> f64 {
    if se > 0.0 {
        b / se
    } else if b == 0.0 {
        0.0
    } else {
        b.signum() * f64::INFINITY
    }
}

/// HC0 sandwich covariance `(X'X)^-1 X' diag(e^2) X (X'X)^-1`.
pub fn hc0_covariance(
    data: &RegressionData,
    residuals: &[f64],
    xtx_inv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = data.ncols();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for (x, e) in data.rows().zip(residuals) {
        let e2 = e * e;
        for i in 0..k {
            for j in 0..k {
                meat[(i, j)] += e2 * x[i] * x[j];
            }
        }
    }
    xtx_inv * meat * xtx_inv
}

/// t-test with White's heteroskedasticity-consistent variance and a normal
/// cutoff.
pub fn white_t_test(data: &RegressionData, beta0: &[f64], alpha: f64) -> Result<CompetitorOutcome> {
    check_alpha(alpha)?;
    let (b, fit) = slope_fit(data, beta0)?;
    let k = data.ncols();
    let v = hc0_covariance(data, &fit.residuals, &fit.xtx_inv);
    let t = ratio(b, v[(k - 1, k - 1)].max(0.0).sqrt());
    let critical = Normal::new(0.0, 1.0)
        .map_err(|e| Error::Evaluation(e.to_string()))?
        .inverse_cdf(1.0 - alpha / 2.0);
    Ok(CompetitorOutcome {
        name: "wt",
        statistic: t,
        critical,
        reject: t.abs() > critical,
        alpha,
        realized_size: None,
    })
}

/// `P[Binomial(n, 1/2) >= c]`.
pub fn binomial_upper_tail(n: usize, c: usize) -> f64 {
    if c == 0 {
        return 1.0;
    }
    let ln_half = -(n as f64) * std::f64::consts::LN_2;
    (c..=n)
        .map(|k| (ln_binomial(n as u64, k as u64) + ln_half).exp())
        .sum()
}

/// Cutoff `c` for `S >= c` whose exact size is closest to `alpha`, with the
/// size.
pub fn binomial_cutoff(n: usize, alpha: f64) -> (usize, f64) {
    (0..=n + 1)
        .map(|c| {
            (
                c,
                if c > n {
                    0.0
                } else {
                    binomial_upper_tail(n, c)
                },
            )
        })
        .min_by(|a, b| (a.1 - alpha).abs().total_cmp(&(b.1 - alpha).abs()))
        .expect("nonempty range")
}

/// One-sided sign-alignment test: `S = #{t : (y_t - x_{t-1}' beta0) x_{t-1,k} >= 0}`,
/// rejecting for large `S` with the exact Binomial(T, 1/2) cutoff whose size
/// is nearest `alpha`.
pub fn cd_sign_test(data: &RegressionData, beta0: &[f64], alpha: f64) -> Result<CompetitorOutcome> {
    check_alpha(alpha)?;
    let n = data.len();
    if n < 10 {
        return domain(format!(
            "sign-alignment test needs at least 10 observations, got {n}"
        ));
    }
    let shifted = shifted(data, beta0)?;
    let k = data.ncols();
    let s = shifted
        .y()
        .iter()
        .zip(shifted.rows())
        .filter(|(e, x)| *e * x[k - 1] >= 0.0)
        .count();
    let (c, size) = binomial_cutoff(n, alpha);
    Ok(CompetitorOutcome {
        name: "cd",
        statistic: s as f64,
        critical: c as f64,
        reject: s >= c,
        alpha,
        realized_size: Some(size),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_size_at_fifty() {
        let (c, size) = binomial_cutoff(50, 0.05);
        assert_eq!(c, 31);
        assert!((size - 0.0595).abs() < 5e-4, "{size}");
    }

    #[test]
    fn tail_sums_to_one() {
        assert!((binomial_upper_tail(20, 0) - 1.0).abs() < 1e-15);
        assert!((binomial_upper_tail(20, 20) - 0.5f64.powi(20)).abs() < 1e-20);
        assert_eq!(binomial_upper_tail(20, 21), 0.0);
    }
}
