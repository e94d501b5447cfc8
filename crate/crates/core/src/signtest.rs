//! Point-optimal sign statistics, their simulated null distributions, and the
//! split-sample test.
//!
//! The statistic at the alternative `beta1` is
//! `SN = ln f_vine(s) - sum_t ln(1 - q_t)`, where `q_t = P[s_t = 1]` under
//! `beta1` are the vine margins. With an independence vine this reduces to
//! `sum_t s_t ln(q_t / (1 - q_t))`.
//!
//! Under `H(beta0)` the signs `s_t = 1{y_t - f(x_{t-1}, beta0) >= 0}` are
//! i.i.d. fair coins whatever the error law, so the null distribution of any
//! statistic that is a fixed function of the signs (given `X`) can be
//! simulated exactly.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::copula::PROB_FLOOR;
use crate::distributions::ErrorDistribution;
use crate::dvine::{PmfWorkspace, SignLikelihoodTable, VineSpec, MAX_TABLE_DEPTH};
use crate::error::{domain, Error, Result};
use crate::estimate::{fit_sequential, EstimationConfig};
use crate::regression::{ols, RegressionData, RegressionFn};
use crate::seeds;

/// Where the vine copulas of the statistic come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum VineSource {
    /// Refit the vine on every sign vector, simulated ones included.
    #[default]
    Refit,
    /// Fit on the first-subsample signs and hold the fit fixed.
    FirstSubsample,
    /// Fit on the tested signs and hold the fit fixed in the simulation.
    /// Not exact: the fit is tuned to the observed signs.
    Observed,
    /// No serial dependence.
    Independent,
}

impl fmt::Display for VineSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VineSource::Refit => "refit",
            VineSource::FirstSubsample => "first",
            VineSource::Observed => "observed",
            VineSource::Independent => "indep",
        })
    }
}

impl FromStr for VineSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "refit" => Ok(VineSource::Refit),
            "first" | "first-subsample" => Ok(VineSource::FirstSubsample),
            "observed" => Ok(VineSource::Observed),
            "indep" | "independent" | "independence" => Ok(VineSource::Independent),
            other => Err(Error::Config(format!("unknown vine source `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SignTestConfig {
    pub alpha: f64,
    /// Null replications.
    pub m1: usize,
    /// Share of the sample used to estimate the alternative.
    pub fraction: f64,
    /// Nominal error law behind the margins and weights.
    pub errdist: ErrorDistribution,
    pub estimation: EstimationConfig,
    pub vine_source: VineSource,
    pub regression: RegressionFn,
}

impl Default for SignTestConfig {
    fn default() -> Self {
        SignTestConfig {
            alpha: 0.05,
            m1: 999,
            fraction: 0.1,
            errdist: ErrorDistribution::standard_normal(),
            estimation: EstimationConfig::default(),
            vine_source: VineSource::default(),
            regression: RegressionFn::Linear,
        }
    }
}

impl SignTestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.m1 < 99 {
            return Err(Error::Config(format!(
                "{} null replications, need at least 99",
                self.m1
            )));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::Config(format!(
                "split fraction {} outside (0, 1)",
                self.fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    pub beta1: Vec<f64>,
    pub t1: usize,
    pub t2: usize,
    pub seed: u64,
    pub m1: usize,
    pub vine: String,
    /// Simulated null distribution, sorted ascending.
    pub null: Vec<f64>,
}

/// `s_t = 1{y_t - f(x_{t-1}, beta0) >= 0}`.
pub fn sign_vector(data: &RegressionData, beta0: &[f64], f: &RegressionFn) -> Vec<bool> {
    data.y()
        .iter()
        .zip(data.rows())
        .map(|(y, x)| y - f.eval(x, beta0) >= 0.0)
        .collect()
}

/// `q_t = P[s_t = 1]` under `beta1`: `1 - F(f(x, beta0) - f(x, beta1))`,
/// clamped to `[1e-12, 1 - 1e-12]`.
pub fn success_probs(
    data: &RegressionData,
    beta0: &[f64],
    beta1: &[f64],
    errdist: &ErrorDistribution,
    f: &RegressionFn,
) -> Result<Vec<f64>> {
    data.rows()
        .map(|x| {
            let p = errdist.cdf(f.eval(x, beta0) - f.eval(x, beta1))?;
            Ok((1.0 - p).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
        })
        .collect()
}

/// Log-odds weights `ln(q_t / (1 - q_t))`.
pub fn weights(
    data: &RegressionData,
    beta0: &[f64],
    beta1: &[f64],
    errdist: &ErrorDistribution,
    f: &RegressionFn,
) -> Result<Vec<f64>> {
    Ok(success_probs(data, beta0, beta1, errdist, f)?
        .into_iter()
        .map(|q| (q / (1.0 - q)).ln())
        .collect())
}

/// `SN` for a fixed vine whose margins are the `q_t`.
pub fn statistic(spec: &VineSpec, signs: &[bool]) -> Result<f64> {
    let lp = PmfWorkspace::new().log_pmf(spec, signs)?;
    Ok(lp - offset(spec.margins()))
}

fn offset(margins: &[f64]) -> f64 {
    margins.iter().map(|q| (1.0 - q).ln()).sum()
}

/// The statistic as a function of the sign vector alone.
#[derive(Clone, Debug)]
pub struct SignStatistic {
    kind: Kind,
    offset: f64,
    len: usize,
}

#[derive(Clone, Debug)]
enum Kind {
    Table(SignLikelihoodTable),
    Vine(VineSpec),
    Refit {
        margins: Vec<f64>,
        config: EstimationConfig,
    },
}

impl SignStatistic {
    pub fn fixed(spec: &VineSpec) -> Result<Self> {
        let kind = if spec.effective_depth() <= MAX_TABLE_DEPTH {
            Kind::Table(SignLikelihoodTable::new(spec)?)
        } else {
            Kind::Vine(spec.clone())
        };
        Ok(SignStatistic {
            kind,
            offset: offset(spec.margins()),
            len: spec.len(),
        })
    }

    pub fn refit(margins: Vec<f64>, config: EstimationConfig) -> Result<Self> {
        // same clamping as the vine
        let spec = VineSpec::independent(margins)?;
        Ok(SignStatistic {
            offset: offset(spec.margins()),
            len: spec.len(),
            kind: Kind::Refit {
                margins: spec.margins().to_vec(),
                config,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn eval(&self, signs: &[bool]) -> Result<f64> {
        if signs.len() != self.len {
            return domain(format!(
                "{} signs for a statistic of length {}",
                signs.len(),
                self.len
            ));
        }
        let lp = match &self.kind {
            Kind::Table(t) => t.log_pmf(signs),
            Kind::Vine(spec) => PmfWorkspace::new().log_pmf(spec, signs)?,
            Kind::Refit { margins, config } => {
                if self.len < 3 {
                    PmfWorkspace::new().log_pmf(&VineSpec::independent(margins.clone())?, signs)?
                } else {
                    let fit = fit_sequential(signs, margins, config)?;
                    PmfWorkspace::new().log_pmf(&fit.spec, signs)?
                }
            }
        };
        Ok(lp - self.offset)
    }
}

fn fair_coins<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let bits: u64 = rng.random();
        out.extend((0..64.min(n - out.len())).map(|i| bits >> i & 1 == 1));
    }
    out
}

/// `m1` draws of the statistic under i.i.d. fair signs, sorted ascending.
/// Replication `i` uses the stream derived from `(seed, i)`, so the result is
/// independent of scheduling and the same seed gives common random numbers
/// across statistics.
pub fn null_distribution(stat: &SignStatistic, m1: usize, seed: u64) -> Result<Vec<f64>> {
    let mut out = (0..m1)
        .into_par_iter()
        .map(|i| {
            let signs = fair_coins(stat.len(), &mut seeds::rng(seed, &[i as u64]));
            stat.eval(&signs)
        })
        .collect::<Result<Vec<f64>>>()?;
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Smallest simulated value `c` with `#{null > c} <= alpha * m1`.
pub fn critical_value(null: &[f64], alpha: f64) -> f64 {
    debug_assert!(null.windows(2).all(|w| w[0] <= w[1]));
    let m = null.len();
    let allowed = (alpha * m as f64 + 1e-9).floor() as usize;
    // at most `allowed` values lie above position m - allowed - 1, and any
    // smaller value has at least allowed + 1 above it
    null[m.saturating_sub(allowed + 1)]
}

/// `(1 + #{null >= observed}) / (m1 + 1)`.
pub fn mc_p_value(null: &[f64], observed: f64) -> f64 {
    let ge = null.len() - null.partition_point(|x| *x < observed);
    (1 + ge) as f64 / (null.len() + 1) as f64
}

// Signs and margins of a pilot sample, for `VineSource::FirstSubsample`.
struct Pilot {
    signs: Vec<bool>,
    margins: Vec<f64>,
}

fn build_statistic(
    signs: &[bool],
    margins: Vec<f64>,
    pilot: Option<&Pilot>,
    config: &SignTestConfig,
) -> Result<(SignStatistic, String)> {
    let est = &config.estimation;
    match config.vine_source {
        VineSource::Refit => {
            let summary = if signs.len() >= 3 {
                fit_sequential(signs, &margins, est)?.summary()
            } else {
                "indep".into()
            };
            Ok((SignStatistic::refit(margins, est.clone())?, summary))
        }
        VineSource::Independent => Ok((
            SignStatistic::fixed(&VineSpec::independent(margins)?)?,
            "indep".into(),
        )),
        VineSource::Observed | VineSource::FirstSubsample => {
            let (s, m) = match (config.vine_source, pilot) {
                (VineSource::Observed, _) => (signs, &margins[..]),
                (_, Some(p)) => (&p.signs[..], &p.margins[..]),
                (_, None) => {
                    return Err(Error::Config(
                        "first-subsample vine needs a split sample".into(),
                    ))
                }
            };
            if s.len() < 3 {
                let spec = VineSpec::independent(margins)?;
                return Ok((SignStatistic::fixed(&spec)?, "indep".into()));
            }
            let fit = fit_sequential(s, m, est)?;
            let spec = VineSpec::new(margins, fit.copulas())?;
            Ok((SignStatistic::fixed(&spec)?, fit.summary()))
        }
    }
}

fn decide(
    test: &RegressionData,
    pilot: Option<&Pilot>,
    beta0: &[f64],
    beta1: Vec<f64>,
    t1: usize,
    config: &SignTestConfig,
    seed: u64,
) -> Result<TestOutcome> {
    let f = &config.regression;
    let signs = sign_vector(test, beta0, f);
    let margins = success_probs(test, beta0, &beta1, &config.errdist, f)?;
    let (stat, vine) = build_statistic(&signs, margins, pilot, config)?;
    let statistic = stat.eval(&signs)?;
    let null = null_distribution(&stat, config.m1, seed)?;
    let critical = critical_value(&null, config.alpha);
    Ok(TestOutcome {
        statistic,
        critical,
        p_value: mc_p_value(&null, statistic),
        reject: statistic > critical,
        beta1,
        t1,
        t2: test.len(),
        seed,
        m1: config.m1,
        vine,
        null,
    })
}

/// Test of `H(beta0)` at a nominated alternative `beta1`, using the whole
/// sample.
pub fn point_optimal_test(
    data: &RegressionData,
    beta0: &[f64],
    beta1: &[f64],
    config: &SignTestConfig,
    seed: u64,
) -> Result<TestOutcome> {
    config.validate()?;
    check_beta(data, beta0)?;
    check_beta(data, beta1)?;
    decide(data, None, beta0, beta1.to_vec(), 0, config, seed)
}

fn check_beta(data: &RegressionData, beta: &[f64]) -> Result<()> {
    if beta.len() != data.ncols() {
        return domain(format!(
            "coefficient vector of length {} for {} regressors",
            beta.len(),
            data.ncols()
        ));
    }
    Ok(())
}

/// `(T1, T2)` for a split fraction.
pub fn split_sizes(n: usize, fraction: f64) -> (usize, usize) {
    let t1 = (fraction * n as f64).round() as usize;
    (t1.min(n), n - t1.min(n))
}

/// Least-squares alternative from the first `T1` observations.
pub fn first_stage(data: &RegressionData, fraction: f64) -> Result<Vec<f64>> {
    let (t1, _) = split_sizes(data.len(), fraction);
    if t1 < data.ncols() + 2 {
        return domain(format!(
            "first subsample of {t1} observations is too small for {} coefficients",
            data.ncols()
        ));
    }
    Ok(ols(&data.subset(0..t1))?.beta)
}

/// Split-sample test: `beta1` is estimated by least squares on the first
/// `round(fraction * T)` observations and the test runs on the rest, treated
/// as a fresh series.
pub fn split_sample_test(
    data: &RegressionData,
    beta0: &[f64],
    config: &SignTestConfig,
    seed: u64,
) -> Result<TestOutcome> {
    config.validate()?;
    check_beta(data, beta0)?;
    let beta1 = first_stage(data, config.fraction)?;
    split_sample_test_with(data, beta0, beta1, config, seed)
}

/// Split-sample test with a precomputed first-stage estimate.
pub fn split_sample_test_with(
    data: &RegressionData,
    beta0: &[f64],
    beta1: Vec<f64>,
    config: &SignTestConfig,
    seed: u64,
) -> Result<TestOutcome> {
    config.validate()?;
    check_beta(data, beta0)?;
    check_beta(data, &beta1)?;
    let n = data.len();
    let (t1, t2) = split_sizes(n, config.fraction);
    if t2 < 3 {
        return domain(format!("second subsample has only {t2} observations"));
    }
    let first = data.subset(0..t1);
    let test = data.subset(t1..n);
    let pilot = match config.vine_source {
        VineSource::FirstSubsample => Some(Pilot {
            signs: sign_vector(&first, beta0, &config.regression),
            margins: success_probs(&first, beta0, &beta1, &config.errdist, &config.regression)?,
        }),
        _ => None,
    };
    decide(&test, pilot.as_ref(), beta0, beta1, t1, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_counting() {
        let null: Vec<f64> = (1..=999).map(f64::from).collect();
        assert_eq!(critical_value(&null, 0.05), 950.0);
        assert_eq!(mc_p_value(&null, 1e6), 1.0 / 1000.0);
        assert_eq!(mc_p_value(&null, 1.0), 1.0);
    }

    #[test]
    fn critical_value_with_ties() {
        // 90 zeros then 1..=10: P[> 4] = 0.06 > 0.05, P[> 5] = 0.05
        let mut null = vec![0.0; 90];
        null.extend((1..=10).map(f64::from));
        assert_eq!(critical_value(&null, 0.05), 5.0);
        let zeros = vec![0.0; 100];
        assert_eq!(critical_value(&zeros, 0.05), 0.0);
        assert_eq!(critical_value(&zeros, 0.5), 0.0);
    }

    #[test]
    fn fair_coins_are_balanced() {
        let mut rng = seeds::rng(3, &[]);
        let s = fair_coins(100_000, &mut rng);
        let ones = s.iter().filter(|&&b| b).count() as f64 / 1e5;
        assert!((ones - 0.5).abs() < 0.005);
        assert_eq!(fair_coins(70, &mut rng).len(), 70);
    }

    #[test]
    fn split_sizes_round() {
        assert_eq!(split_sizes(50, 0.1), (5, 45));
        assert_eq!(split_sizes(50, 0.3), (15, 35));
        assert_eq!(split_sizes(50, 0.7), (35, 15));
    }
}
