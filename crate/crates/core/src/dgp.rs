//! Simulated predictive regressions: `y_t = beta x_{t-1} + eps_t` with a
//! persistent AR(1) regressor `x_t = theta x_{t-1} + u_t`,
//! `u_t = rho eps_t + w_t sqrt(1 - rho^2)`, and six error schemes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::ErrorDistribution;
use crate::error::{domain, Error, Result};
use crate::regression::RegressionData;

/// 1-based date of the variance break and of the GARCH jump.
pub const BREAK_DATE: usize = 25;

pub const GARCH_OMEGA: f64 = 0.00037;
pub const GARCH_ALPHA: f64 = 0.0888;
pub const GARCH_BETA: f64 = 0.9024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorScheme {
    Normal,
    Cauchy,
    T2,
    Mixture,
    /// `N(0, 1)` except `sqrt(1000) N(0, 1)` at date 25.
    BreakVariance,
    /// GARCH(1,1) with the date-25 draw multiplied by 50.
    GarchJump,
}

impl ErrorScheme {
    pub const ALL: [ErrorScheme; 6] = [
        ErrorScheme::Normal,
        ErrorScheme::Cauchy,
        ErrorScheme::T2,
        ErrorScheme::Mixture,
        ErrorScheme::BreakVariance,
        ErrorScheme::GarchJump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorScheme::Normal => "normal",
            ErrorScheme::Cauchy => "cauchy",
            ErrorScheme::T2 => "t2",
            ErrorScheme::Mixture => "mixture",
            ErrorScheme::BreakVariance => "break",
            ErrorScheme::GarchJump => "garchjump",
        }
    }

    /// Stable numeric id, used in seed derivation.
    pub fn id(self) -> u64 {
        ErrorScheme::ALL.iter().position(|&s| s == self).unwrap() as u64 + 1
    }

    pub fn has_break(self) -> bool {
        matches!(self, ErrorScheme::BreakVariance | ErrorScheme::GarchJump)
    }
}

impl fmt::Display for ErrorScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ErrorScheme::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown error scheme `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DgpSpec {
    pub n: usize,
    pub theta: f64,
    pub rho: f64,
    pub scheme: ErrorScheme,
    pub beta: f64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            n: 50,
            theta: 0.9,
            rho: 0.0,
            scheme: ErrorScheme::Normal,
            beta: 0.0,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.abs() < 1.0) {
            return domain(format!("|theta| = {} must be below 1", self.theta.abs()));
        }
        if !(self.rho.abs() < 1.0) {
            return domain(format!("|rho| = {} must be below 1", self.rho.abs()));
        }
        if !self.beta.is_finite() {
            return domain("beta must be finite");
        }
        if self.n < 5 {
            return domain(format!("sample size {} below 5", self.n));
        }
        if self.scheme.has_break() && self.n <= BREAK_DATE {
            return domain(format!(
                "scheme `{}` needs more than {BREAK_DATE} observations",
                self.scheme
            ));
        }
        Ok(())
    }
}

/// Unconditional GARCH variance, the starting value of the recursion.
pub fn garch_unconditional_variance() -> f64 {
    GARCH_OMEGA / (1.0 - GARCH_ALPHA - GARCH_BETA)
}

/// Draws `eps_1..eps_n`.
pub fn errors<R: Rng + ?Sized>(scheme: ErrorScheme, n: usize, rng: &mut R) -> Vec<f64> {
    let z = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    match scheme {
        ErrorScheme::Normal => (0..n).map(|_| z(rng)).collect(),
        ErrorScheme::Cauchy => {
            let d = ErrorDistribution::standard_cauchy();
            (0..n).map(|_| d.sample(rng)).collect()
        }
        ErrorScheme::T2 => {
            let d = ErrorDistribution::StudentT { df: 2.0 };
            (0..n).map(|_| d.sample(rng)).collect()
        }
        ErrorScheme::Mixture => (0..n)
            .map(|_| ErrorDistribution::MixtureCauchyNormal.sample(rng))
            .collect(),
        ErrorScheme::BreakVariance => (1..=n)
            .map(|t| {
                let e = z(rng);
                if t == BREAK_DATE {
                    1000f64.sqrt() * e
                } else {
                    e
                }
            })
            .collect(),
        ErrorScheme::GarchJump => {
            let mut var = garch_unconditional_variance();
            let mut out = Vec::with_capacity(n);
            for t in 1..=n {
                if t > 1 {
                    let prev: f64 = out[t - 2];
                    var = GARCH_OMEGA + GARCH_ALPHA * prev * prev + GARCH_BETA * var;
                }
                let mut e = var.sqrt() * z(rng);
                if t == BREAK_DATE {
                    e *= 50.0;
                }
                out.push(e);
            }
            out
        }
    }
}

/// One sample path; `y[t]` is paired with the regressor `x_{t-1}`.
pub fn generate<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<RegressionData> {
    spec.validate()?;
    let n = spec.n;
    let eps = errors(spec.scheme, n, rng);
    let w: Vec<f64> = (0..=n).map(|_| rng.sample(StandardNormal)).collect();
    let s = (1.0 - spec.rho * spec.rho).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut prev = w[0] / (1.0 - spec.theta * spec.theta).sqrt();
    let mut y = Vec::with_capacity(n);
    for t in 0..n {
        x.push(prev);
        y.push(spec.beta * prev + eps[t]);
        let u = spec.rho * eps[t] + w[t + 1] * s;
        prev = spec.theta * prev + u;
    }
    RegressionData::scalar(y, x)
}
