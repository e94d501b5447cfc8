//! Bivariate copulas evaluated on the discrete sign lattice.

mod bvn;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::distributions::std_normal_quantile;
use crate::error::{domain, Error, Result};

pub use bvn::{bvn_lower, bvn_upper, BvnKernel};

/// Floor applied to probabilities before logarithms and divisions.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance for negative rectangle masses caused by rounding.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Parametric base families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseFamily {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
}

/// A copula family: a base family, optionally made jointly symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Family {
    pub base: BaseFamily,
    pub jointly_symmetric: bool,
}

impl Family {
    pub const INDEPENDENCE: Family = Family::plain(BaseFamily::Independence);
    pub const GAUSSIAN: Family = Family::plain(BaseFamily::Gaussian);
    pub const CLAYTON: Family = Family::plain(BaseFamily::Clayton);
    pub const GUMBEL: Family = Family::plain(BaseFamily::Gumbel);
    pub const JS_GAUSSIAN: Family = Family::js(BaseFamily::Gaussian);

    pub const fn plain(base: BaseFamily) -> Self {
        Family {
            base,
            jointly_symmetric: false,
        }
    }

    pub const fn js(base: BaseFamily) -> Self {
        Family {
            base,
            jointly_symmetric: true,
        }
    }

    /// The default candidate set for AIC selection.
    pub fn aic_candidates() -> Vec<Family> {
        vec![
            Family::GAUSSIAN,
            Family::CLAYTON,
            Family::GUMBEL,
            Family::INDEPENDENCE,
            Family::JS_GAUSSIAN,
        ]
    }

    pub fn n_params(self) -> usize {
        match self.base {
            BaseFamily::Independence => 0,
            _ => 1,
        }
    }

    /// Builds a copula of this family, validating the parameter.
    pub fn with_parameter(self, theta: f64) -> Result<BivariateCopula> {
        let base = match self.base {
            BaseFamily::Independence => BivariateCopula::independence(),
            BaseFamily::Gaussian => BivariateCopula::gaussian(theta)?,
            BaseFamily::Clayton => BivariateCopula::clayton(theta)?,
            BaseFamily::Gumbel => BivariateCopula::gumbel(theta)?,
        };
        Ok(if self.jointly_symmetric {
            base.jointly_symmetric()
        } else {
            base
        })
    }

    /// Parameter used when no data-driven start is available.
    pub fn neutral_start(self) -> f64 {
        match self.base {
            BaseFamily::Independence | BaseFamily::Gaussian => 0.0,
            BaseFamily::Clayton => 0.5,
            BaseFamily::Gumbel => 1.5,
        }
    }

    /// Inverts Kendall's tau for the base family.
    pub fn tau_to_parameter(self, tau: f64) -> Result<f64> {
        if self.jointly_symmetric {
            return domain("jointly symmetric copulas have zero Kendall tau");
        }
        match self.base {
            BaseFamily::Independence => domain("independence has no parameter"),
            BaseFamily::Gaussian if tau > -1.0 && tau < 1.0 => Ok((PI * tau / 2.0).sin()),
            BaseFamily::Clayton if tau > 0.0 && tau < 1.0 => Ok(2.0 * tau / (1.0 - tau)),
            BaseFamily::Gumbel if tau > 0.0 && tau < 1.0 => Ok(1.0 / (1.0 - tau)),
            _ => domain(format!("tau {tau} infeasible for {self}")),
        }
    }

    // Unconstrained reparametrisation used by the optimizer.
    pub(crate) fn to_free(self, theta: f64) -> f64 {
        match self.base {
            BaseFamily::Independence => 0.0,
            BaseFamily::Gaussian => theta.atanh(),
            BaseFamily::Clayton => theta.ln(),
            BaseFamily::Gumbel => (theta - 1.0).ln(),
        }
    }

    pub(crate) fn from_free(self, x: f64) -> f64 {
        match self.base {
            BaseFamily::Independence => 0.0,
            BaseFamily::Gaussian => x.tanh(),
            BaseFamily::Clayton => x.exp(),
            BaseFamily::Gumbel => 1.0 + x.exp(),
        }
    }

    /// Search interval on the free scale. Keeps parameters away from the
    /// comonotone limits where discrete masses vanish.
    pub(crate) fn free_bounds(self) -> (f64, f64) {
        match self.base {
            BaseFamily::Independence => (0.0, 0.0),
            BaseFamily::Gaussian => (-3.0, 3.0),
            BaseFamily::Clayton | BaseFamily::Gumbel => ((1e-4f64).ln(), 50f64.ln()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.base {
            BaseFamily::Independence => "indep",
            BaseFamily::Gaussian => "gaussian",
            BaseFamily::Clayton => "clayton",
            BaseFamily::Gumbel => "gumbel",
        };
        if self.jointly_symmetric {
            write!(f, "js({name})")
        } else {
            f.write_str(name)
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(inner) = strip_call(&s, "js") {
            let base: Family = inner.parse()?;
            if base.jointly_symmetric {
                return Err(Error::Config("nested js(...) is not supported".into()));
            }
            return Ok(Family::js(base.base));
        }
        let base = match s.as_str() {
            "indep" | "independence" => BaseFamily::Independence,
            "gaussian" | "normal" => BaseFamily::Gaussian,
            "clayton" => BaseFamily::Clayton,
            "gumbel" => BaseFamily::Gumbel,
            _ => return Err(Error::Config(format!("unknown copula family `{s}`"))),
        };
        Ok(Family::plain(base))
    }
}

fn strip_call<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?
        .trim_start()
        .strip_prefix('(')?
        .strip_suffix(')')
        .map(str::trim)
}

/// A bivariate copula with a validated parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BivariateCopula {
    family: Family,
    theta: f64,
}

impl BivariateCopula {
    pub const fn independence() -> Self {
        BivariateCopula {
            family: Family::INDEPENDENCE,
            theta: 0.0,
        }
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return domain(format!("gaussian rho must lie in (-1, 1), got {rho}"));
        }
        Ok(BivariateCopula {
            family: Family::GAUSSIAN,
            theta: rho,
        })
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return domain(format!("clayton theta must be positive, got {theta}"));
        }
        Ok(BivariateCopula {
            family: Family::CLAYTON,
            theta,
        })
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return domain(format!("gumbel theta must be at least 1, got {theta}"));
        }
        Ok(BivariateCopula {
            family: Family::GUMBEL,
            theta,
        })
    }

    /// The jointly symmetric version of this copula.
    pub fn jointly_symmetric(self) -> Self {
        BivariateCopula {
            family: Family::js(self.family.base),
            theta: self.theta,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn parameter(&self) -> Option<f64> {
        (self.family.n_params() > 0).then_some(self.theta)
    }

    /// True when the copula is the product copula, whatever its family tag.
    pub fn is_independence(&self) -> bool {
        match self.family.base {
            BaseFamily::Independence => true,
            BaseFamily::Gaussian => self.theta == 0.0,
            BaseFamily::Gumbel => self.theta == 1.0,
            BaseFamily::Clayton => false,
        }
    }

    /// Kendall's tau of the copula.
    pub fn kendall_tau(&self) -> f64 {
        if self.family.jointly_symmetric {
            return 0.0;
        }
        match self.family.base {
            BaseFamily::Independence => 0.0,
            BaseFamily::Gaussian => 2.0 * self.theta.asin() / PI,
            BaseFamily::Clayton => self.theta / (self.theta + 2.0),
            BaseFamily::Gumbel => 1.0 - 1.0 / self.theta,
        }
    }

    /// C(u, v). Arguments are clamped into the unit square.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        let c = if self.family.jointly_symmetric {
            self.js_cdf(u, v)
        } else {
            self.base_cdf(u, v)
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v;
        }
        if v >= 1.0 {
            return u;
        }
        match self.family.base {
            BaseFamily::Independence => u * v,
            BaseFamily::Gaussian => {
                let kernel = BvnKernel::new(self.theta);
                gaussian_cdf(
                    u,
                    v,
                    std_normal_quantile(u),
                    std_normal_quantile(v),
                    &kernel,
                )
            }
            BaseFamily::Clayton => clayton_cdf(u, v, self.theta),
            BaseFamily::Gumbel => gumbel_cdf(u, v, self.theta),
        }
    }

    // Sum over k1,k2 in {0,1,2} of (-1)^R C(w_k1(u), w_k2(v)) / 4 with
    // w_0 = 1, w_1 = x, w_2 = 1 - x and R the number of k_i equal to 2.
    fn js_cdf(&self, u: f64, v: f64) -> f64 {
        let us = [(1.0, 1.0), (u, 1.0), (1.0 - u, -1.0)];
        let vs = [(1.0, 1.0), (v, 1.0), (1.0 - v, -1.0)];
        let mut acc = 0.0;
        for &(a, sa) in &us {
            for &(b, sb) in &vs {
                acc += sa * sb * self.base_cdf(a, b);
            }
        }
        acc / 4.0
    }

    /// Four-corner evaluation of the copula on the cell
    /// `(u.minus, u.plus] x (v.minus, v.plus]`.
    pub fn rectangle(&self, u: CdfPair, v: CdfPair) -> Result<(CornerValues, f64)> {
        u.check()?;
        v.check()?;
        let corners = CornerValues {
            cpp: self.cdf(u.plus, v.plus),
            cpm: self.cdf(u.plus, v.minus),
            cmp: self.cdf(u.minus, v.plus),
            cmm: self.cdf(u.minus, v.minus),
        };
        let mass = corners.mass()?;
        Ok((corners, mass))
    }
}

impl fmt::Display for BivariateCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.family.base {
            BaseFamily::Independence => "indep".to_string(),
            BaseFamily::Gaussian => format!("gaussian({})", self.theta),
            BaseFamily::Clayton => format!("clayton({})", self.theta),
            BaseFamily::Gumbel => format!("gumbel({})", self.theta),
        };
        if self.family.jointly_symmetric {
            write!(f, "js({base})")
        } else {
            f.write_str(&base)
        }
    }
}

impl FromStr for BivariateCopula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(inner) = strip_call(&s, "js") {
            let base: BivariateCopula = inner.parse()?;
            if base.family.jointly_symmetric {
                return Err(Error::Config("nested js(...) is not supported".into()));
            }
            return Ok(base.jointly_symmetric());
        }
        if s == "indep" || s == "independence" {
            return Ok(BivariateCopula::independence());
        }
        let param = |name: &str| -> Option<Result<f64>> {
            strip_call(&s, name).map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad copula parameter `{p}`")))
            })
        };
        let built = if let Some(p) = param("gaussian") {
            BivariateCopula::gaussian(p?)
        } else if let Some(p) = param("clayton") {
            BivariateCopula::clayton(p?)
        } else if let Some(p) = param("gumbel") {
            BivariateCopula::gumbel(p?)
        } else {
            return Err(Error::Config(format!("unknown copula `{s}`")));
        };
        built.map_err(|e| Error::Config(e.to_string()))
    }
}

fn clayton_cdf(u: f64, v: f64, theta: f64) -> f64 {
    // (u^-t + v^-t - 1)^(-1/t), evaluated on the log scale
    let x = -theta * u.ln();
    let y = -theta * v.ln();
    let m = x.max(y);
    let log_s = if m < 500.0 {
        (x.exp_m1() + y.exp_m1()).ln_1p()
    } else {
        m + ((x - m).exp() + (y - m).exp() - (-m).exp()).ln()
    };
    (-log_s / theta).exp()
}

fn gumbel_cdf(u: f64, v: f64, theta: f64) -> f64 {
    let a = -u.ln();
    let b = -v.ln();
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    let r = lo / hi;
    let norm = hi * (1.0 + r.powf(theta)).powf(1.0 / theta);
    (-norm).exp()
}

/// Cumulative probabilities bracketing a point mass: `plus = P[S <= s]`,
/// `minus = P[S < s]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdfPair {
    pub plus: f64,
    pub minus: f64,
}

impl CdfPair {
    pub fn new(plus: f64, minus: f64) -> Self {
        CdfPair { plus, minus }
    }

    /// The Bernoulli cdf pair at `s` for success probability `p`.
    pub fn bernoulli(p: f64, s: bool) -> Self {
        if s {
            CdfPair::new(1.0, 1.0 - p)
        } else {
            CdfPair::new(1.0 - p, 0.0)
        }
    }

    pub fn mass(&self) -> f64 {
        self.plus - self.minus
    }

    fn check(&self) -> Result<()> {
        let ok = self.minus >= -MASS_TOLERANCE
            && self.plus <= 1.0 + MASS_TOLERANCE
            && self.minus <= self.plus + MASS_TOLERANCE;
        if ok {
            Ok(())
        } else {
            domain(format!(
                "invalid cdf pair (plus {}, minus {})",
                self.plus, self.minus
            ))
        }
    }
}

/// The copula evaluated at the four corners of a discrete cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornerValues {
    pub cpp: f64,
    pub cpm: f64,
    pub cmp: f64,
    pub cmm: f64,
}

impl CornerValues {
    /// Rectangle mass `cpp - cpm - cmp + cmm`, clamped to [0, 1].
    pub fn mass(&self) -> Result<f64> {
        let m = self.cpp - self.cpm - self.cmp + self.cmm;
        if m < -MASS_TOLERANCE {
            return Err(Error::NonIncreasingCopula { mass: m });
        }
        Ok(m.clamp(0.0, 1.0))
    }
}

// Interior Gaussian copula cdf given the normal scores of u and v.
#[inline]
fn gaussian_cdf(u: f64, v: f64, qu: f64, qv: f64, kernel: &BvnKernel) -> f64 {
    if kernel.r() == 0.0 {
        u * v
    } else {
        kernel.lower(qu, qv)
    }
}

/// A fixed set of cells whose log-likelihood is evaluated for many copulas,
/// as in a parameter search. Normal scores of the corners are computed once.
#[derive(Clone, Debug)]
pub struct PreparedCells {
    pairs: Vec<(CdfPair, CdfPair)>,
    // per cell, (u, v, qu, qv) for the corners ++, +-, -+, --
    corners: Vec<[[f64; 4]; 4]>,
}

impl PreparedCells {
    pub fn new(pairs: Vec<(CdfPair, CdfPair)>) -> Result<Self> {
        for (a, b) in &pairs {
            a.check()?;
            b.check()?;
        }
        let corners = pairs
            .iter()
            .map(|(a, b)| {
                let c = |u: f64, v: f64| {
                    let u = u.clamp(0.0, 1.0);
                    let v = v.clamp(0.0, 1.0);
                    [u, v, std_normal_quantile(u), std_normal_quantile(v)]
                };
                [
                    c(a.plus, b.plus),
                    c(a.plus, b.minus),
                    c(a.minus, b.plus),
                    c(a.minus, b.minus),
                ]
            })
            .collect();
        Ok(PreparedCells { pairs, corners })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(CdfPair, CdfPair)] {
        &self.pairs
    }

    /// `sum log max(mass, floor)`; identical to evaluating `rectangle` cell by cell.
    pub fn loglik(&self, c: &BivariateCopula) -> Result<f64> {
        let plain_gaussian = c.family.base == BaseFamily::Gaussian && !c.family.jointly_symmetric;
        let mut acc = 0.0;
        if plain_gaussian {
            let kernel = BvnKernel::new(c.theta);
            for cell in &self.corners {
                let v = cell.map(|[u, v, qu, qv]| {
                    if u == 0.0 || v == 0.0 {
                        0.0
                    } else if u == 1.0 {
                        v
                    } else if v == 1.0 {
                        u
                    } else {
                        gaussian_cdf(u, v, qu, qv, &kernel).clamp((u + v - 1.0).max(0.0), u.min(v))
                    }
                });
                let corners = CornerValues {
                    cpp: v[0],
                    cpm: v[1],
                    cmp: v[2],
                    cmm: v[3],
                };
                acc += corners.mass()?.max(PROB_FLOOR).ln();
            }
        } else {
            for &(a, b) in &self.pairs {
                acc += c.rectangle(a, b)?.1.max(PROB_FLOOR).ln();
            }
        }
        Ok(acc)
    }
}

/// AIC of a copula on a set of discrete cells: `-2 sum log mass + 2 k`.
pub fn aic_score(c: &BivariateCopula, pairs: &[(CdfPair, CdfPair)]) -> Result<f64> {
    if pairs.is_empty() {
        return domain("aic_score needs at least one pair");
    }
    let mut loglik = 0.0;
    let mut any_positive = false;
    for &(u, v) in pairs {
        let (_, mass) = c.rectangle(u, v)?;
        any_positive |= mass > 0.0;
        loglik += mass.max(PROB_FLOOR).ln();
    }
    if !any_positive {
        return Err(Error::Evaluation("all rectangle masses are zero".into()));
    }
    Ok(-2.0 * loglik + 2.0 * c.family.n_params() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=20).map(|i| i as f64 / 20.0).collect()
    }

    #[test]
    fn gaussian_median_point() {
        let c = BivariateCopula::gaussian(0.5).unwrap();
        assert!((c.cdf(0.5, 0.5) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn clayton_small_theta_is_near_independence() {
        // C_theta(u, v) = uv (1 + theta ln u ln v) + O(theta^2)
        for theta in [1e-4, 1e-6] {
            let c = BivariateCopula::clayton(theta).unwrap();
            for &u in &grid()[1..20] {
                for &v in &grid()[1..20] {
                    let first_order = u * v * (1.0 + theta * u.ln() * v.ln());
                    assert!((c.cdf(u, v) - first_order).abs() < 10.0 * theta * theta);
                    assert!((c.cdf(u, v) - u * v).abs() < 2e-1 * theta);
                }
            }
        }
    }

    #[test]
    fn clayton_extreme_arguments_are_finite() {
        let c = BivariateCopula::clayton(40.0).unwrap();
        let x = c.cdf(1e-12, 1e-11);
        assert!(x.is_finite() && x > 0.0 && x <= 1e-12);
    }

    #[test]
    fn gumbel_one_is_independence() {
        let c = BivariateCopula::gumbel(1.0).unwrap();
        assert!(c.is_independence());
        assert!((c.cdf(0.3, 0.7) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn parameter_bounds_rejected_at_construction() {
        assert!(BivariateCopula::gaussian(1.0).is_err());
        assert!(BivariateCopula::clayton(0.0).is_err());
        assert!(BivariateCopula::gumbel(0.99).is_err());
        assert!(BivariateCopula::gaussian(f64::NAN).is_err());
    }

    #[test]
    fn free_parameter_round_trip() {
        for (fam, theta) in [
            (Family::GAUSSIAN, -0.7),
            (Family::CLAYTON, 3.0),
            (Family::GUMBEL, 2.5),
        ] {
            let back = fam.from_free(fam.to_free(theta));
            assert!((back - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn parses_and_displays() {
        let c: BivariateCopula = "js(clayton(2))".parse().unwrap();
        assert_eq!(c.family(), Family::js(BaseFamily::Clayton));
        assert_eq!(c.parameter(), Some(2.0));
        assert_eq!(c.to_string(), "js(clayton(2))");
        let back: BivariateCopula = c.to_string().parse().unwrap();
        assert_eq!(back, c);
        assert_eq!(
            "indep".parse::<BivariateCopula>().unwrap(),
            BivariateCopula::independence()
        );
        assert!("gaussian(2)".parse::<BivariateCopula>().is_err());
        assert!("frank(1)".parse::<BivariateCopula>().is_err());
        assert_eq!(
            "js(gaussian)".parse::<Family>().unwrap(),
            Family::JS_GAUSSIAN
        );
        assert_eq!(Family::JS_GAUSSIAN.to_string(), "js(gaussian)");
    }

    #[test]
    fn rejects_invalid_cdf_pairs() {
        let c = BivariateCopula::independence();
        let good = CdfPair::new(1.0, 0.5);
        assert!(c.rectangle(CdfPair::new(0.2, 0.5), good).is_err());
        assert!(c.rectangle(CdfPair::new(1.5, 0.5), good).is_err());
    }
}
