//! Univariate error distributions.
//!
//! These supply the Bernoulli margins of the sign process, the log-odds
//! weights of the test statistic, and the innovations of the simulated
//! data-generating processes. Every built-in family has median zero.

use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

use crate::error::{domain, Error, Result};

const QUANTILE_TOL: f64 = 1e-10;

/// Standard normal CDF, `0.5 * erfc(-x / sqrt 2)`.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse standard normal CDF (Wichura's AS241, about 1e-16 relative error).
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    as241(p)
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_9e0,
        5.769_497_221_460_691_405_5e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_4e0,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2e0,
        5.463_784_911_164_114_369_9e0,
        1.784_826_539_917_291_335_8e0,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// A CDF given by a table of `(x, F(x))` knots, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl TabulatedCdf {
    /// Knots must be strictly increasing in `x`, nondecreasing in `F`, and run
    /// from 0 to 1.
    pub fn new(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        if xs.len() != ps.len() || xs.len() < 2 {
            return domain("tabulated CDF needs at least two matching knots");
        }
        if xs.iter().any(|x| !x.is_finite()) || ps.iter().any(|p| !p.is_finite()) {
            return domain("tabulated CDF knots must be finite");
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return domain("tabulated CDF abscissae must be strictly increasing");
        }
        if ps.windows(2).any(|w| w[1] < w[0]) {
            return domain("tabulated CDF values must be nondecreasing");
        }
        if ps[0] != 0.0 || ps[ps.len() - 1] != 1.0 {
            return domain("tabulated CDF must start at 0 and end at 1");
        }
        Ok(Self { xs, ps })
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.xs.partition_point(|&k| k <= x);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (p0, p1) = (self.ps[i - 1], self.ps[i]);
        p0 + (p1 - p0) * (x - x0) / (x1 - x0)
    }

    fn quantile(&self, p: f64) -> f64 {
        // First knot whose CDF reaches p; interpolate inside its segment.
        let i = self.ps.partition_point(|&k| k < p).max(1);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (p0, p1) = (self.ps[i - 1], self.ps[i]);
        if p1 == p0 {
            x0
        } else {
            x0 + (x1 - x0) * (p - p0) / (p1 - p0)
        }
    }
}

/// Error law for regression disturbances.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorDistribution {
    Normal {
        mean: f64,
        sd: f64,
    },
    Cauchy {
        loc: f64,
        scale: f64,
    },
    StudentT {
        df: f64,
    },
    /// `s·|C| − (1−s)·|N|` with `s ~ Bernoulli(1/2)`, `C` standard Cauchy and
    /// `N` standard normal: Cauchy right tail, normal left tail, median 0.
    MixtureCauchyNormal,
    Custom(TabulatedCdf),
}

impl ErrorDistribution {
    pub fn standard_normal() -> Self {
        ErrorDistribution::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn standard_cauchy() -> Self {
        ErrorDistribution::Cauchy {
            loc: 0.0,
            scale: 1.0,
        }
    }

    pub fn student_t(df: f64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return domain(format!(
                "Student t degrees of freedom must be positive, got {df}"
            ));
        }
        Ok(ErrorDistribution::StudentT { df })
    }

    fn validate(&self) -> Result<()> {
        match self {
            ErrorDistribution::Normal { sd, .. } if !(*sd > 0.0) => {
                domain("normal sd must be positive")
            }
            ErrorDistribution::Cauchy { scale, .. } if !(*scale > 0.0) => {
                domain("Cauchy scale must be positive")
            }
            ErrorDistribution::StudentT { df } if !(*df > 0.0) => domain("t df must be positive"),
            _ => Ok(()),
        }
    }

    /// Cumulative distribution function. NaN input is a domain error.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return domain("CDF evaluated at NaN");
        }
        self.validate()?;
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self {
            ErrorDistribution::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            ErrorDistribution::Cauchy { loc, scale } => cauchy_cdf((x - loc) / scale),
            ErrorDistribution::StudentT { df } => student_t_cdf(*df, x),
            ErrorDistribution::MixtureCauchyNormal => {
                if x < 0.0 {
                    std_normal_cdf(x)
                } else {
                    cauchy_cdf(x)
                }
            }
            ErrorDistribution::Custom(t) => t.cdf(x),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self {
            ErrorDistribution::Normal { mean, sd } => std_normal_pdf((x - mean) / sd) / sd,
            ErrorDistribution::Cauchy { loc, scale } => {
                let z = (x - loc) / scale;
                FRAC_1_PI / (scale * (1.0 + z * z))
            }
            ErrorDistribution::StudentT { df } => StudentsT::new(0.0, 1.0, *df)
                .map(|d| d.pdf(x))
                .unwrap_or(f64::NAN),
            ErrorDistribution::MixtureCauchyNormal => {
                if x < 0.0 {
                    std_normal_pdf(x)
                } else {
                    FRAC_1_PI / (1.0 + x * x)
                }
            }
            ErrorDistribution::Custom(_) => f64::NAN,
        }
    }

    /// Inverse CDF for `p` in the open unit interval.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("quantile requires p in (0,1), got {p}"));
        }
        self.validate()?;
        Ok(match self {
            ErrorDistribution::Normal { mean, sd } => mean + sd * std_normal_quantile(p),
            ErrorDistribution::Cauchy { loc, scale } => loc + scale * (PI * (p - 0.5)).tan(),
            ErrorDistribution::MixtureCauchyNormal => {
                if p < 0.5 {
                    std_normal_quantile(p)
                } else {
                    (PI * (p - 0.5)).tan()
                }
            }
            ErrorDistribution::Custom(t) => t.quantile(p),
            ErrorDistribution::StudentT { .. } => self.solve_quantile(p),
        })
    }

    // Safeguarded Newton on a bracket that is widened until it straddles p.
    fn solve_quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cdf_unchecked(lo) > p {
            lo *= 2.0;
        }
        while self.cdf_unchecked(hi) < p {
            hi *= 2.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let e = self.cdf_unchecked(x) - p;
            if e.abs() < QUANTILE_TOL * 1e-2 {
                break;
            }
            if e > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x);
            let newton = x - e / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    /// One draw. Deterministic given the state of `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorDistribution::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            ErrorDistribution::Cauchy { loc, scale } => {
                loc + scale * (PI * (rng.random::<f64>() - 0.5)).tan()
            }
            ErrorDistribution::StudentT { df } => StudentT::new(*df)
                .expect("df validated at construction")
                .sample(rng),
            ErrorDistribution::MixtureCauchyNormal => {
                let cauchy_side = rng.random::<bool>();
                let c = (PI * (rng.random::<f64>() - 0.5)).tan();
                let n: f64 = StandardNormal.sample(rng);
                if cauchy_side {
                    c.abs()
                } else {
                    -n.abs()
                }
            }
            ErrorDistribution::Custom(t) => {
                let u: f64 = rng.random();
                t.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
            }
        }
    }
}

fn cauchy_cdf(z: f64) -> f64 {
    0.5 + z.atan() * FRAC_1_PI
}

fn student_t_cdf(df: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    if df == 2.0 {
        return 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
    }
    if df == 1.0 {
        return cauchy_cdf(x);
    }
    StudentsT::new(0.0, 1.0, df)
        .map(|d| d.cdf(x))
        .unwrap_or(f64::NAN)
}

impl fmt::Display for ErrorDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorDistribution::Normal { mean, sd } if *mean == 0.0 && *sd == 1.0 => {
                write!(f, "normal")
            }
            ErrorDistribution::Normal { mean, sd } => write!(f, "normal({mean},{sd})"),
            ErrorDistribution::Cauchy { loc, scale } if *loc == 0.0 && *scale == 1.0 => {
                write!(f, "cauchy")
            }
            ErrorDistribution::Cauchy { loc, scale } => write!(f, "cauchy({loc},{scale})"),
            ErrorDistribution::StudentT { df } => write!(f, "t({df})"),
            ErrorDistribution::MixtureCauchyNormal => write!(f, "mixture"),
            ErrorDistribution::Custom(_) => write!(f, "custom"),
        }
    }
}

impl FromStr for ErrorDistribution {
    type Err = Error;

    /// Accepts `normal`, `cauchy`, `t(df)` and `mixture`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "normal" | "gaussian" => return Ok(Self::standard_normal()),
            "cauchy" => return Ok(Self::standard_cauchy()),
            "mixture" => return Ok(Self::MixtureCauchyNormal),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("t(").and_then(|r| r.strip_suffix(')')) {
            let df: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad degrees of freedom in '{s}'")))?;
            return Self::student_t(df).map_err(|e| Error::Config(e.to_string()));
        }
        Err(Error::Config(format!("unknown error distribution '{s}'")))
    }
}
