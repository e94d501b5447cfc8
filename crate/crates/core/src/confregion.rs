//! Confidence regions by inverting the split-sample sign test over a grid.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regression::RegressionData;
use crate::signtest::{first_stage, split_sample_test_with, SignTestConfig};

/// Rectangular grid; the last coordinate varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    axes: Vec<Axis>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "grid bounds {lo}:{hi} must be finite and increasing"
            )));
        }
        if n < 2 {
            return Err(Error::Config(format!(
                "grid axis needs at least 2 points, got {n}"
            )));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }
}

impl ParamGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("grid has no axes".into()));
        }
        Ok(ParamGrid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = axis.value(index % axis.n);
            index /= axis.n;
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// `lo:hi:n[,lo:hi:n...]`
impl FromStr for ParamGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .split(',')
            .map(|part| {
                let f: Vec<&str> = part.trim().split(':').collect();
                if f.len() != 3 {
                    return Err(Error::Config(format!("grid axis `{part}` is not lo:hi:n")));
                }
                let num = |x: &str| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad grid bound `{x}`")))
                };
                let n = f[2]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad grid count `{}`", f[2])))?;
                Axis::new(num(f[0])?, num(f[1])?, n)
            })
            .collect::<Result<Vec<_>>>()?;
        ParamGrid::new(axes)
    }
}

impl fmt::Display for ParamGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("{}:{}:{}", a.lo, a.hi, a.n))
            .collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub beta0: Vec<f64>,
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub accepted: bool,
    /// Set when the test failed at this point; such points count as rejected.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRegion {
    pub alpha: f64,
    pub grid: ParamGrid,
    pub beta1: Vec<f64>,
    pub points: Vec<GridPoint>,
}

impl ConfidenceRegion {
    pub fn accepted(&self) -> impl Iterator<Item = &GridPoint> {
        self.points.iter().filter(|p| p.accepted)
    }

    pub fn contains(&self, beta0: &[f64]) -> bool {
        self.accepted().any(|p| p.beta0 == beta0)
    }
}

/// Runs the split-sample test at every grid point. The first-stage estimate
/// does not involve `beta0`, so it is computed once; every point uses the
/// same seed, hence the same null draws.
pub fn invert_test(
    data: &RegressionData,
    grid: &ParamGrid,
    config: &SignTestConfig,
    seed: u64,
) -> Result<ConfidenceRegion> {
    config.validate()?;
    if grid.dim() != data.ncols() {
        return Err(Error::Config(format!(
            "{}-dimensional grid for {} coefficients",
            grid.dim(),
            data.ncols()
        )));
    }
    let beta1 = first_stage(data, config.fraction)?;
    let points = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let beta0 = grid.point(i);
            match split_sample_test_with(data, &beta0, beta1.clone(), config, seed) {
                Ok(o) => GridPoint {
                    beta0,
                    statistic: o.statistic,
                    critical: o.critical,
                    p_value: o.p_value,
                    accepted: !o.reject,
                    error: None,
                },
                Err(e) => GridPoint {
                    beta0,
                    statistic: f64::NAN,
                    critical: f64::NAN,
                    p_value: 0.0,
                    accepted: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ConfidenceRegion {
        alpha: config.alpha,
        grid: grid.clone(),
        beta1,
        points,
    })
}

/// `[min, max]` of `transform` over the accepted points; `None` for an empty
/// region.
pub fn project(region: &ConfidenceRegion, transform: impl Fn(&[f64]) -> f64) -> Option<(f64, f64)> {
    region
        .accepted()
        .map(|p| transform(&p.beta0))
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}
