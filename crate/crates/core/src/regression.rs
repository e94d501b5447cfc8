//! Regression data, the regression function, and least squares.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};

/// Observations `y_t` with the regressor row `x_{t-1}` stored at the same index.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData {
    y: Vec<f64>,
    x: Vec<f64>,
    ncols: usize,
}

impl RegressionData {
    /// `rows[t]` is the regressor vector paired with `y[t]`.
    pub fn new(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        if y.len() != rows.len() {
            return domain(format!(
                "{} responses but {} regressor rows",
                y.len(),
                rows.len()
            ));
        }
        let ncols = rows.first().map_or(0, Vec::len);
        if ncols == 0 {
            return domain("regressor matrix has no columns");
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return domain("ragged regressor rows");
        }
        let x: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_flat(y, x, ncols)
    }

    /// Row-major regressors, `y.len() * ncols` values.
    pub fn from_flat(y: Vec<f64>, x: Vec<f64>, ncols: usize) -> Result<Self> {
        if ncols == 0 || x.len() != y.len() * ncols {
            return domain("regressor matrix does not match the response length");
        }
        if y.iter().chain(&x).any(|v| v.is_nan()) {
            return domain("NaN in regression data");
        }
        Ok(RegressionData { y, x, ncols })
    }

    /// Scalar regressor without intercept.
    pub fn scalar(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        Self::from_flat(y, x, 1)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * self.ncols..(t + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.ncols)
    }

    pub fn subset(&self, r: Range<usize>) -> RegressionData {
        RegressionData {
            y: self.y[r.clone()].to_vec(),
            x: self.x[r.start * self.ncols..r.end * self.ncols].to_vec(),
            ncols: self.ncols,
        }
    }

    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.ncols, &self.x)
    }

    /// Copy with `y` multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> RegressionData {
        RegressionData {
            y: self.y.iter().map(|v| v * scale).collect(),
            ..self.clone()
        }
    }
}

type CustomFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// The regression function `f(x_{t-1}, beta)`.
#[derive(Clone, Default)]
pub enum RegressionFn {
    #[default]
    Linear,
    Custom(Arc<CustomFn>),
}

impl RegressionFn {
    pub fn custom(f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RegressionFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], beta: &[f64]) -> f64 {
        match self {
            RegressionFn::Linear => x.iter().zip(beta).map(|(a, b)| a * b).sum(),
            RegressionFn::Custom(f) => f(x, beta),
        }
    }
}

impl fmt::Debug for RegressionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressionFn::Linear => f.write_str("Linear"),
            RegressionFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Least-squares fit.
#[derive(Clone, Debug)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
}

pub fn ols(data: &RegressionData) -> Result<OlsFit> {
    let n = data.len();
    let k = data.ncols();
    if n < k {
        return domain(format!("{n} observations for {k} coefficients"));
    }
    let x = data.design();
    let xtx = x.transpose() * &x;
    let chol = xtx.clone().cholesky().ok_or(Error::SingularDesign)?;
    // Cholesky succeeds on numerically rank-deficient matrices with tiny pivots
    let diag = chol.l_dirty().diagonal();
    let scale = xtx.diagonal().max().max(f64::MIN_POSITIVE);
    if diag.iter().any(|d| d * d <= 1e-12 * scale) {
        return Err(Error::SingularDesign);
    }
    let y = DVector::from_column_slice(data.y());
    let beta = chol.solve(&(x.transpose() * &y));
    let residuals = (&y - &x * &beta).iter().copied().collect();
    Ok(OlsFit {
        beta: beta.iter().copied().collect(),
        residuals,
        xtx_inv: chol.inverse(),
    })
}
