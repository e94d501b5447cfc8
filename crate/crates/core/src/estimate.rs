//! Sequential tree-by-tree estimation of a stationary discrete D-vine.
//!
//! Each tree carries one copula shared by all of its edges. The tree-`l`
//! parameter maximizes the pooled likelihood of the `T - l` sliding windows
//! `(s_t, s_{t+l})` given the signs in between, with the lower trees held at
//! their estimates.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copula::{BivariateCopula, CdfPair, Family, PreparedCells, PROB_FLOOR};
use crate::dvine::{PmfWorkspace, VineSpec};
use crate::error::{domain, Error, Result};
use crate::optimize::minimize_bounded;

/// How the family of each tree is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyPolicy {
    Fixed(Family),
    /// Lowest AIC among the candidates.
    Aic(Vec<Family>),
}

impl Default for FamilyPolicy {
    fn default() -> Self {
        FamilyPolicy::Fixed(Family::GAUSSIAN)
    }
}

impl FamilyPolicy {
    pub fn candidates(&self) -> &[Family] {
        match self {
            FamilyPolicy::Fixed(f) => std::slice::from_ref(f),
            FamilyPolicy::Aic(c) => c,
        }
    }
}

impl fmt::Display for FamilyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyPolicy::Fixed(fam) => write!(f, "{fam}"),
            FamilyPolicy::Aic(c) => {
                let names: Vec<String> = c.iter().map(Family::to_string).collect();
                write!(f, "aic[{}]", names.join(","))
            }
        }
    }
}

impl FromStr for FamilyPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("aic") {
            return Ok(FamilyPolicy::Aic(Family::aic_candidates()));
        }
        Ok(FamilyPolicy::Fixed(s.parse()?))
    }
}

/// Parses a comma-separated candidate list such as `gaussian,indep,js(gaussian)`.
pub fn parse_candidates(s: &str) -> Result<Vec<Family>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(s[start..i].parse()?);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !s[start..].trim().is_empty() {
        out.push(s[start..].parse()?);
    }
    if out.is_empty() {
        return Err(Error::Config("empty copula candidate list".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationConfig {
    pub family: FamilyPolicy,
    /// Number of trees to estimate; later trees are independence.
    pub truncation: usize,
    /// Tolerance on the (transformed) parameter.
    pub tolerance: f64,
    pub max_iter: usize,
    pub jitter_seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            family: FamilyPolicy::default(),
            truncation: 2,
            tolerance: 1e-8,
            max_iter: 200,
            jitter_seed: 0,
        }
    }
}

/// Estimate for one tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeFit {
    pub tree: usize,
    pub copula: BivariateCopula,
    /// Pooled log-likelihood, `sum log(rectangle mass)` over the windows.
    pub loglik: f64,
    /// `loglik` minus its value under independence.
    pub gain: f64,
    pub aic: f64,
    pub iterations: usize,
    pub windows: usize,
    /// Set when a lower tree made the conditionals degenerate; the tree is
    /// then independence.
    pub degenerate: bool,
}

/// A vine with its per-tree estimation record.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedVine {
    pub spec: VineSpec,
    pub trees: Vec<TreeFit>,
}

impl FittedVine {
    /// Independence vine with the given margins.
    pub fn independent(margins: Vec<f64>) -> Result<Self> {
        Ok(FittedVine {
            spec: VineSpec::independent(margins)?,
            trees: Vec::new(),
        })
    }

    /// Pooled log-likelihood gain over the independence vine, summed over
    /// trees.
    pub fn loglik(&self) -> f64 {
        self.trees.iter().map(|t| t.gain).sum()
    }

    pub fn copulas(&self) -> Vec<BivariateCopula> {
        self.trees.iter().map(|t| t.copula).collect()
    }

    /// Compact description such as `gaussian(0.12)|indep`.
    pub fn summary(&self) -> String {
        if self.trees.is_empty() {
            return "indep".into();
        }
        let parts: Vec<String> = self
            .trees
            .iter()
            .map(|t| match t.copula.parameter() {
                Some(p) => {
                    let fam = t.copula.family();
                    format!("{fam}({p:.4})")
                }
                None => "indep".into(),
            })
            .collect();
        parts.join("|")
    }
}

// Validates the inputs and returns the margins clamped away from {0, 1}, as
// the vine itself stores them.
fn check_inputs(signs: &[bool], margins: &[f64]) -> Result<Vec<f64>> {
    if signs.len() != margins.len() {
        return domain(format!(
            "{} signs but {} margins",
            signs.len(),
            margins.len()
        ));
    }
    if signs.len() < 3 {
        return domain("estimation needs at least 3 signs");
    }
    if let Some(p) = margins.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return domain(format!("margin {p} outside [0, 1]"));
    }
    Ok(margins
        .iter()
        .map(|p| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
        .collect())
}

struct FamilyFit {
    copula: BivariateCopula,
    loglik: f64,
    iterations: usize,
}

fn fit_family(
    pairs: &PreparedCells,
    family: Family,
    start: f64,
    config: &EstimationConfig,
) -> Result<FamilyFit> {
    if family.n_params() == 0 {
        let copula = family.with_parameter(0.0)?;
        return Ok(FamilyFit {
            copula,
            loglik: pairs.loglik(&copula)?,
            iterations: 0,
        });
    }
    let (lo, hi) = family.free_bounds();
    let x0 = family.to_free(start);
    let x0 = if x0.is_finite() {
        x0
    } else {
        family.to_free(family.neutral_start())
    };
    let objective = |x: f64| {
        family
            .with_parameter(family.from_free(x))
            .and_then(|c| pairs.loglik(&c))
            .map_or(f64::MAX, |ll| -ll)
    };
    let min = minimize_bounded(objective, lo, hi, x0, config.tolerance, config.max_iter)?;
    let copula = family.with_parameter(family.from_free(min.x))?;
    Ok(FamilyFit {
        copula,
        loglik: -min.value,
        iterations: min.iterations,
    })
}

fn fit_tree(
    tree: usize,
    pairs: Vec<(CdfPair, CdfPair)>,
    start: impl Fn(Family) -> f64,
    config: &EstimationConfig,
) -> Result<TreeFit> {
    let pairs = PreparedCells::new(pairs)?;
    let baseline = pairs.loglik(&BivariateCopula::independence())?;
    let mut best: Option<TreeFit> = None;
    for &family in config.family.candidates() {
        let fit = fit_family(&pairs, family, start(family), config)?;
        let aic = -2.0 * fit.loglik + 2.0 * family.n_params() as f64;
        if best.as_ref().is_none_or(|b| aic < b.aic) {
            best = Some(TreeFit {
                tree,
                copula: fit.copula,
                loglik: fit.loglik,
                gain: fit.loglik - baseline,
                aic,
                iterations: fit.iterations,
                windows: pairs.len(),
                degenerate: false,
            });
        }
    }
    best.ok_or_else(|| Error::Config("empty copula candidate set".into()))
}

fn degenerate_tree(tree: usize) -> TreeFit {
    TreeFit {
        tree,
        copula: BivariateCopula::independence(),
        loglik: 0.0,
        gain: 0.0,
        aic: 0.0,
        iterations: 0,
        windows: 0,
        degenerate: true,
    }
}

/// Fits the first tree from the `T - 1` consecutive pairs.
pub fn fit_tree1(signs: &[bool], margins: &[f64], config: &EstimationConfig) -> Result<TreeFit> {
    let margins = check_inputs(signs, margins)?;
    let mut ws = PmfWorkspace::new();
    let pairs = ws
        .tree_inputs(&margins, &[], signs)?
        .expect("first tree inputs are never degenerate");
    fit_tree(
        1,
        pairs,
        |fam| tau_initializer(signs, config.jitter_seed, fam),
        config,
    )
}

/// Fits trees `1..=config.truncation` in order; each tree is estimated with
/// the earlier ones fixed.
pub fn fit_sequential(
    signs: &[bool],
    margins: &[f64],
    config: &EstimationConfig,
) -> Result<FittedVine> {
    let margins = check_inputs(signs, margins)?;
    let n = signs.len();
    let depth = config.truncation.clamp(1, n - 1);
    let mut ws = PmfWorkspace::new();
    let mut fits: Vec<TreeFit> = Vec::with_capacity(depth);
    let mut copulas: Vec<BivariateCopula> = Vec::with_capacity(depth);
    for l in 1..=depth {
        let fit = match ws.tree_inputs(&margins, &copulas, signs)? {
            Some(pairs) if l == 1 => fit_tree(
                1,
                pairs,
                |fam| tau_initializer(signs, config.jitter_seed, fam),
                config,
            )?,
            Some(pairs) => fit_tree(l, pairs, Family::neutral_start, config)?,
            None => degenerate_tree(l),
        };
        copulas.push(fit.copula);
        fits.push(fit);
    }
    Ok(FittedVine {
        spec: VineSpec::new(margins, copulas)?,
        trees: fits,
    })
}

/// Kendall's tau-a of paired samples (O(n^2); ties count as neither).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mut score = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (x[i] - x[j]) * (y[i] - y[j]);
            score += (s > 0.0) as i64 - (s < 0.0) as i64;
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

/// Starting value from the Kendall tau of the continuously extended signs
/// `s* = s + U - 1` on consecutive pairs. Falls back to the family's neutral
/// start when the series is short or the tau is infeasible for the family.
pub fn tau_initializer(signs: &[bool], jitter_seed: u64, family: Family) -> f64 {
    if signs.len() < 10 || family.n_params() == 0 {
        return family.neutral_start();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let ext: Vec<f64> = signs
        .iter()
        .map(|&s| s as u8 as f64 + rng.random::<f64>() - 1.0)
        .collect();
    let tau = kendall_tau(&ext[..ext.len() - 1], &ext[1..]);
    family
        .tau_to_parameter(tau)
        .unwrap_or_else(|_| family.neutral_start())
}
