//! Monte Carlo studies: size tables, power curves, and the split-fraction
//! envelope study.
//!
//! Every replication draws its own data set from a seed derived from
//! `(master seed, dgp, rho index, beta index, replication)`, and all tests in
//! a replication see the same data. Results are aggregated by index, so the
//! output does not depend on scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::competitors::{cd_sign_test, t_test, white_t_test};
use crate::dgp::{generate, DgpSpec, ErrorScheme};
use crate::distributions::ErrorDistribution;
use crate::error::{Error, Result};
use crate::estimate::{parse_candidates, EstimationConfig, FamilyPolicy};
use crate::regression::RegressionData;
use crate::seeds;
use crate::signtest::{
    point_optimal_test, split_sample_test, split_sizes, SignTestConfig, VineSource,
};

/// Share of failed replications above which a study aborts.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TestKind {
    /// Split-sample point-optimal sign test.
    Pos,
    T,
    /// White-corrected t-test.
    Wt,
    /// Sign-alignment test.
    Cd,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Pos => "pos",
            TestKind::T => "t",
            TestKind::Wt => "wt",
            TestKind::Cd => "cd",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" => Ok(TestKind::Pos),
            "t" => Ok(TestKind::T),
            "wt" => Ok(TestKind::Wt),
            "cd" => Ok(TestKind::Cd),
            other => Err(Error::Config(format!("unknown test `{other}`"))),
        }
    }
}

/// A list of numbers, or a `lo:hi:n` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Spec(String),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::Values(v) => Ok(v.clone()),
            Grid::Spec(s) => {
                let g: crate::confregion::ParamGrid = s.parse()?;
                if g.dim() != 1 {
                    return Err(Error::Config(format!("grid `{s}` must be one-dimensional")));
                }
                Ok(g.points().map(|p| p[0]).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpSection {
    pub schemes: Vec<String>,
    pub rho: Vec<f64>,
    pub theta: f64,
    #[serde(rename = "T", alias = "n")]
    pub n: usize,
    pub beta: Grid,
}

impl Default for DgpSection {
    fn default() -> Self {
        DgpSection {
            schemes: vec!["normal".into()],
            rho: vec![0.0],
            theta: 0.9,
            n: 50,
            beta: Grid::Spec("0:0.5:11".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSection {
    pub tests: Vec<String>,
    pub alpha: f64,
    pub m1: usize,
    pub fraction: f64,
    /// Nominal error law for margins and weights: normal, cauchy, mixture, or t(df).
    pub errdist: String,
}

impl Default for TestSection {
    fn default() -> Self {
        TestSection {
            tests: vec!["pos".into(), "t".into(), "wt".into(), "cd".into()],
            alpha: 0.05,
            m1: 199,
            fraction: 0.1,
            errdist: "normal".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopulaSection {
    /// A family name, or `aic`.
    pub family: String,
    /// Candidates for `aic`; the default set when empty.
    pub aic_candidates: Option<String>,
}

impl Default for CopulaSection {
    fn default() -> Self {
        CopulaSection {
            family: "gaussian".into(),
            aic_candidates: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VineSection {
    pub truncation: usize,
    /// refit | first | observed | indep
    pub source: String,
}

impl Default for VineSection {
    fn default() -> Self {
        VineSection {
            truncation: 2,
            source: VineSource::default().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub jitter_seed: u64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for EstimateSection {
    fn default() -> Self {
        let e = EstimationConfig::default();
        EstimateSection {
            jitter_seed: e.jitter_seed,
            tolerance: e.tolerance,
            max_iter: e.max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub reps: usize,
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub output: Option<String>,
    pub manifest: Option<String>,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            reps: 1000,
            seed: 1,
            fractions: vec![0.1, 0.3, 0.5, 0.7],
            output: None,
            manifest: None,
        }
    }
}

/// The configuration file, section by section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub dgp: DgpSection,
    pub test: TestSection,
    pub copula: CopulaSection,
    pub vine: VineSection,
    pub estimate: EstimateSection,
    pub study: StudySection,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_errdist(s: &str) -> Result<ErrorDistribution> {
    s.parse()
        .map_err(|e: Error| Error::Config(format!("error distribution `{s}`: {e}")))
}

/// `aic` (optionally with an explicit candidate list) or a single family.
pub fn family_policy(family: &str, aic_candidates: Option<&str>) -> Result<FamilyPolicy> {
    match aic_candidates {
        Some(c) if family.trim().eq_ignore_ascii_case("aic") => Ok(FamilyPolicy::Aic(parse_candidates(c)?)),
        _ => family.parse().map_err(|e: Error| Error::Config(e.to_string())),
    }
}

/// A validated study.
#[derive(Clone, Debug)]
pub struct StudySpec {
    pub schemes: Vec<ErrorScheme>,
    pub rhos: Vec<f64>,
    pub theta: f64,
    pub n: usize,
    pub betas: Vec<f64>,
    pub tests: Vec<TestKind>,
    pub reps: usize,
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub sign: SignTestConfig,
    pub config: StudyConfig,
}

impl StudySpec {
    pub fn from_config(config: StudyConfig) -> Result<Self> {
        let schemes = config
            .dgp
            .schemes
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ErrorScheme>>>()?;
        let tests = config
            .test
            .tests
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<TestKind>>>()?;
        let betas = config.dgp.beta.values()?;
        let family = family_policy(&config.copula.family, config.copula.aic_candidates.as_deref())?;
        let estimation = EstimationConfig {
            family,
            truncation: config.vine.truncation,
            tolerance: config.estimate.tolerance,
            max_iter: config.estimate.max_iter,
            jitter_seed: config.estimate.jitter_seed,
        };
        let sign = SignTestConfig {
            alpha: config.test.alpha,
            m1: config.test.m1,
            fraction: config.test.fraction,
            errdist: parse_errdist(&config.test.errdist)?,
            estimation,
            vine_source: config.vine.source.parse()?,
            ..Default::default()
        };
        let spec = StudySpec {
            schemes,
            rhos: config.dgp.rho.clone(),
            theta: config.dgp.theta,
            n: config.dgp.n,
            betas,
            tests,
            reps: config.study.reps,
            fractions: config.study.fractions.clone(),
            seed: config.study.seed,
            sign,
            config,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_config(StudyConfig::from_toml(text)?)
    }

    fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.schemes.is_empty() || self.rhos.is_empty() || self.betas.is_empty() {
            return cfg("schemes, rho and beta grids must be nonempty".into());
        }
        if self.tests.is_empty() {
            return cfg("no tests selected".into());
        }
        if self.reps < 99 {
            return cfg(format!("{} replications, need at least 99", self.reps));
        }
        if self.config.vine.truncation == 0 {
            return cfg("vine truncation must be at least 1".into());
        }
        self.sign.validate()?;
        for &scheme in &self.schemes {
            for &rho in &self.rhos {
                self.dgp(scheme, rho, 0.0)
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if self.betas.iter().any(|b| !b.is_finite()) {
            return cfg("non-finite beta".into());
        }
        Ok(())
    }

    pub fn dgp(&self, scheme: ErrorScheme, rho: f64, beta: f64) -> DgpSpec {
        DgpSpec {
            n: self.n,
            theta: self.theta,
            rho,
            scheme,
            beta,
        }
    }
}

/// Rejection count of one test in one (dgp, rho, beta) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub dgp: ErrorScheme,
    pub rho: f64,
    pub beta: f64,
    pub test: String,
    pub rejections: usize,
    /// Successful replications.
    pub reps: usize,
    pub failures: usize,
}

impl Cell {
    pub fn power(&self) -> f64 {
        if self.reps == 0 {
            f64::NAN
        } else {
            self.rejections as f64 / self.reps as f64
        }
    }

    /// `sqrt(p (1 - p) / reps)`.
    pub fn se(&self) -> f64 {
        let p = self.power();
        (p * (1.0 - p) / self.reps as f64).sqrt()
    }
}

pub const CSV_HEADER: [&str; 8] = ["dgp", "rho", "beta", "test", "rejections", "reps", "power", "se"];

pub fn write_csv<W: Write>(cells: &[Cell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in cells {
        w.write_record([
            c.dgp.name().to_string(),
            c.rho.to_string(),
            c.beta.to_string(),
            c.test.clone(),
            c.rejections.to_string(),
            c.reps.to_string(),
            format!("{:.6}", c.power()),
            format!("{:.6}", c.se()),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Run metadata written next to the CSV.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a StudyConfig,
    pub master_seed: u64,
    pub seed_derivation: &'static str,
    pub cells: usize,
    pub failures: Vec<FailureNote>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureNote {
    pub dgp: String,
    pub rho: f64,
    pub beta: f64,
    pub test: String,
    pub failures: usize,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, spec: &'a StudySpec, cells: &[Cell]) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: &spec.config,
            master_seed: spec.seed,
            seed_derivation: "data: derive(master, [dgp id, rho index, beta index, replication]); \
                              null draws: derive(data seed, [test tag]) then derive(., [draw])",
            cells: cells.len(),
            failures: cells
                .iter()
                .filter(|c| c.failures > 0)
                .map(|c| FailureNote {
                    dgp: c.dgp.to_string(),
                    rho: c.rho,
                    beta: c.beta,
                    test: c.test.clone(),
                    failures: c.failures,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

// tags separating the null-draw streams of different tests in a replication
const TAG_POS: u64 = 0x505f_5301;
const TAG_PE: u64 = 0x505f_4501;

pub fn data_seed(master: u64, scheme: ErrorScheme, rho_idx: usize, beta_idx: usize, rep: usize) -> u64 {
    seeds::derive(master, &[scheme.id(), rho_idx as u64, beta_idx as u64, rep as u64])
}

/// One named procedure applied to a replication's data.
type Procedure<'a> = Box<dyn Fn(&RegressionData, f64, u64) -> Result<bool> + Send + Sync + 'a>;

fn run_cells(
    spec: &StudySpec,
    betas: &[(usize, f64)],
    procedures: &[(String, Procedure<'_>)],
) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &scheme in &spec.schemes {
        for (ri, &rho) in spec.rhos.iter().enumerate() {
            for &(bi, beta) in betas {
                let dgp = spec.dgp(scheme, rho, beta);
                // per replication, one decision (or failure) per procedure
                let outcomes: Vec<Vec<Result<bool>>> = (0..spec.reps)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = data_seed(spec.seed, scheme, ri, bi, rep);
                        match generate(&dgp, &mut seeds::rng(seed, &[])) {
                            Ok(data) => procedures.iter().map(|(_, p)| p(&data, beta, seed)).collect(),
                            Err(e) => procedures.iter().map(|_| Err(e.clone())).collect(),
                        }
                    })
                    .collect();
                for (k, (name, _)) in procedures.iter().enumerate() {
                    let mut cell = Cell {
                        dgp: scheme,
                        rho,
                        beta,
                        test: name.clone(),
                        rejections: 0,
                        reps: 0,
                        failures: 0,
                    };
                    let mut first_error = None;
                    for o in &outcomes {
                        match &o[k] {
                            Ok(r) => {
                                cell.reps += 1;
                                cell.rejections += *r as usize;
                            }
                            Err(e) => {
                                cell.failures += 1;
                                first_error.get_or_insert_with(|| e.to_string());
                            }
                        }
                    }
                    if cell.failures as f64 > MAX_FAILURE_RATE * spec.reps as f64 {
                        return Err(Error::TooManyFailures {
                            failed: cell.failures,
                            total: spec.reps,
                            detail: format!(
                                "{scheme}, rho {rho}, beta {beta}, test {name}: {}",
                                first_error.unwrap_or_default()
                            ),
                        });
                    }
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}

fn test_procedure<'a>(kind: TestKind, sign: &'a SignTestConfig) -> Procedure<'a> {
    let alpha = sign.alpha;
    match kind {
        TestKind::Pos => Box::new(move |d, _, seed| {
            Ok(split_sample_test(d, &[0.0], sign, seeds::derive(seed, &[TAG_POS]))?.reject)
        }),
        TestKind::T => Box::new(move |d, _, _| Ok(t_test(d, &[0.0], alpha)?.reject)),
        TestKind::Wt => Box::new(move |d, _, _| Ok(white_t_test(d, &[0.0], alpha)?.reject)),
        TestKind::Cd => Box::new(move |d, _, _| Ok(cd_sign_test(d, &[0.0], alpha)?.reject)),
    }
}

/// Rejection frequencies of `H0: beta = 0` for every (dgp, rho, beta, test).
pub fn power_curves(spec: &StudySpec) -> Result<Vec<Cell>> {
    let procedures: Vec<(String, Procedure<'_>)> = spec
        .tests
        .iter()
        .map(|&k| (k.name().to_string(), test_procedure(k, &spec.sign)))
        .collect();
    let betas: Vec<(usize, f64)> = spec.betas.iter().copied().enumerate().collect();
    run_cells(spec, &betas, &procedures)
}

/// The `beta = 0` column of the power study.
pub fn size_table(spec: &StudySpec) -> Result<Vec<Cell>> {
    let idx = spec
        .betas
        .iter()
        .position(|&b| b == 0.0)
        .ok_or_else(|| Error::Config("beta grid must contain 0 for a size table".into()))?;
    let procedures: Vec<(String, Procedure<'_>)> = spec
        .tests
        .iter()
        .map(|&k| (k.name().to_string(), test_procedure(k, &spec.sign)))
        .collect();
    run_cells(spec, &[(idx, 0.0)], &procedures)
}

/// Name of the split curve for a fraction, e.g. `pos10`.
pub fn split_curve_name(fraction: f64) -> String {
    format!("pos{}", (fraction * 100.0).round())
}

pub const ENVELOPE_NAME: &str = "pe";

/// Split-sample curves for each fraction and the simulated envelope: the
/// point-optimal test at the true `beta`, on the full sample.
///
/// Without a first subsample the envelope cannot use a first-subsample vine;
/// in that configuration it uses an independence vine.
pub fn envelope_study(spec: &StudySpec) -> Result<Vec<Cell>> {
    if spec.fractions.is_empty() {
        return Err(Error::Config("no split fractions".into()));
    }
    let mut configs = Vec::new();
    for &f in &spec.fractions {
        let (t1, t2) = split_sizes(spec.n, f);
        if !(f > 0.0 && f < 1.0) || t1 < 3 {
            return Err(Error::Config(format!("split fraction {f} leaves {t1} first-stage observations")));
        }
        if t2 < 10 {
            return Err(Error::Domain(format!("split fraction {f} leaves {t2} test observations")));
        }
        configs.push((
            split_curve_name(f),
            SignTestConfig {
                fraction: f,
                ..spec.sign.clone()
            },
        ));
    }
    let mut pe = spec.sign.clone();
    if pe.vine_source == VineSource::FirstSubsample {
        pe.vine_source = VineSource::Independent;
    }
    let mut procedures: Vec<(String, Procedure<'_>)> = vec![(
        ENVELOPE_NAME.to_string(),
        Box::new(move |d: &RegressionData, beta: f64, seed: u64| {
            Ok(point_optimal_test(d, &[0.0], &[beta], &pe, seeds::derive(seed, &[TAG_PE]))?.reject)
        }),
    )];
    for (name, cfg) in configs {
        procedures.push((
            name,
            Box::new(move |d: &RegressionData, _: f64, seed: u64| {
                Ok(split_sample_test(d, &[0.0], &cfg, seeds::derive(seed, &[TAG_POS]))?.reject)
            }),
        ));
    }
    let betas: Vec<(usize, f64)> = spec.betas.iter().copied().enumerate().collect();
    run_cells(spec, &betas, &procedures)
}

/// Mean over the grid of `envelope - curve` for one (dgp, rho).
pub fn mean_envelope_gap(cells: &[Cell], dgp: ErrorScheme, rho: f64, curve: &str) -> Option<f64> {
    let pick = |name: &str| -> Vec<&Cell> {
        cells
            .iter()
            .filter(|c| c.dgp == dgp && c.rho == rho && c.test == name)
            .collect()
    };
    let env = pick(ENVELOPE_NAME);
    let cur = pick(curve);
    if env.is_empty() || env.len() != cur.len() {
        return None;
    }
    let gaps: Vec<f64> = env
        .iter()
        .zip(&cur)
        .map(|(e, c)| e.power() - c.power())
        .collect();
    Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
}
