use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vinesign::competitors::{cd_sign_test, t_test, white_t_test};
use vinesign::confregion::{invert_test, ParamGrid};
use vinesign::estimate::EstimationConfig;
use vinesign::regression::RegressionData;
use vinesign::signtest::{point_optimal_test, split_sample_test, SignTestConfig, TestOutcome, VineSource};
use vinesign::sim::{self, envelope_study, parse_errdist, power_curves, size_table, Manifest, StudySpec, TestKind};
use vinesign::{Error, Result};

#[derive(Parser)]
#[command(name = "pos", version, about = "Point-optimal sign tests for predictive regressions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test H0: beta = beta0 on a data file.
    Test(TestArgs),
    /// Print the simulated null distribution of the sign statistic.
    NullDist(TestArgs),
    /// Confidence set by test inversion over a grid.
    Confidence(ConfidenceArgs),
    /// Size and power study.
    Simulate(StudyArgs),
    /// Split-fraction curves against the point-optimal envelope.
    Envelope(StudyArgs),
}

#[derive(Args)]
struct SignArgs {
    /// CSV with header `y,x1,...,xk`; row t holds y_t and the regressors dated t-1.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Null replications.
    #[arg(long, default_value_t = 999)]
    m1: usize,
    /// Share of the sample used to estimate the alternative.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// normal, cauchy, mixture, or t(df)
    #[arg(long, default_value = "normal")]
    errdist: String,
    /// Copula family, or `aic`.
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Comma-separated candidates for `--family aic`.
    #[arg(long)]
    aic_candidates: Option<String>,
    #[arg(long, default_value_t = 2)]
    truncation: usize,
    /// refit | first | observed | indep
    #[arg(long, default_value = "refit")]
    vine_source: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    sign: SignArgs,
    /// Comma-separated null coefficients.
    #[arg(long, allow_hyphen_values = true)]
    beta0: String,
    /// pos | t | wt | cd
    #[arg(long, default_value = "pos")]
    test: String,
    /// Nominated alternative; the sign test then uses the whole sample.
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<String>,
}

#[derive(Args)]
struct ConfidenceArgs {
    #[command(flatten)]
    sign: SignArgs,
    /// `lo:hi:n` per coefficient, comma-separated.
    #[arg(long)]
    grid: String,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study configuration.
    #[arg(long)]
    study: PathBuf,
    /// Overrides `study.output`; stdout when neither is set.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Only the beta = 0 column (simulate).
    #[arg(long)]
    size_only: bool,
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{v}`")))
        })
        .collect()
}

fn read_data(path: &Path) -> Result<RegressionData> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let ncols = reader.headers().map_err(|e| Error::Io(e.to_string()))?.len();
    if ncols < 2 {
        return Err(Error::Config("data needs a y column and at least one regressor".into()));
    }
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io(e.to_string()))?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Config(format!("row {}: bad number `{field}`", line + 1))
            })?;
            if j == 0 {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    RegressionData::from_flat(y, x, ncols - 1)
}

fn sign_config(a: &SignArgs) -> Result<SignTestConfig> {
    let config = SignTestConfig {
        alpha: a.alpha,
        m1: a.m1,
        fraction: a.fraction,
        errdist: parse_errdist(&a.errdist)?,
        estimation: EstimationConfig {
            family: sim::family_policy(&a.family, a.aic_candidates.as_deref())?,
            truncation: a.truncation,
            ..Default::default()
        },
        vine_source: a.vine_source.parse::<VineSource>()?,
        ..Default::default()
    };
    config.validate()?;
    Ok(config)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(";")
}

fn run_sign(args: &TestArgs, data: &RegressionData, config: &SignTestConfig) -> Result<TestOutcome> {
    let beta0 = parse_vector(&args.beta0)?;
    match &args.beta1 {
        Some(b) => point_optimal_test(data, &beta0, &parse_vector(b)?, config, args.sign.seed),
        None => split_sample_test(data, &beta0, config, args.sign.seed),
    }
}

fn cmd_test(args: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_data(&args.sign.data)?;
    let config = sign_config(&args.sign)?;
    let beta0 = parse_vector(&args.beta0)?;
    match args.test.parse::<TestKind>()? {
        TestKind::Pos => {
            let o = run_sign(args, &data, &config)?;
            writeln!(out, "statistic,critical,p_value,reject,beta1_hat,t1,t2,m1,seed,vine")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},\"{}\"",
                o.statistic,
                o.critical,
                o.p_value,
                o.reject,
                fmt_vec(&o.beta1),
                o.t1,
                o.t2,
                o.m1,
                o.seed,
                o.vine
            )?;
        }
        kind => {
            let o = match kind {
                TestKind::T => t_test(&data, &beta0, config.alpha)?,
                TestKind::Wt => white_t_test(&data, &beta0, config.alpha)?,
                _ => cd_sign_test(&data, &beta0, config.alpha)?,
            };
            writeln!(out, "test,statistic,critical,reject,alpha,realized_size")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                o.name,
                o.statistic,
                o.critical,
                o.reject,
                o.alpha,
                o.realized_size.map(|s| s.to_string()).unwrap_or_default()
            )?;
        }
    }
    Ok(())
}

fn cmd_null_dist(args: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_data(&args.sign.data)?;
    let config = sign_config(&args.sign)?;
    let o = run_sign(args, &data, &config)?;
    writeln!(out, "statistic")?;
    for v in &o.null {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn cmd_confidence(args: &ConfidenceArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_data(&args.sign.data)?;
    let config = sign_config(&args.sign)?;
    let grid: ParamGrid = args.grid.parse()?;
    let region = invert_test(&data, &grid, &config, args.sign.seed)?;
    let header: Vec<String> = (0..grid.dim()).map(|j| format!("beta0_{}", j + 1)).collect();
    writeln!(out, "{},statistic,critical,p_value,accepted", header.join(","))?;
    for p in &region.points {
        let coords: Vec<String> = p.beta0.iter().map(|b| b.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            coords.join(","),
            p.statistic,
            p.critical,
            p.p_value,
            p.accepted
        )?;
    }
    for p in region.points.iter().filter(|p| p.error.is_some()) {
        eprintln!("warning: test failed at {:?}: {}", p.beta0, p.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn cmd_study(args: &StudyArgs, envelope: bool, command: &str) -> Result<()> {
    let text = fs::read_to_string(&args.study)?;
    let spec = StudySpec::from_toml(&text)?;
    let cells = if envelope {
        envelope_study(&spec)?
    } else if args.size_only {
        size_table(&spec)?
    } else {
        power_curves(&spec)?
    };
    let output = args
        .output
        .clone()
        .or_else(|| spec.config.study.output.as_ref().map(PathBuf::from));
    match &output {
        Some(path) => sim::write_csv(&cells, fs::File::create(path)?)?,
        None => sim::write_csv(&cells, io::stdout().lock())?,
    }
    let manifest_path = spec
        .config
        .study
        .manifest
        .as_ref()
        .map(PathBuf::from)
        .or_else(|| output.as_ref().map(|p| p.with_extension("json")));
    if let Some(path) = manifest_path {
        fs::write(path, Manifest::new(command, &spec, &cells).to_json())?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::TooManyFailures { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let stdout = io::stdout();
    let result = match &cli.command {
        Command::Test(a) => cmd_test(a, &mut stdout.lock()),
        Command::NullDist(a) => cmd_null_dist(a, &mut stdout.lock()),
        Command::Confidence(a) => cmd_confidence(a, &mut stdout.lock()),
        Command::Simulate(a) => cmd_study(a, false, &command_line),
        Command::Envelope(a) => cmd_study(a, true, &command_line),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
