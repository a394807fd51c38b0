//! `phasefit` command-line front end.
//!
//! Model JSON and data go to stdout, diagnostics to stderr. Exit codes: 0 on
//! success or PASS, 1 on a failed verification, 2 on usage or domain errors.

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, MomentSummary};
use crate::des::{self, Mph1Config};
use crate::error::Error as ModelError;
use crate::fitting::{self, FitResult};
use crate::markov;
use crate::model::GeneralizedCoxModel;
use crate::sampling::{self, SamplerState, GENERATOR_NAME};

/// Seed used when neither `--seed` nor `PHASEFIT_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(
    name = "phasefit",
    version,
    about = "Fit, sample and export generalized Cox distributions"
)]
pub struct Cli {
    /// Seed of the pseudo-random stream.
    #[arg(long, global = true, env = "PHASEFIT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Write the primary output to this file instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a minimal model to a mean and variance, or to observed data.
    #[command(group(ArgGroup::new("input").required(true).args(["mean", "data"])))]
    Fit {
        #[arg(
            long,
            requires = "var",
            conflicts_with = "data",
            allow_negative_numbers = true
        )]
        mean: Option<f64>,
        #[arg(long, requires = "mean", allow_negative_numbers = true)]
        var: Option<f64>,
        /// Single-column CSV of nonnegative observations (`#` lines ignored).
        #[arg(long)]
        data: Option<PathBuf>,
        /// auto | almost-erlang | simplest-hyper | hyper:P | sauer-chandy
        #[arg(long, default_value = "auto", value_parser = parse_family)]
        family: FamilyChoice,
        /// Approximate a zero-variance target by an Erlang with this many stages.
        #[arg(long, value_name = "N")]
        approx_deterministic: Option<usize>,
    },
    /// Draw variates from a model.
    Sample {
        /// Model JSON file, or `-` for stdin.
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'n', long = "count")]
        count: usize,
    },
    /// Print raw moments 1..=K.
    Moments {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'k', default_value_t = 4)]
        k: u32,
    },
    /// Export the absorbing CTMC as JSON or Graphviz DOT.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::CtmcJson)]
        format: ExportFormat,
        /// Use an explicit routing state with this rate (default: 1e4 x max stage rate).
        #[arg(long, value_name = "BIGLAMBDA", num_args = 0..=1)]
        approx_routing: Option<Option<f64>>,
    },
    /// Check sample mean and variance against analytic (or given) targets.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'n', long = "count", default_value_t = 1_000_000)]
        count: usize,
        /// Target mean (defaults to the model's analytic mean).
        #[arg(long, requires = "var")]
        mean: Option<f64>,
        /// Target variance (defaults to the model's analytic variance).
        #[arg(long, requires = "mean")]
        var: Option<f64>,
    },
    /// Simulate an M/PH/1 queue with the given service model.
    Simulate {
        #[arg(long)]
        service: PathBuf,
        #[arg(long)]
        arrival_rate: f64,
        #[arg(long, default_value_t = 500_000)]
        customers: usize,
        #[arg(long, default_value_t = 0.1)]
        warmup: f64,
        #[arg(long, default_value_t = 20)]
        batches: usize,
        /// Also write per-customer waits (after warm-up) to this CSV file.
        #[arg(long)]
        waits_csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyChoice {
    Auto,
    AlmostErlang,
    SimplestHyper,
    Hyper(f64),
    SauerChandy,
}

fn parse_family(s: &str) -> Result<FamilyChoice, String> {
    match s {
        "auto" => Ok(FamilyChoice::Auto),
        "almost-erlang" => Ok(FamilyChoice::AlmostErlang),
        "simplest-hyper" => Ok(FamilyChoice::SimplestHyper),
        "sauer-chandy" => Ok(FamilyChoice::SauerChandy),
        _ => match s.strip_prefix("hyper:") {
            Some(p) => p
                .parse()
                .map(FamilyChoice::Hyper)
                .map_err(|e| format!("bad routing probability {p:?}: {e}")),
            None => Err(format!("unknown family {s:?}")),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    CtmcJson,
    Dot,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("invalid model JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl From<io::Error> for CliError {
    fn from(source: io::Error) -> Self {
        CliError::Io {
            path: "<output>".into(),
            source,
        }
    }
}

/// Outcome of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 1,
        }
    }
}

/// Parses `std::env::args` and runs; the binary's entry point.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut err = io::stderr().lock();
    let result = match &cli.output {
        Some(path) => match fs::File::create(path) {
            Ok(f) => run(&cli, &mut BufWriter::new(f), &mut err),
            Err(source) => Err(CliError::Io {
                path: path.display().to_string(),
                source,
            }),
        },
        None => run(&cli, &mut BufWriter::new(io::stdout().lock()), &mut err),
    };
    match result {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status, CliError> {
    let status = match &cli.command {
        Command::Fit {
            mean,
            var,
            data,
            family,
            approx_deterministic,
        } => {
            let target = match (mean, var, data) {
                (Some(m), Some(v), None) => MomentSummary {
                    mean: *m,
                    variance: *v,
                    second_moment: m * m + v,
                    cv2: v / (m * m),
                    higher: Vec::new(),
                },
                (None, None, Some(path)) => {
                    let data = read_observations(path)?;
                    writeln!(err, "data_n={}", data.len())?;
                    fitting::sample_stats(&data)?
                }
                _ => return Err(CliError::Usage("give --mean and --var, or --data".into())),
            };
            let fit = fit_target(&target, *family, *approx_deterministic, err)?;
            write_fit_diagnostics(&fit, err)?;
            writeln!(out, "{}", fit.model.to_json())?;
            Status::Ok
        }
        Command::Sample { model, count } => {
            let (m, text) = load_model(model)?;
            writeln!(out, "# seed={}", cli.seed)?;
            writeln!(out, "# generator={GENERATOR_NAME}")?;
            writeln!(out, "# model_sha256={}", model_hash(&text))?;
            writeln!(out, "# n={count}")?;
            let mut state = SamplerState::new(cli.seed);
            for _ in 0..*count {
                writeln!(out, "{}", sampling::sample(&m, &mut state))?;
            }
            Status::Ok
        }
        Command::Moments { model, k } => {
            if *k == 0 {
                return Err(CliError::Usage("-k must be >= 1".into()));
            }
            let (m, _) = load_model(model)?;
            writeln!(out, "# k\tE[T^k]")?;
            for i in 1..=*k {
                writeln!(out, "{i}\t{}", analysis::moment_k(&m, i)?)?;
            }
            Status::Ok
        }
        Command::Export {
            model,
            format,
            approx_routing,
        } => {
            let (m, _) = load_model(model)?;
            let ctmc = match approx_routing {
                None => markov::exact_absorbing_ctmc(&m),
                Some(big) => {
                    let big = big.unwrap_or_else(|| markov::default_big_lambda(&m));
                    writeln!(err, "routing_rate={big}")?;
                    markov::approx_ctmc(&m, big)?
                }
            };
            match format {
                ExportFormat::CtmcJson => writeln!(out, "{}", ctmc.to_json())?,
                ExportFormat::Dot => write!(out, "{}", ctmc.to_dot())?,
            }
            Status::Ok
        }
        Command::Verify {
            model,
            count,
            mean,
            var,
        } => {
            let (m, text) = load_model(model)?;
            let target = match (mean, var) {
                (Some(mu), Some(v)) => MomentSummary::from_mean_variance(*mu, *v)?,
                _ => analysis::summary(&m),
            };
            let report = sampling::empirical_check_against(&m, &target, *count, cli.seed)?;
            writeln!(out, "seed={}", cli.seed)?;
            writeln!(out, "generator={GENERATOR_NAME}")?;
            writeln!(out, "model_sha256={}", model_hash(&text))?;
            writeln!(out, "n={}", report.n)?;
            writeln!(out, "target_mean={}", report.target_mean)?;
            writeln!(out, "sample_mean={}", report.sample_mean)?;
            writeln!(out, "se_mean={}", report.se_mean)?;
            writeln!(out, "mean_z={}", report.mean_z())?;
            writeln!(out, "target_variance={}", report.target_variance)?;
            writeln!(out, "sample_variance={}", report.sample_variance)?;
            writeln!(out, "se_variance={}", report.se_variance)?;
            writeln!(out, "variance_z={}", report.variance_z())?;
            writeln!(out, "zero_fraction={}", report.zero_fraction)?;
            if report.passed() {
                writeln!(out, "result=PASS")?;
                Status::Ok
            } else {
                writeln!(out, "result=FAIL")?;
                Status::VerificationFailed
            }
        }
        Command::Simulate {
            service,
            arrival_rate,
            customers,
            warmup,
            batches,
            waits_csv,
        } => {
            let (m, _) = load_model(service)?;
            let config = Mph1Config {
                arrival_rate: *arrival_rate,
                customers: *customers,
                warmup_fraction: *warmup,
                batches: *batches,
                seed: cli.seed,
                record_waits: waits_csv.is_some(),
            };
            let outcome = des::simulate_mph1(&config, &m)?;
            let s = &outcome.stats;
            writeln!(out, "seed={}", cli.seed)?;
            writeln!(out, "arrival_rate={arrival_rate}")?;
            writeln!(out, "rho={}", s.rho)?;
            writeln!(out, "stable={}", !s.unstable)?;
            writeln!(out, "n_served={}", s.n_served)?;
            writeln!(out, "mean_wait={}", s.mean_wait)?;
            writeln!(out, "se_wait={}", s.se_wait)?;
            writeln!(out, "mean_system_time={}", s.mean_system_time)?;
            writeln!(out, "utilization={}", s.utilization)?;
            if s.unstable {
                writeln!(
                    err,
                    "warning: utilization {} >= 1, statistics are not steady-state",
                    s.rho
                )?;
            } else {
                let pk = des::pk_mean_wait(*arrival_rate, &analysis::summary(&m))?;
                writeln!(out, "pk_mean_wait={pk}")?;
            }
            if let (Some(path), Some(waits)) = (waits_csv, &outcome.waits) {
                write_waits(path, waits)?;
            }
            Status::Ok
        }
    };
    out.flush()?;
    Ok(status)
}

fn fit_target(
    target: &MomentSummary,
    family: FamilyChoice,
    approx_deterministic: Option<usize>,
    err: &mut dyn Write,
) -> Result<FitResult, CliError> {
    let (mu, s2) = (target.mean, target.variance);
    if s2 == 0.0 {
        if let Some(n) = approx_deterministic {
            writeln!(err, "note: zero variance approximated by Erlang-{n}")?;
            return Ok(fitting::approximate_deterministic(mu, n)?);
        }
    } else if approx_deterministic.is_some() {
        writeln!(
            err,
            "note: --approx-deterministic ignored for nonzero variance"
        )?;
    }
    let fit = match family {
        FamilyChoice::Auto => fitting::fit_two_moments(mu, s2),
        FamilyChoice::AlmostErlang => fitting::almost_erlang(mu, s2),
        FamilyChoice::SimplestHyper => fitting::simplest_hyper(mu, s2),
        FamilyChoice::Hyper(p) => fitting::hyper_family(mu, s2, p),
        FamilyChoice::SauerChandy => fitting::sauer_chandy(mu, s2),
    }?;
    Ok(fit)
}

fn write_fit_diagnostics(fit: &FitResult, err: &mut dyn Write) -> Result<(), CliError> {
    writeln!(err, "family={}", fit.family)?;
    writeln!(err, "n_transient={}", fit.n_transient)?;
    writeln!(err, "target_mean={}", fit.target.mean)?;
    writeln!(err, "target_variance={}", fit.target.variance)?;
    writeln!(err, "achieved_mean={}", fit.achieved.mean)?;
    writeln!(err, "achieved_variance={}", fit.achieved.variance)?;
    if let Some(a) = fit.alpha {
        writeln!(err, "alpha={a}")?;
    }
    let probs: Vec<f64> = fit.model.branches().iter().map(|b| b.prob).collect();
    let lengths: Vec<usize> = fit.model.branches().iter().map(|b| b.len()).collect();
    let mu = fit.achieved.mean;
    if let Ok(r) = analysis::min_second_moment(&probs, &lengths, mu) {
        writeln!(
            err,
            "second_moment_ratio={}",
            fit.achieved.second_moment / (mu * mu)
        )?;
        writeln!(err, "min_second_moment_ratio={}", r.ratio_min)?;
        writeln!(err, "lower_bound={}", r.lower_bound)?;
    }
    Ok(())
}

fn read_source(path: &Path) -> Result<String, CliError> {
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(io_err)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(io_err)
    }
}

/// Reads a model JSON file (`-` for stdin); returns the model and raw text.
pub fn load_model(path: &Path) -> Result<(GeneralizedCoxModel, String), CliError> {
    let text = read_source(path)?;
    let model = GeneralizedCoxModel::from_json(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })?;
    Ok((model, text))
}

/// SHA-256 of the canonical model JSON, first 16 hex digits.
pub fn model_hash(text: &str) -> String {
    let canonical = GeneralizedCoxModel::from_json(text)
        .map(|m| m.to_json())
        .unwrap_or_else(|_| text.to_string());
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(&digest[..8])
}

/// One float per line; blank lines and lines starting with `#` are skipped.
pub fn parse_observations(text: &str) -> Result<Vec<f64>, CliError> {
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: f64 = line
            .trim_end_matches(',')
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("line {}: {line:?}: {e}", i + 1)))?;
        data.push(value);
    }
    Ok(data)
}

fn read_observations(path: &Path) -> Result<Vec<f64>, CliError> {
    parse_observations(&read_source(path)?)
}

fn write_waits(path: &Path, waits: &[f64]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    writeln!(w, "wait").map_err(io_err)?;
    for x in waits {
        writeln!(w, "{x}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
