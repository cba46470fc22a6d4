mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pairsens::{
    attributable_interval, check_mean_binomial_ordering, check_sandwich, gamma_prime_from_intermittency,
    gamma_sens_search, pvalue_bounds, simulate_tails, trimmed_gamma_search, AttributableConfig,
    Calibration, GammaSpec, IntermittencyCalibration, Method, ProbabilityVector, SimulationConfig,
    SIMULATION_SE_MULTIPLIER,
};

use input::load_studies;
use output as out;

#[derive(Parser)]
#[command(
    name = "pairsens",
    version,
    about = "Sensitivity analysis for matched-pair binary studies"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Copy, Clone, ValueEnum)]
enum MethodArg {
    Exact,
    Normal,
}

#[derive(Debug, Copy, Clone, ValueEnum)]
enum CalibrationArg {
    WorstCase,
    AverageCase,
}

impl From<CalibrationArg> for Calibration {
    fn from(c: CalibrationArg) -> Self {
        match c {
            CalibrationArg::WorstCase => Calibration::WorstCase,
            CalibrationArg::AverageCase => Calibration::AverageCase,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Bound the one-sided McNemar p-value under a bias cap gamma.
    Mcnemar {
        /// Study file (.json or .csv).
        #[arg(long)]
        input: PathBuf,
        /// Bias magnitude, >= 1.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Read gamma as a per-pair worst case or a sample average.
        #[arg(long, value_enum, default_value_t = CalibrationArg::WorstCase)]
        calibration: CalibrationArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Apply a 0.5 continuity correction (normal method only).
        #[arg(long)]
        continuity_correction: bool,
    },
    /// Largest gamma at which significance survives, by bisection.
    GammaSearch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        #[arg(long)]
        continuity_correction: bool,
        /// Also search after trimming this fraction of discordant pairs.
        #[arg(long)]
        trim_beta: Option<f64>,
        /// Bisection tolerance on gamma.
        #[arg(long, default_value_t = pairsens::DEFAULT_GAMMA_TOL)]
        tol: f64,
    },
    /// One-sided lower confidence bound for attributable events.
    Attributable {
        #[arg(long)]
        input: PathBuf,
        /// Bias magnitude, >= 1.
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = CalibrationArg::AverageCase)]
        calibration: CalibrationArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Probability floor assigned to attributed pairs (average case).
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
    },
    /// Average-case gamma' implied by an intermittent-exposure rate.
    Calibrate {
        /// Share of pairs exposed during the control window.
        #[arg(long)]
        rho: f64,
        /// Chance the exposure lands in the hazard window while driving.
        #[arg(long, default_value_t = pairsens::calibrate::DEFAULT_P_DRIVING)]
        p_driving: f64,
        /// Same chance for pairs not driving in the control window.
        #[arg(long, default_value_t = pairsens::calibrate::DEFAULT_P_NOT_DRIVING)]
        p_not_driving: f64,
    },
    /// Check the distributional facts behind the bounds.
    Verify {
        #[command(subcommand)]
        check: VerifyCommand,
    },
    /// Full analysis: gamma search (exact and normal) plus attributable events.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Average-case bias for the attributable-events section.
        #[arg(long, default_value_t = 2.1)]
        gamma_prime: f64,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Exact upper tails vs the mean-matched binomial, at every threshold.
    #[command(name = "theorem1")]
    Theorem1 {
        /// Comma-separated success probabilities, e.g. 0.9,0.6,0.3.
        #[arg(long)]
        p: String,
    },
    /// Exact upper tails vs the two extreme binomials of the odds band.
    Sandwich {
        #[arg(long)]
        p: String,
        #[arg(long)]
        gamma: f64,
    },
    /// Seeded Monte Carlo cross-check of exact tails.
    Simulate {
        /// RNG seed; runs are reproducible, never wall-clock seeded.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        /// Comma-separated latent score pairs u1:u2.
        #[arg(long, default_value = "1:0,0.5:0.25,0:0.25")]
        u_pairs: String,
        /// Bias magnitude; the simulator uses ln(gamma).
        #[arg(long, default_value_t = 9.0)]
        gamma: f64,
        /// Comma-separated thresholds; default 0..=s.
        #[arg(long)]
        thresholds: Option<String>,
    },
}

enum CliError {
    /// Bad flags or unreadable/invalid input files. Exit code 2.
    Usage(String),
    /// The analysis itself rejected the data. Exit code 1.
    Analysis(pairsens::Error),
    /// A verification check ran and found a violation. Exit code 1.
    CheckFailed(&'static str),
}

impl From<pairsens::Error> for CliError {
    fn from(e: pairsens::Error) -> Self {
        CliError::Analysis(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64, open: bool) -> CliResult<()> {
    let ok = v.is_finite() && if open { v > lo && v < hi } else { (lo..=hi).contains(&v) };
    if ok {
        Ok(())
    } else {
        let (l, r) = if open { ("(", ")") } else { ("[", "]") };
        Err(usage(format!("--{name} = {v} outside {l}{lo}, {hi}{r}")))
    }
}

fn check_gamma(gamma: f64) -> CliResult<()> {
    if gamma.is_finite() && gamma >= 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--gamma = {gamma} must be finite and >= 1")))
    }
}

fn to_method(method: MethodArg, continuity_correction: bool) -> CliResult<Method> {
    match (method, continuity_correction) {
        (MethodArg::Exact, false) => Ok(Method::Exact),
        (MethodArg::Exact, true) => Err(usage(
            "--continuity-correction only applies to --method normal",
        )),
        (MethodArg::Normal, cc) => Ok(Method::Normal {
            continuity_correction: cc,
        }),
    }
}

fn parse_f64_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--{flag}: cannot parse {tok:?} as a number")))
        })
        .collect()
}

fn parse_u_pairs(text: &str) -> CliResult<Vec<(f64, f64)>> {
    text.split(',')
        .map(|tok| {
            let (a, b) = tok
                .split_once(':')
                .ok_or_else(|| usage(format!("--u-pairs: expected u1:u2, got {tok:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("--u-pairs: cannot parse {s:?} as a number")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn emit<T: Serialize>(format: Format, json_value: &T, table: String) {
    match format {
        Format::Json => println!("{}", out::to_json(json_value)),
        Format::Table => print!("{table}"),
    }
}

use serde::Serialize;

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Mcnemar {
            input,
            gamma,
            calibration,
            alpha,
            method,
            continuity_correction,
        } => {
            check_gamma(gamma)?;
            check_range("alpha", alpha, 0.0, 1.0, true)?;
            let method = to_method(method, continuity_correction)?;
            let spec = GammaSpec::new(gamma, calibration.into()).map_err(|e| usage(e.to_string()))?;
            let studies = load_studies(&input).map_err(CliError::Usage)?;
            let mut rows = Vec::new();
            for study in studies {
                let summary = study.table.summarize();
                let bounds = pvalue_bounds(&summary, &spec, method)?;
                rows.push(out::McnemarRow {
                    label: study.label,
                    table: study.table,
                    s: summary.s(),
                    t: summary.t(),
                    p_value_lower: bounds.lower,
                    p_value_upper: bounds.upper,
                    significant_at_alpha: bounds.upper <= alpha,
                });
            }
            let report = out::McnemarReport {
                gamma,
                calibration: calibration.into(),
                alpha,
                method,
                studies: rows,
            };
            emit(cli.format, &report, out::mcnemar_table(&report));
            Ok(())
        }
        Command::GammaSearch {
            input,
            alpha,
            method,
            continuity_correction,
            trim_beta,
            tol,
        } => {
            check_range("alpha", alpha, 0.0, 1.0, true)?;
            if let Some(beta) = trim_beta {
                if !beta.is_finite() || !(0.0..1.0).contains(&beta) {
                    return Err(usage(format!("--trim-beta = {beta} outside [0, 1)")));
                }
            }
            if !tol.is_finite() || tol <= 0.0 {
                return Err(usage(format!("--tol = {tol} must be positive")));
            }
            let method = to_method(method, continuity_correction)?;
            let studies = load_studies(&input).map_err(CliError::Usage)?;
            let mut rows = Vec::new();
            for study in studies {
                let summary = study.table.summarize();
                let full = gamma_sens_search(&summary, alpha, method, tol)?;
                let trimmed = match trim_beta {
                    Some(beta) => {
                        let r = trimmed_gamma_search(&summary, beta, alpha, method, tol)?;
                        let d = (beta * summary.s() as f64).ceil() as u64;
                        Some(out::TrimmedSearch {
                            beta,
                            s: summary.s() - d,
                            t: summary.t() - d,
                            gamma_sens: r.gamma_sens,
                        })
                    }
                    None => None,
                };
                rows.push(out::GammaSearchRow {
                    label: study.label,
                    table: study.table,
                    s: summary.s(),
                    t: summary.t(),
                    gamma_sens: full.gamma_sens,
                    trimmed,
                });
            }
            let report = out::GammaSearchReport {
                alpha,
                method,
                tol,
                studies: rows,
            };
            emit(cli.format, &report, out::gamma_search_table(&report));
            Ok(())
        }
        Command::Attributable {
            input,
            gamma,
            calibration,
            alpha,
            p_min,
        } => {
            check_gamma(gamma)?;
            check_range("alpha", alpha, 0.0, 1.0, true)?;
            let config = AttributableConfig::new(alpha, gamma, calibration.into(), p_min)
                .map_err(|e| usage(e.to_string()))?;
            let studies = load_studies(&input).map_err(CliError::Usage)?;
            let mut rows = Vec::new();
            for study in studies {
                let summary = study.table.summarize();
                let result = attributable_interval(&summary, &config)?;
                rows.push(out::AttributableRow {
                    label: study.label,
                    table: study.table,
                    s: summary.s(),
                    t: summary.t(),
                    result,
                });
            }
            let report = out::AttributableReport {
                gamma,
                calibration: calibration.into(),
                alpha,
                p_min,
                studies: rows,
            };
            emit(cli.format, &report, out::attributable_table(&report));
            Ok(())
        }
        Command::Calibrate {
            rho,
            p_driving,
            p_not_driving,
        } => {
            check_range("rho", rho, 0.0, 1.0, false)?;
            check_range("p-driving", p_driving, 0.0, 1.0, false)?;
            check_range("p-not-driving", p_not_driving, 0.0, 1.0, false)?;
            let cal = IntermittencyCalibration::new(rho, p_driving, p_not_driving)
                .map_err(|e| usage(e.to_string()))?;
            let gamma_prime = gamma_prime_from_intermittency(&cal)?;
            let report = out::CalibrateReport {
                rho,
                p_driving,
                p_not_driving,
                p_bar: cal.p_bar(),
                gamma_prime,
            };
            emit(cli.format, &report, out::calibrate_table(&report));
            Ok(())
        }
        Command::Verify { check } => run_verify(cli.format, check),
        Command::Report {
            input,
            alpha,
            gamma_prime,
        } => {
            check_range("alpha", alpha, 0.0, 1.0, true)?;
            if !gamma_prime.is_finite() || gamma_prime < 1.0 {
                return Err(usage(format!("--gamma-prime = {gamma_prime} must be >= 1")));
            }
            let config = AttributableConfig::new(alpha, gamma_prime, Calibration::AverageCase, 0.0)
                .map_err(|e| usage(e.to_string()))?;
            let studies = load_studies(&input).map_err(CliError::Usage)?;
            let tol = pairsens::DEFAULT_GAMMA_TOL;
            let mut rows = Vec::new();
            for study in studies {
                let summary = study.table.summarize();
                let exact = gamma_sens_search(&summary, alpha, Method::Exact, tol)?;
                let normal = gamma_sens_search(
                    &summary,
                    alpha,
                    Method::Normal {
                        continuity_correction: false,
                    },
                    tol,
                )?;
                let attrib = attributable_interval(&summary, &config)?;
                rows.push(out::FullReportRow {
                    label: study.label,
                    table: study.table,
                    s: summary.s(),
                    t: summary.t(),
                    gamma_sens_exact: exact.gamma_sens,
                    gamma_sens_normal: normal.gamma_sens,
                    a_lower_inclusive: attrib.a_lower_inclusive,
                    a_star_exclusive: attrib.a_star_exclusive,
                    implied_worst_case_gamma: attrib.implied_worst_case_gamma,
                });
            }
            let report = out::FullReport {
                alpha,
                gamma_prime,
                p_min: 0.0,
                studies: rows,
            };
            emit(cli.format, &report, out::full_report_table(&report));
            Ok(())
        }
    }
}

fn run_verify(format: Format, check: VerifyCommand) -> CliResult<()> {
    match check {
        VerifyCommand::Theorem1 { p } => {
            let probs = ProbabilityVector::new(parse_f64_list("p", &p)?)
                .map_err(|e| usage(e.to_string()))?;
            if probs.is_empty() {
                return Err(usage("--p: need at least one probability"));
            }
            let report = check_mean_binomial_ordering(&probs)?;
            let output = out::TailOrderingOutput {
                passed: report.holds_on_guaranteed_domain(),
                s: probs.len() as u64,
                p_bar: probs.p_bar(),
                report,
            };
            emit(format, &output, out::tail_ordering_table(&output));
            if output.passed {
                Ok(())
            } else {
                Err(CliError::CheckFailed("tail ordering violated on its guaranteed domain"))
            }
        }
        VerifyCommand::Sandwich { p, gamma } => {
            check_gamma(gamma)?;
            let probs = ProbabilityVector::new(parse_f64_list("p", &p)?)
                .map_err(|e| usage(e.to_string()))?;
            if probs.is_empty() {
                return Err(usage("--p: need at least one probability"));
            }
            let report = check_sandwich(&probs, gamma)?;
            let output = out::SandwichOutput {
                passed: report.all_hold(),
                s: probs.len() as u64,
                gamma,
                report,
            };
            emit(format, &output, out::sandwich_table(&output));
            if output.passed {
                Ok(())
            } else {
                Err(CliError::CheckFailed("sandwich ordering violated"))
            }
        }
        VerifyCommand::Simulate {
            seed,
            reps,
            u_pairs,
            gamma,
            thresholds,
        } => {
            check_gamma(gamma)?;
            let pairs = parse_u_pairs(&u_pairs)?;
            let s = pairs.len() as u64;
            let config = SimulationConfig::new(pairs, gamma.ln(), reps, seed)
                .map_err(|e| usage(e.to_string()))?;
            let thresholds = match thresholds {
                Some(text) => {
                    let vals = parse_f64_list("thresholds", &text)?;
                    let mut parsed = Vec::with_capacity(vals.len());
                    for v in vals {
                        if v.fract() != 0.0 || v < 0.0 || v > s as f64 {
                            return Err(usage(format!(
                                "--thresholds: {v} is not an integer in [0, {s}]"
                            )));
                        }
                        parsed.push(v as u64);
                    }
                    parsed
                }
                None => (0..=s).collect(),
            };
            let report = simulate_tails(&config, &thresholds)?;
            let output = out::SimulateOutput {
                passed: report.all_within(SIMULATION_SE_MULTIPLIER),
                gamma_log: config.gamma_log(),
                se_multiplier: SIMULATION_SE_MULTIPLIER,
                report,
            };
            emit(format, &output, out::simulate_table(&output));
            if output.passed {
                Ok(())
            } else {
                Err(CliError::CheckFailed(
                    "simulated tails drifted outside the standard-error band",
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Analysis(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::CheckFailed(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
    }
}
