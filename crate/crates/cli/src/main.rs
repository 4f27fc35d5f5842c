use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use picnn::theory::{ArchConstants, RateInputs, Smoothness};
use picnn::Error;
use picnn_cli::commands::{
    cmd_experiment, cmd_rates, cmd_sample, cmd_train, cmd_verify, format_rates_text,
    reference_rate_inputs,
};
use picnn_cli::config::ExperimentConfig;
use serde_json::json;

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUN: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "picnn",
    version,
    about = "Physics-informed CNNs for PDEs on the sphere"
)]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all hardware threads).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Draws uniform points on the sphere into a CSV file.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
    },
    /// Trains once per problem in the configuration.
    Train {
        /// Overrides the training size.
        #[arg(long)]
        train_size: Option<usize>,
    },
    /// Runs the size ladder and fits convergence slopes.
    Experiment,
    /// Runs a verification suite and prints one JSON object per check.
    Verify { suite: String },
    /// Prints rate exponents and recommended architectures.
    Rates {
        /// Smoothness, a number or `inf`.
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        s: Option<u32>,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        k: Option<u32>,
        /// Sample size for the architecture scalings.
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn fail(code: u8, err: &Error) -> ExitCode {
    let kind = match code {
        EXIT_VALIDATION => "validation",
        EXIT_VERIFY => "verification",
        _ => "run",
    };
    let field = match err {
        Error::Invalid { field, .. } => Some(field.clone()),
        _ => None,
    };
    eprintln!(
        "{}",
        json!({ "error": { "kind": kind, "field": field, "message": err.to_string() } })
    );
    ExitCode::from(code)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invalid { .. } | Error::OffSphere { .. } | Error::Json(_) => EXIT_VALIDATION,
        _ => EXIT_RUN,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, (u8, Error)> {
    let e = |err: Error| (exit_code(&err), err);
    match &cli.command {
        Command::Sample { n, d } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let path = cmd_sample(*n, *d, cli.seed.unwrap_or(0), &out).map_err(e)?;
            println!("{}", json!({ "samples": path }));
        }
        Command::Train { train_size } => {
            let mut cfg = load_config(&cli).map_err(e)?;
            if let Some(n) = train_size {
                cfg.train.train_size = *n;
            }
            for r in cmd_train(&cfg).map_err(e)? {
                println!(
                    "{}",
                    json!({
                        "label": r.label,
                        "best_epoch": r.best_epoch,
                        "best": r.best,
                        "failure": r.failure,
                        "config_fingerprint": r.config_fingerprint,
                    })
                );
                if let Some(f) = r.failure {
                    return Err((EXIT_RUN, Error::RunFailed(f)));
                }
            }
        }
        Command::Experiment => {
            let cfg = load_config(&cli).map_err(e)?;
            let mut partial = false;
            for (rep, _) in cmd_experiment(&cfg).map_err(e)? {
                println!("{}", serde_json::to_string(&rep).map_err(|x| e(x.into()))?);
                partial |= rep.partial;
            }
            if partial {
                return Err((
                    EXIT_RUN,
                    Error::RunFailed("some sizes had too few successful replicates".into()),
                ));
            }
        }
        Command::Verify { suite } => {
            let checks = cmd_verify(suite).map_err(e)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{}", serde_json::to_string(c).map_err(|x| e(x.into()))?);
            }
            if failed > 0 {
                return Err((
                    EXIT_VERIFY,
                    Error::RunFailed(format!("{failed} of {} checks failed", checks.len())),
                ));
            }
        }
        Command::Rates {
            r,
            s,
            d,
            k,
            n,
            format,
        } => {
            let inputs = match (r, s, d, k) {
                (None, None, None, None) => reference_rate_inputs(),
                (Some(r), Some(s), Some(d), Some(k)) => vec![RateInputs {
                    r: r.parse::<Smoothness>().map_err(e)?,
                    s: *s,
                    d: *d,
                    k: *k,
                }],
                _ => {
                    return Err((
                        EXIT_VALIDATION,
                        Error::invalid("rates", "give all of --r --s --d --k or none"),
                    ))
                }
            };
            let rows = cmd_rates(&inputs, *n, &ArchConstants::default()).map_err(e)?;
            match format {
                Format::Text => print!("{}", format_rates_text(&rows)),
                Format::Json => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&rows).map_err(|x| e(x.into()))?
                    )
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PICNN_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
        {
            return fail(EXIT_VALIDATION, &Error::invalid("jobs", err.to_string()));
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err((code, err)) => fail(code, &err),
    }
}
