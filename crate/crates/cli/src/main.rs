//! `gpgm` — config-driven CLI around the gradient-matching harness.
//!
//! Exit codes: 0 success, 1 partial realization failures, 2 config error,
//! 3 total failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpgm::harness::{
    evaluate_theta, generate_data, run_benchmark, run_single, select_gamma, write_json,
    write_outputs, EvalRecord, ExperimentConfig, ResultRecord,
};
use gpgm::Error;

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "gpgm", version, about = "Gaussian-process gradient matching for ODE parameter inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; falls back to the config's `output` field.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic observations (and the noiseless truth) as CSV.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Noise-realization index.
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Run the fit-then-sample pipeline on one realization.
    Infer {
        #[command(flatten)]
        common: CommonArgs,
        /// Noise-realization index.
        #[arg(long, default_value_t = 0)]
        realization: usize,
    },
    /// Score each gamma candidate by observation fit and pick the winner.
    SelectGamma {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every realization and aggregate per-state RMSE quantiles.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the config realization count.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Integrate parameters and report their trajectory RMSE.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated parameter values, e.g. `--theta 2,1,4,1`.
        #[arg(long, conflicts_with = "result")]
        theta: Option<String>,
        /// Evaluate the posterior-mean parameters of a previous result file.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Generate { common, realization } => {
            let (config, out) = load(&common)?;
            let (observations, truth) = generate_data(&config, realization)?;
            let obs_file = std::fs::File::create(&out)?;
            observations.write_csv(obs_file)?;
            let truth_path = sibling(&out, "truth");
            truth.write_csv(std::fs::File::create(&truth_path)?)?;
            println!("wrote {} and {}", out.display(), truth_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Infer { common, realization } => {
            let (config, out) = load(&common)?;
            let record = run_single(&config, realization)?;
            write_outputs(&record, &out)?;
            report(&record, &out);
            Ok(if record.success_count() == 1 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            })
        }
        Command::SelectGamma { common } => {
            let (config, out) = load(&common)?;
            let selection = select_gamma(&config)?;
            write_json(&selection, &out)?;
            for s in &selection.scores {
                match (s.observation_rmse, &s.error) {
                    (Some(r), _) => println!("gamma {:.6e}  observation rmse {r:.6}", s.gamma),
                    (None, Some(e)) => println!("gamma {:.6e}  failed: {e}", s.gamma),
                    (None, None) => {}
                }
            }
            println!("chosen gamma: {:.6e} -> {}", selection.chosen_gamma, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Benchmark { common, realizations } => {
            let (mut config, out) = load(&common)?;
            if let Some(r) = realizations {
                config.realizations = r;
                config.validate()?;
            }
            let record = run_benchmark(&config)?;
            write_outputs(&record, &out)?;
            report(&record, &out);
            let successes = record.success_count();
            Ok(if successes == config.realizations {
                ExitCode::SUCCESS
            } else if successes > 0 {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::from(EXIT_FAILURE)
            })
        }
        Command::Evaluate { common, theta, result } => {
            let (config, out) = load(&common)?;
            let evals: Vec<EvalRecord> = match (theta, result) {
                (Some(list), None) => {
                    let theta = parse_theta(&list)?;
                    vec![evaluate_theta(&config, &theta)?]
                }
                (None, Some(path)) => {
                    let record = ResultRecord::from_path(&path)?;
                    let thetas: Vec<Vec<f64>> = record
                        .realizations
                        .iter()
                        .filter_map(|o| o.record())
                        .map(|r| r.theta_hat.clone())
                        .collect();
                    if thetas.is_empty() {
                        return Err(Error::InvalidInput(format!(
                            "{} contains no successful realizations",
                            path.display()
                        )));
                    }
                    thetas
                        .iter()
                        .map(|t| evaluate_theta(&config, t))
                        .collect::<Result<_, _>>()?
                }
                _ => {
                    return Err(Error::Config(
                        "evaluate needs exactly one of --theta or --result".into(),
                    ))
                }
            };
            write_json(&evals, &out)?;
            for e in &evals {
                println!("theta {:?}: rmse per state {:?}", e.theta, e.rmse_per_state);
            }
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut config = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output.clone().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no output path: pass --out or set 'output'".into()))?;
    Ok((config, out))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn parse_theta(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad theta entry '{s}'")))
        })
        .collect()
}

fn report(record: &ResultRecord, out: &Path) {
    for outcome in &record.realizations {
        match outcome {
            gpgm::harness::RealizationOutcome::Ok(r) => {
                println!(
                    "realization {}: theta_hat {:?}, rmse {:?}, acceptance {:.3} ({:.1}s)",
                    r.index, r.theta_hat, r.rmse_per_state, r.acceptance.aggregate, r.wall_clock_s
                );
            }
            gpgm::harness::RealizationOutcome::Failed { index, error } => {
                println!("realization {index}: FAILED ({error})");
            }
        }
    }
    println!(
        "{} of {} realizations succeeded; median rmse per state {:?}",
        record.success_count(),
        record.realizations.len(),
        record.aggregate.rmse_median
    );
    println!("wrote {}", out.display());
}
