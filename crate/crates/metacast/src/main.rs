//! Thin command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metacast::cli::{
    cmd_base_forecast, cmd_evaluate, cmd_predict, cmd_train, BaseForecastArgs, EvaluateArgs,
    PredictArgs, TrainArgs,
};
use metacast::config::ModelKind;
use metacast::core::FrequencyClass;
use metacast::Error;

#[derive(Parser)]
#[command(
    name = "metacast",
    about = "Forecast combination: classical base forecasters feeding a learned combiner",
    version
)]
struct Cli {
    /// Worker-thread cap; 1 guarantees bit-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute base-model forecasts, re-ingestable as external columns.
    BaseForecast {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_parser = parse_freq)]
        freq: FrequencyClass,
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long, default_value = "base_forecasts.csv")]
        out: PathBuf,
        /// Remove the last horizon first (training-sample mode).
        #[arg(long)]
        chop: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train combiner instances on chopped series.
    Train {
        /// Series CSV; repeat together with --freq for --all-freqs runs.
        #[arg(long, required = true)]
        train: Vec<PathBuf>,
        #[arg(long, value_parser = parse_freq)]
        freq: Vec<FrequencyClass>,
        /// One recurrent model across every given frequency.
        #[arg(long)]
        all_freqs: bool,
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "models")]
        out_dir: PathBuf,
        #[arg(long)]
        external: Option<PathBuf>,
    },
    /// Ensemble saved instances over complete series.
    Predict {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Alternative horizon (recurrent models only).
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_parser = parse_freq)]
        freq: Option<FrequencyClass>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a prediction file against test actuals.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_freq)]
        freq: FrequencyClass,
        /// Also write the report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_freq(s: &str) -> Result<FrequencyClass, String> {
    FrequencyClass::parse(s).map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> metacast::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot configure {threads} threads: {e}")))?;
    }
    match cli.command {
        Command::BaseForecast {
            train,
            freq,
            external,
            out,
            chop,
            config,
        } => cmd_base_forecast(&BaseForecastArgs {
            train,
            freq,
            external,
            out,
            chop,
            config,
        }),
        Command::Train {
            train,
            freq,
            all_freqs,
            model,
            config,
            seed,
            out_dir,
            external,
        } => {
            if train.len() != freq.len() {
                return Err(Error::Usage(format!(
                    "{} --train files but {} --freq flags; pass one --freq per file",
                    train.len(),
                    freq.len()
                )));
            }
            cmd_train(&TrainArgs {
                datasets: train.into_iter().zip(freq).collect(),
                all_freqs,
                model,
                config,
                seed,
                out_dir,
                external,
            })
        }
        Command::Predict {
            train,
            models,
            external,
            out,
            horizon,
            freq,
            config,
        } => cmd_predict(&PredictArgs {
            train,
            models,
            external,
            out,
            horizon,
            freq,
            config,
        }),
        Command::Evaluate {
            train,
            test,
            pred,
            freq,
            report,
            config,
        } => {
            let table = cmd_evaluate(&EvaluateArgs {
                train,
                test,
                pred,
                freq,
                report,
                config,
            })?;
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            let rendered = err.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error: usage: {first}");
            for line in rendered.lines().skip(1) {
                eprintln!("{line}");
            }
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.code());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
