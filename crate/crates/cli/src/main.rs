//! `bilm`: train biLMs, dump their context vectors, run probes and build
//! plot-ready reports.

mod config;
mod embed;
mod error;
mod probe;
mod report;
mod source;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use bilm_core::parallel::Execution;
use bilm_core::probes::ProbeConfig;
use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "bilm", version, about = "Bidirectional LM training and probing workbench")]
struct Cli {
    /// Worker threads (default 1).
    #[arg(long, global = true, env = "BILM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a biLM from a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "BILM_SEED")]
        seed: Option<u64>,
        /// Overrides `[output] dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write context vectors for a tokenized corpus to a vector dump.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// `all` or a comma list such as `0,2`.
        #[arg(long)]
        layers: Option<String>,
    },
    /// Run one probing task and print or write a JSON report.
    Probe(ProbeCli),
    /// Build CSV tables from dumps, probe reports or checkpoints.
    Report {
        #[arg(value_enum)]
        kind: report::ReportKind,
        /// Vector dumps, probe reports or checkpoints, depending on kind.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file, or directory for similarity matrices.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        sentence: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,64")]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
    },
}

#[derive(Args, Debug)]
struct ProbeCli {
    #[arg(value_enum)]
    task: probe::Task,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Vector dump to read instead of a checkpoint.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Evaluation data; otherwise the tail of `--data` is held out.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    format: probe::DataFormat,
    /// `all` (every layer plus a weighted mix) or a comma list.
    #[arg(long, default_value = "all")]
    layers: String,
    #[arg(long)]
    weighted_layers: bool,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, env = "BILM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 0.0)]
    mix_l2: f64,
    /// Coreference baseline (`closest`, `first`, `closest+agreement`,
    /// `first+agreement` or `all`).
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    no_agreement: bool,
    /// Use character n-gram hash vectors for analogies.
    #[arg(long)]
    hash: bool,
    /// External word vectors for analogies.
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    #[arg(long)]
    restrict_vocab: Option<usize>,
    /// Layer for span export.
    #[arg(long, default_value_t = 1)]
    layer: usize,
    /// Sentence index for similarity.
    #[arg(long, default_value_t = 0)]
    sentence: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn execution(threads: Option<usize>) -> Result<Execution> {
    let n = threads.unwrap_or(1);
    if n == 0 {
        return Err(CliError::usage("--threads must be >= 1"));
    }
    if n == 1 {
        return Ok(Execution::Sequential);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    Ok(Execution::Parallel)
}

fn run(cli: Cli) -> Result<()> {
    let exec = execution(cli.threads)?;
    match cli.command {
        Command::Train {
            config,
            seed,
            output,
        } => train::run(&train::TrainArgs { config, seed, output }, exec),
        Command::Embed {
            checkpoint,
            input,
            output,
            layers,
        } => embed::run(
            &embed::EmbedArgs {
                checkpoint,
                input,
                output,
                layers,
            },
            exec,
        ),
        Command::Probe(p) => {
            let config = ProbeConfig {
                learning_rate: p.learning_rate,
                epochs: p.epochs,
                l2: p.l2,
                seed: p.seed,
                mix_l2: p.mix_l2,
                ..ProbeConfig::default()
            };
            probe::run(
                &probe::ProbeArgs {
                    task: p.task,
                    checkpoint: p.checkpoint,
                    vectors: p.vectors,
                    data: p.data,
                    eval: p.eval,
                    format: p.format,
                    layers: p.layers,
                    weighted_layers: p.weighted_layers,
                    holdout: p.holdout,
                    probe: config,
                    baseline: p.baseline,
                    no_agreement: p.no_agreement,
                    hash: p.hash,
                    word_vectors: p.word_vectors,
                    restrict_vocab: p.restrict_vocab,
                    layer: p.layer,
                    sentence: p.sentence,
                    output: p.output,
                },
                exec,
            )
        }
        Command::Report {
            kind,
            inputs,
            output,
            corpus,
            valid,
            sentence,
            batch_sizes,
            runs,
        } => report::run(
            &report::ReportArgs {
                kind,
                inputs,
                corpus,
                valid,
                sentence,
                batch_sizes,
                runs,
                output,
            },
            exec,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
