use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bilm_core::bilm::{save_checkpoint, train, MetricsRecord};
use bilm_core::data_io::load_corpus;
use bilm_core::parallel::Execution;
use bilm_core::BiLm;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const CHECKPOINT: &str = "model.blmc";
pub const METRICS: &str = "metrics.jsonl";
pub const SNAPSHOT: &str = "config.resolved.ini";

pub struct TrainArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

pub fn run(args: &TrainArgs, exec: Execution) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(dir) = &args.output {
        cfg.output_dir = dir.clone();
    }
    cfg.model.seed = cfg.train.seed;

    let corpus = load_corpus(&cfg.train_corpus)?;
    let valid = cfg.valid_corpus.as_ref().map(load_corpus).transpose()?;
    log::info!(
        "training {} on {} sentences ({} tokens)",
        cfg.model_source,
        corpus.len(),
        corpus.token_count()
    );
    let mut model = BiLm::from_corpus(cfg.model.clone(), &corpus.sentences, cfg.max_vocab)?;

    let mut records: Vec<MetricsRecord> = Vec::new();
    let outcome = train(
        &mut model,
        &corpus.sentences,
        valid.as_ref().map(|v| v.sentences.as_slice()),
        &cfg.train,
        exec,
        |r| {
            log::info!("step {} loss {:.4} ppl {:.2}/{:.2}", r.step, r.loss, r.ppl_fwd, r.ppl_bwd);
            records.push(r.clone());
        },
    );

    fs::create_dir_all(&cfg.output_dir).map_err(|source| CliError::Output {
        path: cfg.output_dir.clone(),
        source,
    })?;
    write_metrics(&cfg.output_dir.join(METRICS), &records)?;
    outcome?;
    save_checkpoint(&model, cfg.output_dir.join(CHECKPOINT))?;
    let snapshot = cfg.output_dir.join(SNAPSHOT);
    cfg.snapshot()
        .write_to_file(&snapshot)
        .map_err(|source| CliError::Output { path: snapshot, source })?;
    println!("{}", cfg.output_dir.join(CHECKPOINT).display());
    Ok(())
}

fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let out = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        for r in records {
            writeln!(f, "{}", r.to_json_line())?;
        }
        f.flush()
    };
    out().map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
