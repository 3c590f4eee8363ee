use std::path::PathBuf;

use bilm_core::bilm::load_checkpoint;
use bilm_core::data_io::{load_corpus, write_vector_dump};
use bilm_core::parallel::Execution;

use crate::error::{CliError, Result};
use crate::source::require_file;

pub struct EmbedArgs {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub output: PathBuf,
    pub layers: Option<String>,
}

/// Parses `"all"` or a comma list of layer indices.
pub fn parse_layer_list(spec: &str, available: usize) -> Result<Option<Vec<usize>>> {
    if spec.trim() == "all" {
        return Ok(None);
    }
    let layers = spec
        .split(',')
        .map(|s| {
            let i: usize = s
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad layer '{s}' in '{spec}'")))?;
            if i >= available {
                return Err(CliError::usage(format!("layer {i} out of range (0..{available})")));
            }
            Ok(i)
        })
        .collect::<Result<Vec<_>>>()?;
    if layers.is_empty() {
        return Err(CliError::usage("empty layer list"));
    }
    Ok(Some(layers))
}

pub fn run(args: &EmbedArgs, exec: Execution) -> Result<()> {
    require_file(&args.checkpoint, "checkpoint")?;
    require_file(&args.input, "input corpus")?;
    let model = load_checkpoint(&args.checkpoint)?;
    let available = model.num_layers() + 1;
    let keep = match &args.layers {
        Some(spec) => parse_layer_list(spec, available)?,
        None => None,
    };
    let corpus = load_corpus(&args.input)?;
    let mut records = model.extract_batch(&corpus.sentences, exec)?;
    if let Some(keep) = &keep {
        records = records
            .iter()
            .map(|r| r.select_layers(keep))
            .collect::<bilm_core::Result<_>>()?;
    }
    let layers = keep.as_ref().map_or(available, Vec::len);
    write_vector_dump(&args.output, &records, (layers, model.config().model_dim() * 2))?;
    log::info!("wrote {} records to {}", records.len(), args.output.display());
    Ok(())
}
