//! Context vectors either extracted from a checkpoint or looked up in a
//! vector dump by token sequence.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use bilm_core::bilm::load_checkpoint;
use bilm_core::data_io::read_vector_dump;
use bilm_core::parallel::Execution;
use bilm_core::{BiLm, ContextVectors};

use crate::error::{CliError, Result};

pub enum VectorSource {
    Model(Box<BiLm>),
    Dump {
        path: PathBuf,
        layers: usize,
        records: HashMap<Vec<String>, ContextVectors>,
    },
}

impl VectorSource {
    pub fn open(checkpoint: Option<&Path>, dump: Option<&Path>) -> Result<Self> {
        match (checkpoint, dump) {
            (Some(c), None) => {
                require_file(c, "checkpoint")?;
                Ok(VectorSource::Model(Box::new(load_checkpoint(c)?)))
            }
            (None, Some(d)) => {
                require_file(d, "vector dump")?;
                let dump = read_vector_dump(d)?;
                let layers = dump.header.layers;
                let records = dump
                    .records
                    .into_iter()
                    .map(|r| (r.tokens().to_vec(), r))
                    .collect();
                Ok(VectorSource::Dump {
                    path: d.to_path_buf(),
                    layers,
                    records,
                })
            }
            _ => Err(CliError::usage("pass exactly one of --checkpoint or --vectors")),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            VectorSource::Model(m) => format!("checkpoint:{}", m.config().arch.kind()),
            VectorSource::Dump { path, .. } => format!("dump:{}", path.display()),
        }
    }

    pub fn num_layers(&self) -> usize {
        match self {
            VectorSource::Model(m) => m.num_layers() + 1,
            VectorSource::Dump { layers, .. } => *layers,
        }
    }

    /// Vectors for each sentence at float32 precision, so both sources
    /// give identical values.
    pub fn vectors(&self, sentences: &[Vec<String>], exec: Execution) -> Result<Vec<ContextVectors>> {
        match self {
            VectorSource::Model(m) => Ok(m
                .extract_batch(sentences, exec)?
                .iter()
                .map(ContextVectors::to_f32_precision)
                .collect()),
            VectorSource::Dump { path, records, .. } => sentences
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    records.get(s).cloned().ok_or_else(|| {
                        CliError::usage(format!(
                            "sentence {i} ('{}') is not in {}",
                            s.join(" "),
                            path.display()
                        ))
                    })
                })
                .collect(),
        }
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} '{}' does not exist", path.display())))
    }
}
