use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bilm_core::bilm::{load_checkpoint, timing_report, TimingOptions};
use bilm_core::data_io::{load_corpus, read_vector_dump};
use bilm_core::parallel::Execution;
use bilm_core::probes::similarity_matrix;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::source::require_file;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportKind {
    Similarity,
    LayerWeights,
    Timing,
}

pub struct ReportArgs {
    pub kind: ReportKind,
    pub inputs: Vec<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub sentence: Option<usize>,
    pub batch_sizes: Vec<usize>,
    pub runs: usize,
    pub output: PathBuf,
}

pub fn run(args: &ReportArgs, exec: Execution) -> Result<()> {
    if args.inputs.is_empty() {
        return Err(CliError::usage("report needs at least one input"));
    }
    for p in &args.inputs {
        require_file(p, "input")?;
    }
    match args.kind {
        ReportKind::Similarity => similarity(args),
        ReportKind::LayerWeights => layer_weights(args),
        ReportKind::Timing => timing(args, exec),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_row(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",") + "\n"
}

/// One `[N, N]` CSV per layer and sentence, written into the output
/// directory as `similarity_s{k}_layer{i}.csv` with a token header row.
fn similarity(args: &ReportArgs) -> Result<()> {
    fs::create_dir_all(&args.output).map_err(|source| CliError::Output {
        path: args.output.clone(),
        source,
    })?;
    let mut written = 0;
    for input in &args.inputs {
        let dump = read_vector_dump(input)?;
        let chosen: Vec<usize> = match args.sentence {
            Some(k) if k < dump.records.len() => vec![k],
            Some(k) => {
                return Err(CliError::usage(format!(
                    "sentence {k} of {} in {}",
                    dump.records.len(),
                    input.display()
                )))
            }
            None => (0..dump.records.len()).collect(),
        };
        for k in chosen {
            let cv = &dump.records[k];
            for layer in 0..cv.num_layers() {
                let m = similarity_matrix(cv, layer)?;
                let mut text = csv_row(cv.tokens().iter().map(|t| quote(t)));
                for r in 0..m.rows() {
                    text += &csv_row(m.row_slice(r).iter().map(|v| v.to_string()));
                }
                write(&args.output.join(format!("similarity_s{k}_layer{layer}.csv")), &text)?;
                written += 1;
            }
        }
    }
    log::info!("wrote {written} similarity matrices to {}", args.output.display());
    Ok(())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Normalized scalar-mix weights collected from probe reports, one row
/// per report.
fn layer_weights(args: &ReportArgs) -> Result<()> {
    let mut rows: Vec<(String, String, Vec<f64>, f64)> = Vec::new();
    for input in &args.inputs {
        let text = fs::read_to_string(input).map_err(bilm_core::Error::from)?;
        let report: Value = serde_json::from_str(&text).map_err(bilm_core::Error::from)?;
        let mix = &report["weighted"]["mix"];
        let weights: Option<Vec<f64>> = mix["weights"]
            .as_array()
            .map(|w| w.iter().filter_map(Value::as_f64).collect());
        let Some(weights) = weights else {
            return Err(CliError::usage(format!(
                "{} has no weighted-layers entry",
                input.display()
            )));
        };
        let name = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let task = report["task"].as_str().unwrap_or("").to_string();
        rows.push((name, task, weights, mix["gamma"].as_f64().unwrap_or(f64::NAN)));
    }
    let width = rows.iter().map(|r| r.2.len()).max().unwrap_or(0);
    let mut text = csv_row(
        ["report".to_string(), "task".to_string(), "gamma".to_string()]
            .into_iter()
            .chain((0..width).map(|i| format!("layer{i}"))),
    );
    for (name, task, weights, gamma) in &rows {
        let mut cells = vec![quote(name), quote(task), gamma.to_string()];
        cells.extend((0..width).map(|i| weights.get(i).map_or(String::new(), |w| w.to_string())));
        text += &csv_row(cells);
    }
    write(&args.output, &text)
}

/// Per-checkpoint parameter count, optional perplexity and latency columns.
fn timing(args: &ReportArgs, exec: Execution) -> Result<()> {
    let corpus_path = args
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::usage("timing needs --corpus"))?;
    require_file(corpus_path, "corpus")?;
    if let Some(v) = &args.valid {
        require_file(v, "validation corpus")?;
    }
    let corpus = load_corpus(corpus_path)?;
    let valid = args.valid.as_ref().map(load_corpus).transpose()?;
    let options = TimingOptions {
        runs: args.runs,
        exec,
        ..TimingOptions::default()
    };
    let mut header = vec!["architecture".to_string(), "parameters".to_string(), "perplexity".to_string()];
    let mut body = String::new();
    let mut tables = Vec::new();
    for input in &args.inputs {
        let model = load_checkpoint(input)?;
        let table = timing_report(&model, &corpus.sentences, &args.batch_sizes, options)?;
        let ppl = match &valid {
            Some(v) => model.perplexity(&v.sentences, exec)?.average,
            None => f64::NAN,
        };
        if tables.is_empty() {
            header.extend(table.columns());
        }
        let mut cells = vec![
            table.architecture.clone(),
            model.params().element_count().to_string(),
            if ppl.is_nan() { String::new() } else { format!("{ppl:.4}") },
        ];
        cells.extend(table.values().iter().map(|v| format!("{v:.4}")));
        body += &csv_row(cells);
        tables.push(json!({
            "checkpoint": input.display().to_string(),
            "parameters": model.params().element_count(),
            "perplexity": if ppl.is_nan() { Value::Null } else { json!(ppl) },
            "timing": table,
        }));
    }
    write(&args.output, &(csv_row(header) + &body))?;
    let mut json_path = args.output.clone();
    json_path.set_extension("json");
    let mut text = serde_json::to_string_pretty(&tables).expect("timing serializes");
    let _ = writeln!(text);
    write(&json_path, &text)
}
