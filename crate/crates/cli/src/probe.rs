use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bilm_core::bilm::load_checkpoint;
use bilm_core::data_io::{
    load_analogies, load_chunks, load_corpus, load_coref_instances, load_tagged, load_trees,
    load_word_vectors, write_vector_dump, AnalogyItem, Span, TaggedSentence, TreeSentence,
    WordVectors,
};
use bilm_core::parallel::Execution;
use bilm_core::probes::{
    analogy_eval, eval_pos_probe, eval_span_probe, evaluate_baseline, evaluate_coref,
    hash_word_vectors, labeled_span_vectors, similarity_matrix, train_pos_probe,
    train_span_probe, AnalogyConfig, CorefBaseline, HashVectorConfig, LayerSelection,
    LinearProbe, ProbeConfig,
};
use bilm_core::ContextVectors;
use serde_json::{json, Value};

use crate::embed::parse_layer_list;
use crate::error::{CliError, Result};
use crate::source::{require_file, VectorSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Pos,
    Parse,
    Coref,
    Analogy,
    Similarity,
    Spans,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Auto,
    Trees,
    Tagged,
    Chunks,
}

pub struct ProbeArgs {
    pub task: Task,
    pub checkpoint: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub data: PathBuf,
    pub eval: Option<PathBuf>,
    pub format: DataFormat,
    pub layers: String,
    pub weighted_layers: bool,
    pub holdout: f64,
    pub probe: ProbeConfig,
    pub baseline: Option<String>,
    pub no_agreement: bool,
    pub hash: bool,
    pub word_vectors: Option<PathBuf>,
    pub restrict_vocab: Option<usize>,
    pub layer: usize,
    pub sentence: usize,
    pub output: Option<PathBuf>,
}

pub fn run(args: &ProbeArgs, exec: Execution) -> Result<()> {
    require_file(&args.data, "data")?;
    if let Some(e) = &args.eval {
        require_file(e, "evaluation data")?;
    }
    if !(0.0..1.0).contains(&args.holdout) {
        return Err(CliError::usage("--holdout must be in [0, 1)"));
    }
    let start = Instant::now();
    let mut report = match args.task {
        Task::Pos => pos(args, exec)?,
        Task::Parse => parse(args, exec)?,
        Task::Coref => coref(args, exec)?,
        Task::Analogy => analogy(args, exec)?,
        Task::Similarity => similarity(args, exec)?,
        Task::Spans => spans(args, exec)?,
    };
    report["runtime_ms"] = json!(start.elapsed().as_millis() as u64);
    emit(&report, args.output.as_deref(), args.task == Task::Spans)
}

fn emit(report: &Value, output: Option<&Path>, summary_only: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match output {
        Some(p) if !summary_only => std::fs::write(p, text + "\n").map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        }),
        _ => {
            println!("{text}");
            Ok(())
        }
    }
}

fn source(args: &ProbeArgs) -> Result<VectorSource> {
    VectorSource::open(args.checkpoint.as_deref(), args.vectors.as_deref())
}

/// Single layers to probe, plus whether to add a weighted-layers run.
fn selections(args: &ProbeArgs, available: usize) -> Result<(Vec<usize>, bool)> {
    match parse_layer_list(&args.layers, available)? {
        None => Ok(((0..available).collect(), true)),
        Some(l) => Ok((l, args.weighted_layers)),
    }
}

fn detect(path: &Path, format: DataFormat) -> Result<DataFormat> {
    if format != DataFormat::Auto {
        return Ok(format);
    }
    let text = std::fs::read_to_string(path).map_err(bilm_core::Error::from)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    Ok(if first.trim_start().starts_with('(') {
        DataFormat::Trees
    } else if first.split_whitespace().count() >= 3 {
        DataFormat::Chunks
    } else {
        DataFormat::Tagged
    })
}

/// Training and evaluation parts: `--eval` when given, otherwise the last
/// `holdout` fraction of the data.
fn split<T: Clone>(train: Vec<T>, eval: Option<Vec<T>>, holdout: f64) -> (Vec<T>, Vec<T>) {
    match eval {
        Some(e) => (train, e),
        None if holdout == 0.0 || train.len() < 2 => (train.clone(), train),
        None => {
            let cut = train.len() - ((train.len() as f64 * holdout).ceil() as usize).max(1);
            let mut t = train;
            let e = t.split_off(cut.max(1));
            (t, e)
        }
    }
}

fn tagged_data(path: &Path, format: DataFormat) -> Result<Vec<TaggedSentence>> {
    Ok(match detect(path, format)? {
        DataFormat::Trees => load_trees(path)?.iter().map(TreeSentence::tagged).collect(),
        DataFormat::Tagged => load_tagged(path)?,
        DataFormat::Chunks => load_chunks(path)?
            .into_iter()
            .map(|c| TaggedSentence {
                tokens: c.tokens,
                tags: c.tags,
            })
            .collect(),
        DataFormat::Auto => unreachable!("detect resolves auto"),
    })
}

fn mix_entry(probe: &LinearProbe) -> Value {
    match &probe.mix {
        Some(m) => json!({
            "weights": m.normalized_weights().unwrap_or_default(),
            "gamma": m.gamma,
        }),
        None => Value::Null,
    }
}

fn pos(args: &ProbeArgs, exec: Execution) -> Result<Value> {
    let src = source(args)?;
    let data = tagged_data(&args.data, args.format)?;
    let eval = args.eval.as_ref().map(|p| tagged_data(p, args.format)).transpose()?;
    let (train, test) = split(data, eval, args.holdout);
    let tokens = |s: &[TaggedSentence]| s.iter().map(|t| t.tokens.clone()).collect::<Vec<_>>();
    let train_cv = src.vectors(&tokens(&train), exec)?;
    let test_cv = src.vectors(&tokens(&test), exec)?;
    let (layers, weighted) = selections(args, src.num_layers())?;

    let run = |sel: LayerSelection| -> Result<(f64, f64, LinearProbe)> {
        let probe = train_pos_probe(&train, &train_cv, sel, &args.probe)?;
        let tr = eval_pos_probe(&probe, &train, &train_cv, sel)?;
        let te = eval_pos_probe(&probe, &test, &test_cv, sel)?;
        Ok((tr, te, probe))
    };
    let mut per_layer = Vec::new();
    let mut train_acc = Vec::new();
    for &l in &layers {
        let (tr, te, _) = run(LayerSelection::Layer(l))?;
        train_acc.push(tr);
        per_layer.push(te);
    }
    let weighted = if weighted {
        let (tr, te, probe) = run(LayerSelection::Weighted)?;
        json!({ "accuracy": te, "train_accuracy": tr, "mix": mix_entry(&probe) })
    } else {
        Value::Null
    };
    Ok(json!({
        "task": "pos",
        "metric": "accuracy",
        "vectors": src.describe(),
        "train_sentences": train.len(),
        "eval_sentences": test.len(),
        "layers": layers,
        "per_layer": per_layer,
        "train_per_layer": train_acc,
        "weighted": weighted,
        "skipped": 0,
    }))
}

fn parse(args: &ProbeArgs, exec: Execution) -> Result<Value> {
    let src = source(args)?;
    let data = load_trees(&args.data)?;
    let eval = args.eval.as_ref().map(load_trees).transpose()?;
    let (train, test) = split(data, eval, args.holdout);
    let tokens = |s: &[TreeSentence]| s.iter().map(|t| t.tokens.clone()).collect::<Vec<_>>();
    let train_cv = src.vectors(&tokens(&train), exec)?;
    let test_cv = src.vectors(&tokens(&test), exec)?;
    let (layers, weighted) = selections(args, src.num_layers())?;

    let mut f1 = Vec::new();
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    for &l in &layers {
        let sel = LayerSelection::Layer(l);
        let probe = train_span_probe(&train, &train_cv, sel, &args.probe)?;
        let s = eval_span_probe(&probe, &test, &test_cv, sel, exec)?;
        f1.push(s.f1);
        precision.push(s.precision);
        recall.push(s.recall);
    }
    let weighted = if weighted {
        let sel = LayerSelection::Weighted;
        let probe = train_span_probe(&train, &train_cv, sel, &args.probe)?;
        let s = eval_span_probe(&probe, &test, &test_cv, sel, exec)?;
        json!({ "f1": s.f1, "precision": s.precision, "recall": s.recall, "mix": mix_entry(&probe) })
    } else {
        Value::Null
    };
    Ok(json!({
        "task": "parse",
        "metric": "labeled_bracketing_f1",
        "vectors": src.describe(),
        "train_sentences": train.len(),
        "eval_sentences": test.len(),
        "layers": layers,
        "per_layer": f1,
        "precision": precision,
        "recall": recall,
        "weighted": weighted,
        "skipped": 0,
    }))
}

fn coref(args: &ProbeArgs, exec: Execution) -> Result<Value> {
    let data = load_coref_instances(&args.data)?;
    let counts = json!({
        "instances": data.instances.len(),
        "documents": data.documents,
        "sentences": data.sentences,
        "sentences_with_instances": data.sentences_with_instances,
    });
    if let Some(name) = &args.baseline {
        let variants: Vec<CorefBaseline> = if name == "all" {
            CorefBaseline::ALL.to_vec()
        } else {
            vec![CorefBaseline::parse(name)
                .ok_or_else(|| CliError::usage(format!("unknown baseline '{name}'")))?]
        };
        let scores: serde_json::Map<String, Value> = variants
            .iter()
            .map(|&v| {
                let s = evaluate_baseline(&data.instances, v);
                (v.name().to_string(), serde_json::to_value(s).expect("score serializes"))
            })
            .collect();
        return Ok(json!({ "task": "coref", "counts": counts, "baselines": scores }));
    }

    let src = source(args)?;
    let mut unique: Vec<Vec<String>> = Vec::new();
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();
    for inst in &data.instances {
        index.entry(inst.tokens().to_vec()).or_insert_with(|| {
            unique.push(inst.tokens().to_vec());
            unique.len() - 1
        });
    }
    let vectors = src.vectors(&unique, exec)?;
    let cvs: Vec<ContextVectors> = data
        .instances
        .iter()
        .map(|i| vectors[index[i.tokens()]].clone())
        .collect();
    let (layers, _) = selections(args, src.num_layers())?;
    let agreement = !args.no_agreement;
    let mut per_layer = Vec::new();
    let mut skipped = 0;
    let mut fallbacks = Vec::new();
    for &l in &layers {
        let s = evaluate_coref(&data.instances, &cvs, l, agreement, exec)?;
        per_layer.push(s.accuracy);
        skipped = s.skipped;
        fallbacks.push(s.fallbacks);
    }
    Ok(json!({
        "task": "coref",
        "metric": "accuracy",
        "vectors": src.describe(),
        "agreement": agreement,
        "counts": counts,
        "layers": layers,
        "per_layer": per_layer,
        "fallbacks": fallbacks,
        "skipped": skipped,
    }))
}

fn analogy_words(items: &[AnalogyItem]) -> Vec<&str> {
    items.iter().flat_map(|i| i.words()).collect()
}

fn analogy(args: &ProbeArgs, exec: Execution) -> Result<Value> {
    let items = load_analogies(&args.data)?;
    let (kind, vectors): (String, WordVectors) = if args.hash {
        ("ngram_hash".into(), hash_word_vectors(analogy_words(&items), &HashVectorConfig::default())?)
    } else if let Some(p) = &args.word_vectors {
        require_file(p, "word vectors")?;
        (format!("word_vectors:{}", p.display()), load_word_vectors(p)?)
    } else if let Some(c) = &args.checkpoint {
        require_file(c, "checkpoint")?;
        let model = load_checkpoint(c)?;
        let mut words: Vec<&str> = analogy_words(&items);
        words.sort_unstable();
        words.dedup();
        let emb = model.embed_words(&words)?;
        let mut wv = WordVectors::new();
        for (k, w) in words.iter().enumerate() {
            wv.insert(*w, emb.row_slice(k).to_vec())?;
        }
        (format!("embedding_layer:{}", model.config().arch.kind()), wv)
    } else {
        return Err(CliError::usage(
            "analogy needs --hash, --word-vectors or --checkpoint",
        ));
    };
    let config = AnalogyConfig {
        restrict_vocab: args.restrict_vocab,
        exec,
    };
    let r = analogy_eval(&vectors, &items, &config)?;
    Ok(json!({
        "task": "analogy",
        "vectors": kind,
        "vocabulary": vectors.len(),
        "syntactic": r.syntactic,
        "semantic": r.semantic,
        "overall": r.overall,
        "skipped": r.skipped,
    }))
}

fn similarity(args: &ProbeArgs, exec: Execution) -> Result<Value> {
    let src = source(args)?;
    let corpus = load_corpus(&args.data)?;
    let sentence = corpus.sentences.get(args.sentence).ok_or_else(|| {
        CliError::usage(format!("sentence {} of {}", args.sentence, corpus.len()))
    })?;
    let cv = src.vectors(std::slice::from_ref(sentence), exec)?.remove(0);
    let matrices = (0..cv.num_layers())
        .map(|l| {
            let m = similarity_matrix(&cv, l)?;
            Ok((0..m.rows()).map(|r| m.row_slice(r).to_vec()).collect::<Vec<_>>())
        })
        .collect::<bilm_core::Result<Vec<_>>>()?;
    Ok(json!({
        "task": "similarity",
        "vectors": src.describe(),
        "sentence": args.sentence,
        "tokens": cv.tokens(),
        "layers": matrices,
    }))
}

fn spans(args: &ProbeArgs, exec: Execution) -> Result<Value> {
    let output = args
        .output
        .as_ref()
        .ok_or_else(|| CliError::usage("spans needs --output for the vector dump"))?;
    let src = source(args)?;
    let labeled: Vec<(Vec<String>, Vec<Span>)> = match detect(&args.data, args.format)? {
        DataFormat::Trees => load_trees(&args.data)?
            .into_iter()
            .map(|t| (t.tokens, t.spans))
            .collect(),
        DataFormat::Chunks => load_chunks(&args.data)?
            .into_iter()
            .map(|c| (c.tokens, c.chunks))
            .collect(),
        _ => return Err(CliError::usage("spans needs tree or chunk data")),
    };
    let sentences: Vec<Vec<String>> = labeled.iter().map(|(t, _)| t.clone()).collect();
    let cvs = src.vectors(&sentences, exec)?;
    if args.layer >= src.num_layers() {
        return Err(CliError::usage(format!("layer {} out of range", args.layer)));
    }
    let records = labeled
        .iter()
        .zip(&cvs)
        .filter(|((_, spans), _)| !spans.is_empty())
        .map(|((_, spans), cv)| labeled_span_vectors(cv, args.layer, spans))
        .collect::<bilm_core::Result<Vec<_>>>()?;
    let dim = cvs.first().map_or(0, |c| 4 * c.dim());
    write_vector_dump(output, &records, (1, dim))?;
    Ok(json!({
        "task": "spans",
        "vectors": src.describe(),
        "layer": args.layer,
        "records": records.len(),
        "spans": records.iter().map(ContextVectors::len).sum::<usize>(),
        "dim": dim,
        "output": output.display().to_string(),
    }))
}
