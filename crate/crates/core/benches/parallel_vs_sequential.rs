use std::hint::black_box;

use bilm_core::bilm::BiLm;
use bilm_core::parallel::Execution;
use bilm_core::synthetic::toy_corpus;
use bilm_core::BiLmConfig;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn model(preset: &str, corpus: &[Vec<String>]) -> BiLm {
    BiLm::from_corpus(BiLmConfig::preset(preset).expect("preset"), corpus, None).expect("model")
}

fn gradients(c: &mut Criterion) {
    let corpus = toy_corpus(32, 1);
    let mut group = c.benchmark_group("loss_and_gradients");
    group.sample_size(10);
    for preset in ["tiny-lstm", "tiny-transformer", "tiny-cnn"] {
        let m = model(preset, &corpus);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, preset), &exec, |b, &exec| {
                b.iter(|| black_box(m.loss_and_gradients(&corpus, None, exec).expect("grads")))
            });
        }
    }
    group.finish();
}

fn extraction(c: &mut Criterion) {
    let corpus = toy_corpus(64, 2);
    let m = model("tiny-lstm", &corpus);
    let mut group = c.benchmark_group("extract_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(m.extract_batch(&corpus, exec).expect("vectors")))
        });
    }
    group.finish();
}

criterion_group!(benches, gradients, extraction);
criterion_main!(benches);
