use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use flow2bpmn_core::corpus::{generate, CorpusConfig};
use flow2bpmn_core::ingest::parse_spec;
use flow2bpmn_core::layout::{default_params, layout};
use flow2bpmn_core::pipeline::Pipeline;

const SIZES: [usize; 4] = [20, 40, 60, 80];

fn spec_of_size(size: usize) -> String {
    let corpus = generate(&CorpusConfig::new(17, 1, size, size)).expect("valid range");
    corpus.specs.into_iter().next().expect("one spec").json
}

fn end_to_end(c: &mut Criterion) {
    let pipeline = Pipeline::bundled();
    let mut group = c.benchmark_group("convert");
    for size in SIZES {
        let json = spec_of_size(size);
        group.throughput(Throughput::Elements(size as u64));
        group.bench_with_input(BenchmarkId::from_parameter(size), &json, |b, json| {
            b.iter(|| {
                pipeline
                    .convert(black_box(json.as_bytes()), "bench.json", true)
                    .expect("clean spec converts")
            })
        });
    }
    group.finish();
}

fn stages(c: &mut Criterion) {
    let pipeline = Pipeline::bundled();
    let json = spec_of_size(60);
    c.bench_function("ingest/60", |b| {
        b.iter(|| parse_spec(black_box(json.as_bytes()), "bench.json").expect("parses"))
    });
    c.bench_function("validate/60", |b| {
        b.iter(|| {
            pipeline
                .validate(black_box(json.as_bytes()), "bench.json")
                .expect("validates")
        })
    });
    let conversion = pipeline
        .convert(json.as_bytes(), "bench.json", false)
        .expect("converts");
    let params = default_params();
    c.bench_function("layout/60", |b| {
        b.iter(|| layout(black_box(&conversion.model), &params).expect("lays out"))
    });
}

criterion_group!(benches, end_to_end, stages);
criterion_main!(benches);
