use cachevet_bench::{runs, workloads};
use cachevet_core::cache::oracle_classes;
use cachevet_core::patch::{align_traces, reference_trace};
use cachevet_core::smt::SmtProcess;
use cachevet_core::{run_cegar, run_monitoring};
use criterion::{criterion_group, criterion_main, Criterion};

fn verification(c: &mut Criterion) {
    let solver = SmtProcess::from_env();
    let mut g = c.benchmark_group("run_cegar");
    g.sample_size(10);
    for w in workloads() {
        g.bench_function(&w.name, |b| b.iter(|| run_cegar(&w.program, &w.cache, w.model, &solver).unwrap()));
    }
    g.finish();
}

fn monitoring(c: &mut Criterion) {
    let solver = SmtProcess::from_env();
    let mut g = c.benchmark_group("run_monitoring");
    g.sample_size(10);
    for w in workloads() {
        g.bench_function(&w.name, |b| b.iter(|| run_monitoring(&w.program, &w.cache, w.model, &solver).unwrap()));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle_classes");
    for w in workloads() {
        g.bench_function(&w.name, |b| b.iter(|| oracle_classes(&w.program, &w.cache, w.model, None).unwrap()));
    }
    g.finish();
}

fn alignment(c: &mut Criterion) {
    let traces = runs(16, 20);
    let reference = reference_trace(traces.iter().map(Vec::as_slice)).unwrap();
    c.bench_function("reference_trace/16x20", |b| {
        b.iter(|| reference_trace(traces.iter().map(Vec::as_slice)).unwrap())
    });
    c.bench_function("align_traces/16x20", |b| {
        b.iter(|| traces.iter().map(|t| align_traces(t, &reference).unwrap().len()).sum::<usize>())
    });
}

criterion_group!(benches, verification, monitoring, oracle, alignment);
criterion_main!(benches);
