//! End-to-end compilation and DSE timing over the sample kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use loomweaver::corpus;
use loomweaver::frontend::parse_program;
use loomweaver::pipeline::{compile, CompileOptions};

fn bench_compile(c: &mut Criterion) {
    let mut group = c.benchmark_group("compile");
    for (name, src) in [("gemm", corpus::gemm(32, "f32")), ("bicg", corpus::bicg(32))] {
        let f = parse_program(&src).unwrap();
        group.bench_with_input(BenchmarkId::new("directives", name), &f, |b, f| {
            b.iter(|| compile(std::hint::black_box(f), &CompileOptions::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("dse", name), &f, |b, f| {
            let opts = CompileOptions {
                dse: true,
                ..Default::default()
            };
            b.iter(|| compile(std::hint::black_box(f), &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_compile);
criterion_main!(benches);
