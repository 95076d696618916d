//! Brute-force dependence oracle: data-parallel pair generation vs the
//! sequential fallback on the same inputs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use loomweaver::frontend::parse_program;
use loomweaver::oracle::brute_force_dependences_seq;
#[cfg(feature = "parallel")]
use loomweaver::oracle::brute_force_dependences_par;

fn gemm(n: usize) -> String {
    format!(
        r#"func gemm {{
  iter i = 0..{n}; iter j = 0..{n}; iter k = 0..{n};
  array A: f32[{n}][{n}] in; array B: f32[{n}][{n}] in; array C: f32[{n}][{n}] out;
  compute S1 (i, j, k) {{ C[i][j] += A[i][k] * B[k][j]; }}
}}
"#
    )
}

fn seidel(n: usize) -> String {
    let hi = n - 1;
    format!(
        r#"func seidel {{
  iter t = 0..{n}; iter i = 1..{hi}; iter j = 1..{hi};
  array A: f32[{n}][{n}] inout;
  compute S1 (t, i, j) {{ A[i][j] = (A[i - 1][j] + A[i][j - 1] + A[i][j] + A[i][j + 1] + A[i + 1][j]) / 5.0; }}
}}
"#
    )
}

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    for (name, src, cap) in [
        ("gemm", gemm(64), 24usize),
        ("seidel", seidel(32), 16),
    ] {
        let f = parse_program(&src).unwrap();
        let compute = &f.computes[0];
        group.bench_with_input(BenchmarkId::new("seq", name), compute, |b, compute| {
            b.iter(|| brute_force_dependences_seq(std::hint::black_box(compute), cap).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("par", name), compute, |b, compute| {
            b.iter(|| brute_force_dependences_par(std::hint::black_box(compute), cap).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_oracle);
criterion_main!(benches);
