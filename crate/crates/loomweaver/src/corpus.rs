//! Sample kernels in the surface DSL, used by the test suite, the
//! benchmarks, and as ready-made inputs for the CLI.

/// `C[i][j] += A[i][k] * B[k][j]` over an `n`-cube. `dtype` is any
/// element type, e.g. `"f32"` or `"i32"`.
pub fn gemm(n: usize, dtype: &str) -> String {
    format!(
        r#"func gemm {{
  iter i = 0..{n}; iter j = 0..{n}; iter k = 0..{n};
  array A: {dtype}[{n}][{n}] in;
  array B: {dtype}[{n}][{n}] in;
  array C: {dtype}[{n}][{n}] out;
  compute S1 (i, j, k) {{ C[i][j] += A[i][k] * B[k][j]; }}
}}
"#
    )
}

/// BICG sub-kernel: `s = r^T A` and `q = A p`, interleaved per (i, j).
pub fn bicg(n: usize) -> String {
    format!(
        r#"func bicg {{
  iter i = 0..{n}; iter j = 0..{n};
  array A: f32[{n}][{n}] in;
  array r: f32[{n}] in;
  array p: f32[{n}] in;
  array s: f32[{n}] out;
  array q: f32[{n}] out;
  compute S1 (i, j) {{ s[j] += r[i] * A[i][j]; }}
  compute S2 (i, j) {{ q[i] += A[i][j] * p[j]; }}
  schedule {{
    S2.after(S1, j);
  }}
}}
"#
    )
}

/// GESUMMV: `y = alpha*A*x + beta*B*x` with alpha=1.5, beta=1.2.
pub fn gesummv(n: usize) -> String {
    format!(
        r#"func gesummv {{
  iter i = 0..{n}; iter j = 0..{n};
  array A: f32[{n}][{n}] in;
  array B: f32[{n}][{n}] in;
  array x: f32[{n}] in;
  array tmp: f32[{n}] temp;
  array y: f32[{n}] out;
  compute S1 (i, j) {{ tmp[i] += A[i][j] * x[j]; }}
  compute S2 (i, j) {{ y[i] += B[i][j] * x[j]; }}
  compute S3 (i) {{ y[i] = 1.5 * tmp[i] + 1.2 * y[i]; }}
}}
"#
    )
}

/// 2MM: `D = (A*B) * C` through a temporary.
pub fn two_mm(n: usize) -> String {
    format!(
        r#"func two_mm {{
  iter i = 0..{n}; iter j = 0..{n}; iter k = 0..{n};
  array A: f32[{n}][{n}] in;
  array B: f32[{n}][{n}] in;
  array C: f32[{n}][{n}] in;
  array tmp: f32[{n}][{n}] temp;
  array D: f32[{n}][{n}] out;
  compute S1 (i, j, k) {{ tmp[i][j] += A[i][k] * B[k][j]; }}
  compute S2 (i, j, k) {{ D[i][j] += tmp[i][k] * C[k][j]; }}
}}
"#
    )
}

/// 3MM: `G = (A*B) * (C*D)`.
pub fn three_mm(n: usize) -> String {
    format!(
        r#"func three_mm {{
  iter i = 0..{n}; iter j = 0..{n}; iter k = 0..{n};
  array A: f32[{n}][{n}] in;
  array B: f32[{n}][{n}] in;
  array C: f32[{n}][{n}] in;
  array D: f32[{n}][{n}] in;
  array E: f32[{n}][{n}] temp;
  array F: f32[{n}][{n}] temp;
  array G: f32[{n}][{n}] out;
  compute S1 (i, j, k) {{ E[i][j] += A[i][k] * B[k][j]; }}
  compute S2 (i, j, k) {{ F[i][j] += C[i][k] * D[k][j]; }}
  compute S3 (i, j, k) {{ G[i][j] += E[i][k] * F[k][j]; }}
}}
"#
    )
}

/// Jacobi-1d: `tsteps` sweeps of a 3-point stencil, ping-ponged through
/// `B` with a copy-back per step.
pub fn jacobi_1d(tsteps: usize, n: usize) -> String {
    let hi = n - 1;
    format!(
        r#"func jacobi_1d {{
  iter t = 0..{tsteps}; iter i = 1..{hi};
  array A: f32[{n}] inout;
  array B: f32[{n}] temp;
  compute S1 (t, i) {{ B[i] = 0.33333 * (A[i - 1] + A[i] + A[i + 1]); }}
  compute S2 (t, i) {{ A[i] = B[i]; }}
  schedule {{
    S2.after(S1, t);
  }}
}}
"#
    )
}

/// Jacobi-2d: 5-point stencil with per-step copy-back.
pub fn jacobi_2d(tsteps: usize, n: usize) -> String {
    let hi = n - 1;
    format!(
        r#"func jacobi_2d {{
  iter t = 0..{tsteps}; iter i = 1..{hi}; iter j = 1..{hi};
  array A: f32[{n}][{n}] inout;
  array B: f32[{n}][{n}] temp;
  compute S1 (t, i, j) {{ B[i][j] = 0.2 * (A[i][j] + A[i][j - 1] + A[i][1 + j] + A[1 + i][j] + A[i - 1][j]); }}
  compute S2 (t, i, j) {{ A[i][j] = B[i][j]; }}
  schedule {{
    S2.after(S1, t);
  }}
}}
"#
    )
}

/// Heat-1d: explicit Euler step for the 1-d heat equation.
pub fn heat_1d(tsteps: usize, n: usize) -> String {
    let hi = n - 1;
    format!(
        r#"func heat_1d {{
  iter t = 0..{tsteps}; iter i = 1..{hi};
  array A: f32[{n}] inout;
  array B: f32[{n}] temp;
  compute S1 (t, i) {{ B[i] = A[i] + 0.125 * (A[i + 1] - 2.0 * A[i] + A[i - 1]); }}
  compute S2 (t, i) {{ A[i] = B[i]; }}
  schedule {{
    S2.after(S1, t);
  }}
}}
"#
    )
}

/// Seidel-2d: in-place 9-point averaging, tight loop-carried dependences.
pub fn seidel_2d(tsteps: usize, n: usize) -> String {
    let hi = n - 1;
    format!(
        r#"func seidel_2d {{
  iter t = 0..{tsteps}; iter i = 1..{hi}; iter j = 1..{hi};
  array A: f32[{n}][{n}] inout;
  compute S1 (t, i, j) {{ A[i][j] = (A[i - 1][j - 1] + A[i - 1][j] + A[i - 1][j + 1] + A[i][j - 1] + A[i][j] + A[i][j + 1] + A[i + 1][j - 1] + A[i + 1][j] + A[i + 1][j + 1]) / 9.0; }}
}}
"#
    )
}

/// 3x3 box blur over a shrunken output.
pub fn blur(n: usize) -> String {
    let m = n - 2;
    format!(
        r#"func blur {{
  iter i = 0..{m}; iter j = 0..{m};
  array img: f32[{n}][{n}] in;
  array out: f32[{m}][{m}] out;
  compute S1 (i, j) {{ out[i][j] = (img[i][j] + img[i][j + 1] + img[i][j + 2] + img[i + 1][j] + img[i + 1][j + 1] + img[i + 1][j + 2] + img[i + 2][j] + img[i + 2][j + 1] + img[i + 2][j + 2]) / 9.0; }}
}}
"#
    )
}

/// The whole corpus at a representative size, for sweep-style tests.
pub fn all(n: usize) -> Vec<(&'static str, String)> {
    let t = 3;
    vec![
        ("gemm", gemm(n, "f32")),
        ("bicg", bicg(n)),
        ("gesummv", gesummv(n)),
        ("two_mm", two_mm(n)),
        ("three_mm", three_mm(n)),
        ("jacobi_1d", jacobi_1d(t, n)),
        ("jacobi_2d", jacobi_2d(t, n)),
        ("heat_1d", heat_1d(t, n)),
        ("seidel_2d", seidel_2d(t, n)),
        ("blur", blur(n)),
    ]
}
