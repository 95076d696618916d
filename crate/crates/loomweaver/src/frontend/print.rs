//! Pretty-printer for [`Function`]. Printing then re-parsing yields a
//! structurally identical program; the round-trip is property-tested.

use std::fmt::Write;

use crate::affine::AffineExpr;
use crate::frontend::ast::*;

pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "func {} {{", f.name);
    // Iterators are shared across computes; collect unique ones in first-use order.
    let mut seen: Vec<&IterVar> = Vec::new();
    for c in &f.computes {
        for iv in &c.iters {
            if !seen.iter().any(|s| s.name == iv.name) {
                seen.push(iv);
            }
        }
    }
    for iv in &seen {
        let _ = writeln!(out, "  iter {} = {}..{};", iv.name, iv.lower, iv.upper);
    }
    for p in &f.placeholders {
        let dims: String = p.shape.iter().map(|e| format!("[{e}]")).collect();
        let _ = writeln!(
            out,
            "  array {}: {}{} {};",
            p.name,
            p.dtype,
            dims,
            p.dir.keyword()
        );
    }
    for c in &f.computes {
        let iters: Vec<&str> = c.iters.iter().map(|iv| iv.name.as_str()).collect();
        let _ = writeln!(
            out,
            "  compute {} ({}) {{ {}{} {} {}; }}",
            c.name,
            iters.join(", "),
            c.dest,
            print_indices(&c.dest_indices),
            match c.op {
                AssignOp::Assign => "=",
                AssignOp::Accumulate => "+=",
            },
            print_expr(&c.rhs)
        );
    }
    if !f.directives.is_empty() {
        let _ = writeln!(out, "  schedule {{");
        for d in &f.directives {
            let _ = writeln!(out, "    {};", print_directive(d, &f.name));
        }
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    out
}

fn print_indices(indices: &[AffineExpr]) -> String {
    indices.iter().map(|e| format!("[{e}]")).collect()
}

pub fn print_expr(e: &Expr) -> String {
    print_prec(e, 0)
}

fn print_prec(e: &Expr, parent: u8) -> String {
    match e {
        Expr::Lit(Lit::Int(v)) => {
            if *v < 0 {
                format!("({v})")
            } else {
                v.to_string()
            }
        }
        Expr::Lit(Lit::Float(v)) => {
            let mut s = format!("{v}");
            if !s.contains('.') && !s.contains('e') {
                s.push_str(".0");
            }
            s
        }
        Expr::Iter(name) => name.clone(),
        Expr::Load { array, indices } => format!("{array}{}", print_indices(indices)),
        Expr::Neg(inner) => format!("-{}", print_prec(inner, 2)),
        Expr::Bin(op, l, r) => {
            let prec = match op {
                BinOp::Add | BinOp::Sub => 1,
                BinOp::Mul | BinOp::Div => 2,
            };
            // Right operand gets tighter binding so `a - (b + c)` survives.
            let s = format!(
                "{} {} {}",
                print_prec(l, prec),
                op.symbol(),
                print_prec(r, prec + 1)
            );
            if prec < parent {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

pub fn print_directive(d: &ScheduleDirective, func_name: &str) -> String {
    match d {
        ScheduleDirective::Interchange { compute, a, b } => {
            format!("{compute}.interchange({a}, {b})")
        }
        ScheduleDirective::Split {
            compute,
            dim,
            factor,
            outer,
            inner,
        } => format!("{compute}.split({dim}, {factor}, {outer}, {inner})"),
        ScheduleDirective::Tile {
            compute,
            i,
            j,
            ti,
            tj,
            i0,
            j0,
            i1,
            j1,
        } => format!("{compute}.tile({i}, {j}, {ti}, {tj}, {i0}, {j0}, {i1}, {j1})"),
        ScheduleDirective::Skew {
            compute,
            i,
            j,
            t1,
            t2,
            ni,
            nj,
        } => format!("{compute}.skew({i}, {j}, {t1}, {t2}, {ni}, {nj})"),
        ScheduleDirective::After {
            compute,
            base,
            level,
        } => match level {
            AfterLevel::Dim(d) => format!("{compute}.after({base}, {d})"),
            AfterLevel::Root => format!("{compute}.after({base}, -1)"),
        },
        ScheduleDirective::Pipeline { compute, dim, ii } => {
            format!("{compute}.pipeline({dim}, {ii})")
        }
        ScheduleDirective::Unroll {
            compute,
            dim,
            factor,
        } => format!("{compute}.unroll({dim}, {factor})"),
        ScheduleDirective::Partition {
            array,
            factors,
            kind,
        } => {
            let fs: Vec<String> = factors.iter().map(|f| f.to_string()).collect();
            format!(
                "{array}.partition({{{}}}, \"{}\")",
                fs.join(", "),
                kind.keyword()
            )
        }
        ScheduleDirective::AutoDse { path } => match path {
            Some(p) => format!("{func_name}.auto_dse(\"{p}\")"),
            None => format!("{func_name}.auto_dse()"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse_program;

    #[test]
    fn round_trip_gemm() {
        let src = r#"
        func gemm {
          iter i = 0..8; iter j = 0..8; iter k = 0..8;
          array A: f32[8][8] in; array B: f32[8][8] in; array C: f32[8][8] out;
          compute S1 (i, j, k) { C[i][j] += A[i][k] * B[k][j]; }
          schedule {
            S1.tile(i, j, 4, 4, i0, j0, i1, j1);
            S1.pipeline(j0, 1);
            A.partition({1, 4}, "cyclic");
          }
        }
        "#;
        let f = parse_program(src).unwrap();
        let printed = print_function(&f);
        let f2 = parse_program(&printed).unwrap();
        assert_eq!(f, f2);
    }

    #[test]
    fn round_trip_mixed_arith() {
        let src = r#"
        func mix {
          iter i = 0..4;
          array A: f32[8] in; array B: f32[8] out;
          compute S1 (i) { B[i] = 0.5 * (A[i + 1] - A[i]) / 2.0 + A[i] * -1.0; }
        }
        "#;
        let f = parse_program(src).unwrap();
        let f2 = parse_program(&print_function(&f)).unwrap();
        assert_eq!(f, f2);
    }
}
