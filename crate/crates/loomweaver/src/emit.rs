//! HLS C code generation from the attributed loop IR.
//!
//! The output is one synthesizable C function: arrays become typed
//! multi-dimensional parameters (`temp` arrays become zero-initialized
//! locals), loops are canonical `for (int iv = lb; iv < ub + 1; iv++)`
//! with max/min bounds lowered to ternaries, and every attribute turns
//! into an HLS pragma. Emission is deterministic: the same IR always
//! produces byte-identical text.

use std::fmt::Write;

use crate::affine::{AffineExpr, BoundTerm, LoopBound};
use crate::diag::{CompileError, CompileResult};
use crate::frontend::{AssignOp, BinOp, DataType, Lit, PortDir};
use crate::loopir::{ArrayDecl, IfNode, LoopChild, LoopIR, LoopNode, PragmaAttr, ScalarExpr, StmtNode};
use crate::report::ReportJson;

pub fn emit_hls_c(ir: &LoopIR) -> CompileResult<String> {
    let mut out = String::new();
    if ir
        .arrays
        .iter()
        .any(|a| !a.meta.dtype.is_float())
    {
        out.push_str("#include <stdint.h>\n\n");
    }

    let params: Vec<&ArrayDecl> = ir
        .arrays
        .iter()
        .filter(|a| a.meta.dir != PortDir::Temp)
        .collect();
    let param_list: Vec<String> = params
        .iter()
        .map(|a| {
            let dims: String = a.meta.shape.iter().map(|e| format!("[{e}]")).collect();
            format!("{} {}{}", a.meta.dtype.c_name(), a.meta.name, dims)
        })
        .collect();
    let _ = writeln!(out, "void {}({}) {{", ir.name, param_list.join(", "));

    for a in &params {
        emit_partition_pragmas(a, &mut out);
    }
    for a in ir.arrays.iter().filter(|a| a.meta.dir == PortDir::Temp) {
        let dims: String = a.meta.shape.iter().map(|e| format!("[{e}]")).collect();
        let braces = "{".repeat(a.meta.rank());
        let closes = "}".repeat(a.meta.rank());
        let _ = writeln!(
            out,
            "  {} {}{} = {braces}0{closes};",
            a.meta.dtype.c_name(),
            a.meta.name,
            dims
        );
        emit_partition_pragmas(a, &mut out);
    }

    for root in &ir.roots {
        emit_child(root, ir, 1, &mut out)?;
    }
    out.push_str("}\n");
    Ok(out)
}

fn emit_partition_pragmas(a: &ArrayDecl, out: &mut String) {
    for p in &a.partitions {
        let _ = writeln!(
            out,
            "#pragma HLS array_partition variable={} {} factor={} dim={}",
            a.meta.name,
            p.kind.keyword(),
            p.factor,
            p.dim
        );
    }
}

fn emit_child(child: &LoopChild, ir: &LoopIR, indent: usize, out: &mut String) -> CompileResult<()> {
    match child {
        LoopChild::Loop(l) => emit_loop(l, ir, indent, out),
        LoopChild::If(node) => emit_if(node, ir, indent, out),
        LoopChild::Stmt(s) => emit_stmt(s, ir, indent, out),
    }
}

fn emit_loop(l: &LoopNode, ir: &LoopIR, indent: usize, out: &mut String) -> CompileResult<()> {
    let pad = "  ".repeat(indent);
    let lb = emit_bound(&l.lower, true)?;
    let ub_plus_one = match l.upper.as_constant_upper() {
        Some(c) => (c + 1).to_string(),
        None => format!("{} + 1", emit_bound(&l.upper, false)?),
    };
    let _ = writeln!(
        out,
        "{pad}for (int {iv} = {lb}; {iv} < {ub_plus_one}; {iv}++) {{",
        iv = l.iv
    );
    let inner = "  ".repeat(indent + 1);
    for attr in &l.attrs {
        match attr {
            PragmaAttr::Pipeline { ii } => {
                let _ = writeln!(out, "{inner}#pragma HLS pipeline II={ii}");
            }
            PragmaAttr::Unroll { factor, full } => {
                if *full {
                    let _ = writeln!(out, "{inner}#pragma HLS unroll");
                } else {
                    let _ = writeln!(out, "{inner}#pragma HLS unroll factor={factor}");
                }
            }
        }
    }
    for c in &l.body {
        emit_child(c, ir, indent + 1, out)?;
    }
    let _ = writeln!(out, "{pad}}}");
    Ok(())
}

fn emit_if(node: &IfNode, ir: &LoopIR, indent: usize, out: &mut String) -> CompileResult<()> {
    let pad = "  ".repeat(indent);
    let conds: Vec<String> = node
        .conds
        .iter()
        .map(|c| {
            let e = emit_affine(&c.expr);
            match c.rel {
                crate::polyhedral::Relation::GeZero => format!("{e} >= 0"),
                crate::polyhedral::Relation::EqZero => format!("{e} == 0"),
            }
        })
        .collect();
    let _ = writeln!(out, "{pad}if ({}) {{", conds.join(" && "));
    for c in &node.body {
        emit_child(c, ir, indent + 1, out)?;
    }
    let _ = writeln!(out, "{pad}}}");
    Ok(())
}

fn emit_stmt(s: &StmtNode, ir: &LoopIR, indent: usize, out: &mut String) -> CompileResult<()> {
    let pad = "  ".repeat(indent);
    let dtype = ir
        .array(&s.dest)
        .map(|a| a.meta.dtype)
        .ok_or_else(|| CompileError::UnknownArray(s.dest.clone()))?;
    let idx: String = s
        .dest_indices
        .iter()
        .map(|e| format!("[{}]", emit_affine(e)))
        .collect();
    let op = match s.op {
        AssignOp::Assign => "=",
        AssignOp::Accumulate => "+=",
    };
    let _ = writeln!(
        out,
        "{pad}{}{idx} {op} {};",
        s.dest,
        emit_scalar(&s.rhs, dtype, 0)
    );
    Ok(())
}

/// Render a bound list: max for lower bounds, min for upper bounds,
/// folded to nested ternaries.
fn emit_bound(b: &LoopBound, is_lower: bool) -> CompileResult<String> {
    let mut terms = b.terms.iter();
    let first = terms
        .next()
        .ok_or_else(|| CompileError::Emit("empty loop bound".into()))?;
    let mut acc = emit_bound_term(first, is_lower);
    for t in terms {
        let rhs = emit_bound_term(t, is_lower);
        let cmp = if is_lower { ">" } else { "<" };
        acc = format!("({acc} {cmp} {rhs} ? {acc} : {rhs})");
    }
    Ok(acc)
}

/// One bound term; divisions round toward the bound's direction even for
/// negative numerators.
fn emit_bound_term(t: &BoundTerm, is_lower: bool) -> String {
    if t.den == 1 {
        return emit_affine_atom(&t.expr);
    }
    if let Some(c) = t.expr.as_constant() {
        let v = if is_lower {
            crate::affine::ceil_div(c, t.den)
        } else {
            crate::affine::floor_div(c, t.den)
        };
        return v.to_string();
    }
    let e = emit_affine(&t.expr);
    let d = t.den;
    if is_lower {
        // ceil(e/d)
        format!("(({e}) >= 0 ? (({e}) + {}) / {d} : -((-({e})) / {d}))", d - 1)
    } else {
        // floor(e/d)
        format!("(({e}) >= 0 ? ({e}) / {d} : -((-({e}) + {}) / {d}))", d - 1)
    }
}

fn emit_affine(e: &AffineExpr) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (name, c) in e.dims() {
        if c == 0 {
            continue;
        }
        if parts.is_empty() {
            parts.push(match c {
                1 => name.to_string(),
                -1 => format!("-{name}"),
                c => format!("{c} * {name}"),
            });
        } else if c == 1 {
            parts.push(format!("+ {name}"));
        } else if c == -1 {
            parts.push(format!("- {name}"));
        } else if c > 0 {
            parts.push(format!("+ {c} * {name}"));
        } else {
            parts.push(format!("- {} * {name}", -c));
        }
    }
    let k = e.constant_term();
    if parts.is_empty() {
        return k.to_string();
    }
    if k > 0 {
        parts.push(format!("+ {k}"));
    } else if k < 0 {
        parts.push(format!("- {}", -k));
    }
    parts.join(" ")
}

/// An affine expression in atom position (parenthesized unless simple).
fn emit_affine_atom(e: &AffineExpr) -> String {
    if e.as_constant().is_some() || e.as_single_dim().is_some() {
        emit_affine(e)
    } else {
        format!("({})", emit_affine(e))
    }
}

fn emit_lit(lit: &Lit, dtype: DataType) -> String {
    match (dtype, lit) {
        (DataType::F32, Lit::Int(v)) => format!("{v}.0f"),
        (DataType::F32, Lit::Float(v)) => {
            let mut s = format!("{v}");
            if !s.contains('.') && !s.contains('e') {
                s.push_str(".0");
            }
            format!("{s}f")
        }
        (DataType::F64, Lit::Int(v)) => format!("{v}.0"),
        (DataType::F64, Lit::Float(v)) => {
            let mut s = format!("{v}");
            if !s.contains('.') && !s.contains('e') {
                s.push_str(".0");
            }
            s
        }
        (_, Lit::Int(v)) => {
            if *v < 0 {
                format!("({v})")
            } else {
                v.to_string()
            }
        }
        (_, Lit::Float(v)) => format!("{v}"), // rejected upstream
    }
}

fn emit_scalar(e: &ScalarExpr, dtype: DataType, parent: u8) -> String {
    match e {
        ScalarExpr::Const(l) => emit_lit(l, dtype),
        ScalarExpr::Affine(a) => {
            // iterator-valued: floats convert explicitly so the C
            // arithmetic stays in the statement's precision
            let rendered = emit_affine_atom(a);
            match dtype {
                DataType::F32 => format!("(float){rendered}"),
                DataType::F64 => format!("(double){rendered}"),
                _ => rendered,
            }
        }
        ScalarExpr::Load { array, indices } => {
            let idx: String = indices
                .iter()
                .map(|i| format!("[{}]", emit_affine(i)))
                .collect();
            format!("{array}{idx}")
        }
        ScalarExpr::Neg(inner) => format!("-{}", emit_scalar(inner, dtype, 2)),
        ScalarExpr::Bin(op, l, r) => {
            let prec = match op {
                BinOp::Add | BinOp::Sub => 1,
                BinOp::Mul | BinOp::Div => 2,
            };
            let s = format!(
                "{} {} {}",
                emit_scalar(l, dtype, prec),
                op.symbol(),
                emit_scalar(r, dtype, prec + 1)
            );
            if prec < parent {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

/// Render the machine-readable report.
pub fn emit_report(report: &ReportJson) -> String {
    serde_json::to_string_pretty(report).unwrap_or_else(|_| "{}".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::loopir::lower_ast;
    use crate::polyhedral::{build_ast, lift};

    #[test]
    fn empty_function_is_valid_c() {
        let f = parse_program("func nop { }").unwrap();
        let built = build_ast(&[]).unwrap();
        let ir = lower_ast(&built.ast, &[], &f).unwrap();
        let c = emit_hls_c(&ir).unwrap();
        assert_eq!(c, "void nop() {\n}\n");
    }

    #[test]
    fn gemm_baseline_shape() {
        let f = parse_program(
            r#"
            func gemm {
              iter i = 0..8; iter j = 0..8; iter k = 0..8;
              array A: f32[8][8] in; array B: f32[8][8] in; array C: f32[8][8] out;
              compute S1 (i, j, k) { C[i][j] += A[i][k] * B[k][j]; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        let ir = lower_ast(&built.ast, &[s], &f).unwrap();
        let c = emit_hls_c(&ir).unwrap();
        assert!(c.contains("void gemm(float A[8][8], float B[8][8], float C[8][8]) {"));
        assert!(c.contains("for (int i = 0; i < 8; i++) {"));
        assert!(c.contains("C[i][j] += A[i][k] * B[k][j];"));
        // deterministic
        assert_eq!(c, emit_hls_c(&ir).unwrap());
    }

    #[test]
    fn nondivisible_split_emits_ternary_min() {
        let f = parse_program(
            r#"
            func f {
              iter i = 0..10;
              array A: f32[10] inout;
              compute S (i) { A[i] = A[i] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let t = crate::polyhedral::split(&s, "i", 4, "i0", "i1").unwrap();
        let built = build_ast(std::slice::from_ref(&t)).unwrap();
        let ir = lower_ast(&built.ast, &[t], &f).unwrap();
        let c = emit_hls_c(&ir).unwrap();
        assert!(c.contains('?'), "expected a ternary min bound:\n{c}");
        assert!(c.contains("A[4 * i0 + i1]"));
    }

    #[test]
    fn offset_split_emits_ternary_max_lower_bound() {
        // i in [5, 13) split by 4: i1 >= max(0, 5 - 4*i0)
        let f = parse_program(
            r#"
            func f {
              iter i = 5..13;
              array A: f32[13] inout;
              compute S (i) { A[i] = A[i] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let t = crate::polyhedral::split(&s, "i", 4, "i0", "i1").unwrap();
        let built = build_ast(std::slice::from_ref(&t)).unwrap();
        assert_eq!(crate::polyhedral::enumerate_instances(&built.ast).len(), 8);
        let ir = lower_ast(&built.ast, &[t], &f).unwrap();
        let c = emit_hls_c(&ir).unwrap();
        let max_line = c
            .lines()
            .find(|l| l.contains("int i1 ="))
            .expect("inner loop");
        assert!(max_line.contains('?'), "expected ternary max: {max_line}");
    }

    #[test]
    fn float_literals_keep_precision_suffix() {
        let f = parse_program(
            r#"
            func s {
              iter i = 1..7;
              array A: f32[8] in; array B: f32[8] out;
              compute S1 (i) { B[i] = 0.33333 * (A[i - 1] + A[i] + A[i + 1]); }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        let ir = lower_ast(&built.ast, &[s], &f).unwrap();
        let c = emit_hls_c(&ir).unwrap();
        assert!(c.contains("0.33333f"));
        assert!(c.contains("A[i - 1]"));
    }
}
