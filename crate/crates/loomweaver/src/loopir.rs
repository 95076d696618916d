//! Explicit loop-nest IR with affine bounds and HLS pragma attributes.
//! Lowered from the polyhedral AST; hardware optimizations live here as
//! attributes, and code is emitted from this level.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::affine::{AffineExpr, LoopBound};
use crate::diag::{CompileError, CompileResult};
use crate::frontend::{
    AssignOp, BinOp, Compute, Expr, Function, Lit, PartitionKind, Placeholder, ScheduleDirective,
};
use crate::polyhedral::{HwAnnotation, PolyAst, PolyStmt};

/// Pragma attribute on a loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PragmaAttr {
    Pipeline { ii: i64 },
    Unroll { factor: i64, full: bool },
}

/// Array partitioning attribute; `dim` is 1-based, matching the pragma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayPartition {
    pub kind: PartitionKind,
    pub factor: i64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayDecl {
    pub meta: Placeholder,
    pub partitions: Vec<ArrayPartition>,
}

/// Scalar expression over enclosing loop ivs. Iterator references from
/// the source become affine expressions after substitution.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Const(Lit),
    Affine(AffineExpr),
    Load {
        array: String,
        indices: Vec<AffineExpr>,
    },
    Neg(Box<ScalarExpr>),
    Bin(BinOp, Box<ScalarExpr>, Box<ScalarExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StmtNode {
    pub name: String,
    pub dest: String,
    pub dest_indices: Vec<AffineExpr>,
    pub op: AssignOp,
    pub rhs: ScalarExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfNode {
    pub conds: Vec<crate::polyhedral::Constraint>,
    pub body: Vec<LoopChild>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopNode {
    pub iv: String,
    /// Inclusive bounds, affine over enclosing ivs, possibly max/min lists.
    pub lower: LoopBound,
    pub upper: LoopBound,
    pub attrs: Vec<PragmaAttr>,
    pub body: Vec<LoopChild>,
}

impl LoopNode {
    /// Constant trip count when both bounds fold.
    pub fn const_trip(&self) -> Option<i64> {
        let lo = self.lower.as_constant_lower()?;
        let hi = self.upper.as_constant_upper()?;
        Some((hi - lo + 1).max(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoopChild {
    Loop(LoopNode),
    Stmt(StmtNode),
    If(IfNode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopIR {
    pub name: String,
    pub arrays: Vec<ArrayDecl>,
    pub roots: Vec<LoopChild>,
}

impl LoopIR {
    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays.iter().find(|a| a.meta.name == name)
    }
}

/// Map the polyhedral AST onto the loop IR: for-nodes become loops,
/// block-nodes become sibling sequences, user-nodes become statements
/// with their indices substituted, and annotations become pragmas.
pub fn lower_ast(ast: &PolyAst, stmts: &[PolyStmt], f: &Function) -> CompileResult<LoopIR> {
    // Every annotation must still name a live dimension; a transform that
    // eliminated an annotated dim is an error here.
    for s in stmts {
        for ann in &s.annotations {
            if !s.has_dim(ann.dim()) {
                return Err(CompileError::Pragma(format!(
                    "annotation on `{}` references dimension `{}` eliminated by transformation",
                    s.name,
                    ann.dim()
                )));
            }
        }
    }
    let arrays = f
        .placeholders
        .iter()
        .map(|p| ArrayDecl {
            meta: p.clone(),
            partitions: Vec::new(),
        })
        .collect();
    let roots = lower_children(ast, stmts, f)?;
    Ok(LoopIR {
        name: f.name.clone(),
        arrays,
        roots,
    })
}

fn lower_children(ast: &PolyAst, stmts: &[PolyStmt], f: &Function) -> CompileResult<Vec<LoopChild>> {
    Ok(match ast {
        PolyAst::Block(children) => {
            let mut out = Vec::new();
            for c in children {
                out.extend(lower_children(c, stmts, f)?);
            }
            out
        }
        other => vec![lower_one(other, stmts, f)?],
    })
}

fn lower_one(ast: &PolyAst, stmts: &[PolyStmt], f: &Function) -> CompileResult<LoopChild> {
    match ast {
        PolyAst::For {
            iv,
            lower,
            upper,
            annotations,
            body,
        } => {
            let trip = {
                let lo = lower.as_constant_lower();
                let hi = upper.as_constant_upper();
                match (lo, hi) {
                    (Some(lo), Some(hi)) => Some(hi - lo + 1),
                    _ => None,
                }
            };
            let mut attrs = Vec::new();
            for ann in annotations {
                let attr = match ann {
                    HwAnnotation::Pipeline { ii, .. } => PragmaAttr::Pipeline { ii: *ii },
                    HwAnnotation::Unroll { factor, .. } => PragmaAttr::Unroll {
                        factor: *factor,
                        full: trip == Some(*factor),
                    },
                };
                merge_attr(&mut attrs, attr, iv)?;
            }
            Ok(LoopChild::Loop(LoopNode {
                iv: iv.clone(),
                lower: lower.clone(),
                upper: upper.clone(),
                attrs,
                body: lower_children(body, stmts, f)?,
            }))
        }
        PolyAst::If { conds, body } => Ok(LoopChild::If(IfNode {
            conds: conds.clone(),
            body: lower_children(body, stmts, f)?,
        })),
        PolyAst::User { stmt } => {
            let s = &stmts[*stmt];
            let c = &f.computes[s.compute];
            Ok(LoopChild::Stmt(lower_stmt(s, c)))
        }
        PolyAst::Block(_) => unreachable!("blocks flattened by lower_children"),
    }
}

fn lower_stmt(s: &PolyStmt, c: &Compute) -> StmtNode {
    let dest_indices = c
        .dest_indices
        .iter()
        .map(|idx| idx.substitute_all(&s.iter_map))
        .collect();
    StmtNode {
        name: s.name.clone(),
        dest: c.dest.clone(),
        dest_indices,
        op: c.op,
        rhs: lower_expr(&c.rhs, &s.iter_map),
    }
}

fn lower_expr(e: &Expr, iter_map: &BTreeMap<String, AffineExpr>) -> ScalarExpr {
    match e {
        Expr::Lit(l) => ScalarExpr::Const(l.clone()),
        Expr::Iter(name) => ScalarExpr::Affine(
            iter_map
                .get(name)
                .cloned()
                .unwrap_or_else(|| AffineExpr::dim(name.clone())),
        ),
        Expr::Load { array, indices } => ScalarExpr::Load {
            array: array.clone(),
            indices: indices
                .iter()
                .map(|idx| idx.substitute_all(iter_map))
                .collect(),
        },
        Expr::Neg(inner) => ScalarExpr::Neg(Box::new(lower_expr(inner, iter_map))),
        Expr::Bin(op, l, r) => ScalarExpr::Bin(
            *op,
            Box::new(lower_expr(l, iter_map)),
            Box::new(lower_expr(r, iter_map)),
        ),
    }
}

fn merge_attr(attrs: &mut Vec<PragmaAttr>, attr: PragmaAttr, iv: &str) -> CompileResult<()> {
    let conflict = attrs.iter().any(|a| {
        matches!(
            (a, &attr),
            (PragmaAttr::Pipeline { .. }, PragmaAttr::Pipeline { .. })
                | (PragmaAttr::Unroll { .. }, PragmaAttr::Unroll { .. })
        )
    });
    if conflict {
        if attrs.contains(&attr) {
            return Ok(());
        }
        return Err(CompileError::Pragma(format!(
            "conflicting attributes on loop `{iv}`"
        )));
    }
    attrs.push(attr);
    Ok(())
}

/// Attach one hardware directive to an existing IR, returning the
/// modified copy. Pipeline and unroll find the target loop by iv name
/// within the nests containing the compute's statement; partitions attach
/// to the array declaration.
pub fn attach_hw(ir: &LoopIR, d: &ScheduleDirective) -> CompileResult<LoopIR> {
    let mut out = ir.clone();
    match d {
        ScheduleDirective::Partition {
            array,
            factors,
            kind,
        } => {
            let decl = out
                .arrays
                .iter_mut()
                .find(|a| a.meta.name == *array)
                .ok_or_else(|| CompileError::UnknownArray(array.clone()))?;
            if factors.len() > decl.meta.rank() {
                return Err(CompileError::Pragma(format!(
                    "`{array}` has rank {}, got {} partition factors",
                    decl.meta.rank(),
                    factors.len()
                )));
            }
            for (i, &factor) in factors.iter().enumerate() {
                if factor <= 1 {
                    continue; // factor 1 partitions nothing
                }
                let dim = i + 1;
                if decl.partitions.iter().any(|p| p.dim == dim) {
                    return Err(CompileError::Pragma(format!(
                        "duplicate partition spec for `{array}` dim {dim}"
                    )));
                }
                decl.partitions.push(ArrayPartition {
                    kind: *kind,
                    factor,
                    dim,
                });
            }
        }
        ScheduleDirective::Pipeline { compute, dim, ii } => {
            attach_loop_attr(&mut out.roots, compute, dim, PragmaAttr::Pipeline { ii: *ii })?;
        }
        ScheduleDirective::Unroll {
            compute,
            dim,
            factor,
        } => {
            // `full` is resolved against the trip count at the target loop.
            attach_loop_attr(
                &mut out.roots,
                compute,
                dim,
                PragmaAttr::Unroll {
                    factor: *factor,
                    full: false,
                },
            )?;
        }
        other => {
            return Err(CompileError::Pragma(format!(
                "not a hardware directive: {other:?}"
            )))
        }
    }
    Ok(out)
}

fn attach_loop_attr(
    roots: &mut [LoopChild],
    compute: &str,
    dim: &str,
    attr: PragmaAttr,
) -> CompileResult<()> {
    fn contains_stmt(children: &[LoopChild], compute: &str) -> bool {
        children.iter().any(|c| match c {
            LoopChild::Stmt(s) => s.name == compute,
            LoopChild::Loop(l) => contains_stmt(&l.body, compute),
            LoopChild::If(i) => contains_stmt(&i.body, compute),
        })
    }
    fn visit(
        children: &mut [LoopChild],
        compute: &str,
        dim: &str,
        attr: &PragmaAttr,
        hit: &mut bool,
    ) -> CompileResult<()> {
        for c in children {
            match c {
                LoopChild::Loop(l) => {
                    if l.iv == dim && contains_stmt(&l.body, compute) {
                        let resolved = match attr {
                            PragmaAttr::Unroll { factor, .. } => {
                                if let Some(trip) = l.const_trip() {
                                    if *factor > trip {
                                        return Err(CompileError::Pragma(format!(
                                            "unroll factor {factor} exceeds trip count {trip} of `{dim}`"
                                        )));
                                    }
                                    PragmaAttr::Unroll {
                                        factor: *factor,
                                        full: *factor == trip,
                                    }
                                } else {
                                    attr.clone()
                                }
                            }
                            other => other.clone(),
                        };
                        merge_attr(&mut l.attrs, resolved, dim)?;
                        *hit = true;
                    } else {
                        visit(&mut l.body, compute, dim, attr, hit)?;
                    }
                }
                LoopChild::If(i) => visit(&mut i.body, compute, dim, attr, hit)?,
                LoopChild::Stmt(_) => {}
            }
        }
        Ok(())
    }
    let mut hit = false;
    visit(roots, compute, dim, &attr, &mut hit)?;
    if !hit {
        return Err(CompileError::Pragma(format!(
            "no loop `{dim}` encloses a statement of `{compute}`"
        )));
    }
    Ok(())
}

/// Indented textual form used by `--emit loopir` and golden tests.
pub fn print_loopir(ir: &LoopIR) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "func {} {{", ir.name);
    for a in &ir.arrays {
        let dims: String = a.meta.shape.iter().map(|e| format!("[{e}]")).collect();
        let mut line = format!(
            "  array {}: {}{} {}",
            a.meta.name,
            a.meta.dtype,
            dims,
            a.meta.dir.keyword()
        );
        for p in &a.partitions {
            line.push_str(&format!(
                " @partition({}, factor={}, dim={})",
                p.kind.keyword(),
                p.factor,
                p.dim
            ));
        }
        let _ = writeln!(out, "{line}");
    }
    for root in &ir.roots {
        print_child(root, 1, &mut out);
    }
    out.push_str("}\n");
    out
}

fn print_child(child: &LoopChild, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match child {
        LoopChild::Loop(l) => {
            for attr in &l.attrs {
                match attr {
                    PragmaAttr::Pipeline { ii } => {
                        let _ = writeln!(out, "{pad}@pipeline(II={ii})");
                    }
                    PragmaAttr::Unroll { factor, full } => {
                        if *full {
                            let _ = writeln!(out, "{pad}@unroll(full)");
                        } else {
                            let _ = writeln!(out, "{pad}@unroll(factor={factor})");
                        }
                    }
                }
            }
            let _ = writeln!(
                out,
                "{pad}for {} in [{}, {}] {{",
                l.iv,
                print_bound(&l.lower, true),
                print_bound(&l.upper, false)
            );
            for c in &l.body {
                print_child(c, indent + 1, out);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        LoopChild::If(i) => {
            let cs: Vec<String> = i.conds.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{pad}if {} {{", cs.join(" and "));
            for c in &i.body {
                print_child(c, indent + 1, out);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        LoopChild::Stmt(s) => {
            let idx: String = s.dest_indices.iter().map(|e| format!("[{e}]")).collect();
            let op = match s.op {
                AssignOp::Assign => "=",
                AssignOp::Accumulate => "+=",
            };
            let _ = writeln!(
                out,
                "{pad}{}: {}{idx} {op} {};",
                s.name,
                s.dest,
                print_scalar(&s.rhs)
            );
        }
    }
}

fn print_bound(b: &LoopBound, is_lower: bool) -> String {
    let terms: Vec<String> = b.terms.iter().map(|t| t.to_string()).collect();
    if terms.len() == 1 {
        terms.into_iter().next().unwrap()
    } else if is_lower {
        format!("max({})", terms.join(", "))
    } else {
        format!("min({})", terms.join(", "))
    }
}

pub fn print_scalar(e: &ScalarExpr) -> String {
    print_scalar_prec(e, 0)
}

fn print_scalar_prec(e: &ScalarExpr, parent: u8) -> String {
    match e {
        ScalarExpr::Const(Lit::Int(v)) => {
            if *v < 0 {
                format!("({v})")
            } else {
                v.to_string()
            }
        }
        ScalarExpr::Const(Lit::Float(v)) => {
            let mut s = format!("{v}");
            if !s.contains('.') && !s.contains('e') {
                s.push_str(".0");
            }
            s
        }
        ScalarExpr::Affine(a) => {
            if a.as_single_dim().is_some() || a.is_constant() {
                a.to_string()
            } else {
                format!("({a})")
            }
        }
        ScalarExpr::Load { array, indices } => {
            let idx: String = indices.iter().map(|e| format!("[{e}]")).collect();
            format!("{array}{idx}")
        }
        ScalarExpr::Neg(inner) => format!("-{}", print_scalar_prec(inner, 2)),
        ScalarExpr::Bin(op, l, r) => {
            let prec = match op {
                BinOp::Add | BinOp::Sub => 1,
                BinOp::Mul | BinOp::Div => 2,
            };
            let s = format!(
                "{} {} {}",
                print_scalar_prec(l, prec),
                op.symbol(),
                print_scalar_prec(r, prec + 1)
            );
            if prec < parent {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::polyhedral::{build_ast, lift, split, HwAnnotation};

    fn fig8_ir() -> (LoopIR, Function) {
        let f = parse_program(
            r#"
            func f {
              iter t = 0..32; iter i = 0..32;
              array A: f32[32][32] inout;
              compute S3 (t, i) { A[t][i] = A[t][i] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let mut s = split(&s, "i", 8, "i0", "i1").unwrap();
        s.annotations.push(HwAnnotation::Pipeline {
            dim: "i1".into(),
            ii: 1,
        });
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        let ir = lower_ast(&built.ast, &[s], &f).unwrap();
        (ir, f)
    }

    #[test]
    fn fig8_lowering_shape() {
        let (ir, _) = fig8_ir();
        // for t { for i0 { for i1 @pipeline { S3 } } }
        let LoopChild::Loop(t) = &ir.roots[0] else {
            panic!("expected loop");
        };
        assert_eq!(t.iv, "t");
        let LoopChild::Loop(i0) = &t.body[0] else {
            panic!("expected loop");
        };
        assert_eq!(i0.iv, "i0");
        let LoopChild::Loop(i1) = &i0.body[0] else {
            panic!("expected loop");
        };
        assert_eq!(i1.iv, "i1");
        assert_eq!(i1.attrs, vec![PragmaAttr::Pipeline { ii: 1 }]);
        let LoopChild::Stmt(s) = &i1.body[0] else {
            panic!("expected stmt");
        };
        // A[t][8*i0 + i1]
        assert_eq!(s.dest_indices[1].coeff("i0"), 8);
        assert_eq!(s.dest_indices[1].coeff("i1"), 1);
    }

    #[test]
    fn eliminated_annotation_dim_is_an_error() {
        let f = parse_program(
            r#"
            func f {
              iter i = 0..32;
              array A: f32[32] inout;
              compute S (i) { A[i] = A[i] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let mut s = lift(&f.computes[0], 0, 0);
        s.annotations.push(HwAnnotation::Unroll {
            dim: "i".into(),
            factor: 4,
        });
        let s = {
            // split eliminates `i`; the annotation goes stale
            let split = split(&s, "i", 8, "i0", "i1").unwrap();
            split
        };
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        assert!(lower_ast(&built.ast, &[s], &f).is_err());
    }

    #[test]
    fn attach_partition_and_unroll() {
        let (ir, _) = fig8_ir();
        let ir = attach_hw(
            &ir,
            &ScheduleDirective::Partition {
                array: "A".into(),
                factors: vec![1, 4],
                kind: PartitionKind::Cyclic,
            },
        )
        .unwrap();
        let a = ir.array("A").unwrap();
        // factor 1 on dim 1 is a no-op; only dim 2 is partitioned
        assert_eq!(a.partitions.len(), 1);
        assert_eq!(a.partitions[0].dim, 2);
        assert_eq!(a.partitions[0].factor, 4);

        let ir = attach_hw(
            &ir,
            &ScheduleDirective::Unroll {
                compute: "S3".into(),
                dim: "i1".into(),
                factor: 8,
            },
        )
        .unwrap();
        let LoopChild::Loop(t) = &ir.roots[0] else {
            panic!();
        };
        let LoopChild::Loop(i0) = &t.body[0] else {
            panic!();
        };
        let LoopChild::Loop(i1) = &i0.body[0] else {
            panic!();
        };
        assert!(i1
            .attrs
            .contains(&PragmaAttr::Unroll { factor: 8, full: true }));
    }

    #[test]
    fn unroll_beyond_trip_count_is_an_error() {
        let (ir, _) = fig8_ir();
        let err = attach_hw(
            &ir,
            &ScheduleDirective::Unroll {
                compute: "S3".into(),
                dim: "i1".into(),
                factor: 16,
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn printer_is_stable() {
        let (ir, _) = fig8_ir();
        let text = print_loopir(&ir);
        assert_eq!(text, print_loopir(&ir));
        assert!(text.contains("@pipeline(II=1)"));
        assert!(text.contains("for i1 in [0, 7] {"));
        assert!(text.contains("S3: A[t][8*i0 + i1] = A[t][8*i0 + i1] + 1.0;"));
    }
}
