//! Polyhedral AST generation from (domain, schedule) pairs.
//!
//! The builder recurses over schedule positions. Static positions group
//! statements by value and emit blocks in ascending order; loop positions
//! emit for-nodes whose bounds come from Fourier-Motzkin projection of
//! each statement's domain onto the loop prefix. Bound lists are folded
//! with interval arithmetic over the enclosing loop boxes, so redundant
//! terms disappear and residual guards stay as max/min bounds.

use std::collections::BTreeMap;

use crate::affine::{BoundTerm, LoopBound};
use crate::diag::{CompileError, CompileResult, Diagnostic};
use crate::polyhedral::fm;
use crate::polyhedral::schedule::SchedCoord;
use crate::polyhedral::stmt::{HwAnnotation, PolyStmt};

/// Generated AST. For- and if-nodes own a single child; sequences are
/// explicit block-nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum PolyAst {
    Block(Vec<PolyAst>),
    For {
        iv: String,
        lower: LoopBound,
        upper: LoopBound,
        annotations: Vec<HwAnnotation>,
        body: Box<PolyAst>,
    },
    If {
        /// Conjunction of `expr >= 0` guards.
        conds: Vec<crate::polyhedral::set::Constraint>,
        body: Box<PolyAst>,
    },
    /// Reference into the statement list passed to `build_ast`; the
    /// statement's `iter_map` is the iterator substitution.
    User { stmt: usize },
}

pub struct AstBuild {
    pub ast: PolyAst,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Clone)]
struct Item {
    idx: usize,
    coords: Vec<SchedCoord>,
}

type Interval = (i64, i64);

/// Build the AST for a group of statements with pairwise comparable
/// schedules.
pub fn build_ast(stmts: &[PolyStmt]) -> CompileResult<AstBuild> {
    for s in stmts {
        let sched_dims = s.schedule.loop_dims();
        let dom_dims: Vec<&str> = s.domain.dims().iter().map(|d| d.as_str()).collect();
        if sched_dims != dom_dims {
            return Err(CompileError::NonComparableSchedules(format!(
                "statement `{}` schedule dims do not match its domain",
                s.name
            )));
        }
    }
    let max_len = stmts
        .iter()
        .map(|s| s.schedule.coords.len())
        .max()
        .unwrap_or(1);
    let items: Vec<Item> = stmts
        .iter()
        .enumerate()
        .map(|(idx, s)| {
            let mut coords = s.schedule.coords.clone();
            while coords.len() < max_len {
                coords.push(SchedCoord::Static(0));
            }
            Item { idx, coords }
        })
        .collect();

    let mut warnings = Vec::new();
    let ctx = BTreeMap::new();
    let children = build_rec(stmts, &items, 0, max_len, &ctx, &mut warnings)?;
    let ast = match children.len() {
        1 => children.into_iter().next().unwrap(),
        _ => PolyAst::Block(children),
    };
    Ok(AstBuild { ast, warnings })
}

fn build_rec(
    stmts: &[PolyStmt],
    items: &[Item],
    pos: usize,
    len: usize,
    ctx: &BTreeMap<String, Interval>,
    warnings: &mut Vec<Diagnostic>,
) -> CompileResult<Vec<PolyAst>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    if pos == len {
        if items.len() > 1 {
            let names: Vec<&str> = items.iter().map(|i| stmts[i.idx].name.as_str()).collect();
            return Err(CompileError::NonComparableSchedules(format!(
                "statements [{}] share a full schedule tuple",
                names.join(", ")
            )));
        }
        return Ok(vec![PolyAst::User {
            stmt: items[0].idx,
        }]);
    }

    if pos % 2 == 0 {
        // static position: group by value, ascending
        let mut groups: BTreeMap<i64, Vec<Item>> = BTreeMap::new();
        for item in items {
            match item.coords[pos] {
                SchedCoord::Static(v) => groups.entry(v).or_default().push(item.clone()),
                SchedCoord::Loop(_) => {
                    return Err(CompileError::NonComparableSchedules(format!(
                        "loop coordinate at static position {pos}"
                    )))
                }
            }
        }
        let mut out = Vec::new();
        for group in groups.values() {
            out.extend(build_rec(stmts, group, pos + 1, len, ctx, warnings)?);
        }
        Ok(out)
    } else {
        // loop position: statements must agree on the dimension
        let mut exhausted = false;
        let mut names: Vec<&str> = Vec::new();
        for item in items {
            match &item.coords[pos] {
                SchedCoord::Loop(n) => {
                    if !names.contains(&n.as_str()) {
                        names.push(n);
                    }
                }
                SchedCoord::Static(_) => exhausted = true,
            }
        }
        if exhausted && !names.is_empty() {
            return Err(CompileError::NonComparableSchedules(
                "statement nesting depths diverge under a shared prefix".into(),
            ));
        }
        if exhausted {
            // every statement is out of loops; remaining coords are statics
            return build_rec(stmts, items, pos + 1, len, ctx, warnings);
        }
        if names.len() > 1 {
            warnings.push(Diagnostic::warning(format!(
                "splitting statements over distinct loop dims [{}]",
                names.join(", ")
            )));
            let mut out = Vec::new();
            for name in names {
                let sub: Vec<Item> = items
                    .iter()
                    .filter(|i| matches!(&i.coords[pos], SchedCoord::Loop(n) if n == name))
                    .cloned()
                    .collect();
                out.extend(build_rec(stmts, &sub, pos, len, ctx, warnings)?);
            }
            return Ok(out);
        }

        let name = names[0].to_string();
        let level = (pos - 1) / 2;

        // per-statement folded bounds at this level
        let mut with_bounds: Vec<(Item, LoopBound, LoopBound)> = Vec::new();
        for item in items {
            let s = &stmts[item.idx];
            match fm::project_bounds(&s.domain, level + 1) {
                None => warnings.push(Diagnostic::warning(format!(
                    "statement `{}` has an empty domain; dropped",
                    s.name
                ))),
                Some(b) => {
                    if b.lowers.is_empty() || b.uppers.is_empty() {
                        return Err(CompileError::NonComparableSchedules(format!(
                            "dimension `{name}` of `{}` is unbounded",
                            s.name
                        )));
                    }
                    let lower = fold_terms(b.lowers, ctx, true);
                    let upper = fold_terms(b.uppers, ctx, false);
                    with_bounds.push((item.clone(), lower, upper));
                }
            }
        }
        if with_bounds.is_empty() {
            return Ok(Vec::new());
        }

        // subgroups of identical bounds, in statement order
        let mut subgroups: Vec<(LoopBound, LoopBound, Vec<Item>)> = Vec::new();
        for (item, lo, hi) in with_bounds {
            match subgroups
                .iter_mut()
                .find(|(glo, ghi, _)| *glo == lo && *ghi == hi)
            {
                Some((_, _, members)) => members.push(item),
                None => subgroups.push((lo, hi, vec![item])),
            }
        }
        if subgroups.len() > 1 {
            warnings.push(Diagnostic::warning(format!(
                "splitting statements sharing loop `{name}` with different bounds",
            )));
        }

        let mut out = Vec::new();
        for (lower, upper, members) in subgroups {
            // constant-empty loop: emit nothing
            if let (Some(lo), Some(hi)) = (lower.as_constant_lower(), upper.as_constant_upper()) {
                if lo > hi {
                    warnings.push(Diagnostic::warning(format!(
                        "loop `{name}` is empty; dropped"
                    )));
                    continue;
                }
            }
            let interval = bound_interval(&lower, &upper, ctx);
            let mut inner_ctx = ctx.clone();
            if let Some(iv) = interval {
                inner_ctx.insert(name.clone(), iv);
            }
            let children = build_rec(stmts, &members, pos + 1, len, &inner_ctx, warnings)?;
            if children.is_empty() {
                continue;
            }
            let body = match children.len() {
                1 => children.into_iter().next().unwrap(),
                _ => PolyAst::Block(children),
            };
            let mut annotations = Vec::new();
            for item in &members {
                for ann in &stmts[item.idx].annotations {
                    if ann.dim() == name && !annotations.contains(ann) {
                        annotations.push(ann.clone());
                    }
                }
            }
            out.push(PolyAst::For {
                iv: name.clone(),
                lower,
                upper,
                annotations,
                body: Box::new(body),
            });
        }
        Ok(out)
    }
}

/// Drop bound terms implied by another term over the enclosing box and
/// order the survivors canonically.
fn fold_terms(terms: Vec<BoundTerm>, ctx: &BTreeMap<String, Interval>, is_lower: bool) -> LoopBound {
    let mut kept: Vec<BoundTerm> = Vec::new();
    'next: for t in &terms {
        for u in &terms {
            if std::ptr::eq(t, u) || t == u {
                continue;
            }
            if dominates(u, t, ctx, is_lower) && !(dominates(t, u, ctx, is_lower) && earlier(t, u, &terms)) {
                continue 'next;
            }
        }
        if !kept.contains(t) {
            kept.push(t.clone());
        }
    }
    if kept.is_empty() {
        kept = terms;
    }
    kept.sort_by_key(|t| (t.den, t.expr.to_string()));
    LoopBound { terms: kept }
}

fn earlier(a: &BoundTerm, b: &BoundTerm, terms: &[BoundTerm]) -> bool {
    let pa = terms.iter().position(|t| t == a);
    let pb = terms.iter().position(|t| t == b);
    pa < pb
}

/// `a` dominates `b` when `a` is at least as tight everywhere over the
/// enclosing box: for lower bounds `a >= b`, for upper bounds `a <= b`.
/// Conservative: only plain (den == 1) terms are compared.
fn dominates(a: &BoundTerm, b: &BoundTerm, ctx: &BTreeMap<String, Interval>, is_lower: bool) -> bool {
    if a.den != 1 || b.den != 1 {
        return false;
    }
    let diff = if is_lower {
        a.expr.sub(&b.expr)
    } else {
        b.expr.sub(&a.expr)
    };
    match expr_interval(&diff, ctx) {
        Some((lo, _)) => lo >= 0,
        None => false,
    }
}

/// Interval of an affine expression over known dimension intervals.
fn expr_interval(
    expr: &crate::affine::AffineExpr,
    ctx: &BTreeMap<String, Interval>,
) -> Option<Interval> {
    let mut lo = expr.constant_term();
    let mut hi = expr.constant_term();
    for (name, c) in expr.dims() {
        let &(dlo, dhi) = ctx.get(name)?;
        if c >= 0 {
            lo = lo.checked_add(c.checked_mul(dlo)?)?;
            hi = hi.checked_add(c.checked_mul(dhi)?)?;
        } else {
            lo = lo.checked_add(c.checked_mul(dhi)?)?;
            hi = hi.checked_add(c.checked_mul(dlo)?)?;
        }
    }
    Some((lo, hi))
}

/// Enclosure of the values a loop takes, given its bounds and the outer box.
fn bound_interval(
    lower: &LoopBound,
    upper: &LoopBound,
    ctx: &BTreeMap<String, Interval>,
) -> Option<Interval> {
    let lo = lower
        .terms
        .iter()
        .map(|t| {
            expr_interval(&t.expr, ctx).map(|(l, _)| crate::affine::ceil_div(l, t.den))
        })
        .collect::<Option<Vec<_>>>()?
        .into_iter()
        .max()?;
    let hi = upper
        .terms
        .iter()
        .map(|t| {
            expr_interval(&t.expr, ctx).map(|(_, h)| crate::affine::floor_div(h, t.den))
        })
        .collect::<Option<Vec<_>>>()?
        .into_iter()
        .min()?;
    Some((lo, hi))
}

/// Interval enclosure of a loop's values given the enclosing box; shared
/// with the performance model for worst-case trip counts.
pub fn bound_interval_pub(
    lower: &LoopBound,
    upper: &LoopBound,
    ctx: &BTreeMap<String, Interval>,
) -> Option<Interval> {
    bound_interval(lower, upper, ctx)
}

/// Constant per-level box of a domain, outermost first, via projection
/// plus interval folding. `None` when a level has no constant enclosure.
pub fn normalized_box(set: &crate::polyhedral::set::IntegerSet) -> Option<Vec<Interval>> {
    let bounds = fm::level_bounds(set)?;
    let mut ctx: BTreeMap<String, Interval> = BTreeMap::new();
    let mut out = Vec::new();
    for (level, b) in bounds.iter().enumerate() {
        if b.lowers.is_empty() || b.uppers.is_empty() {
            return None;
        }
        let lower = fold_terms(b.lowers.clone(), &ctx, true);
        let upper = fold_terms(b.uppers.clone(), &ctx, false);
        let iv = bound_interval(&lower, &upper, &ctx)?;
        ctx.insert(set.dims()[level].clone(), iv);
        out.push(iv);
    }
    Some(out)
}

/// Execute the AST symbolically: every user-node instance in execution
/// order, with the loop environment it runs under. Backbone of the
/// schedule-totality and point-coverage checks.
pub fn enumerate_instances(ast: &PolyAst) -> Vec<(usize, BTreeMap<String, i64>)> {
    let mut out = Vec::new();
    let mut env = BTreeMap::new();
    walk(ast, &mut env, &mut out);
    out
}

fn walk(
    ast: &PolyAst,
    env: &mut BTreeMap<String, i64>,
    out: &mut Vec<(usize, BTreeMap<String, i64>)>,
) {
    match ast {
        PolyAst::Block(children) => {
            for c in children {
                walk(c, env, out);
            }
        }
        PolyAst::For {
            iv, lower, upper, body, ..
        } => {
            let lo = lower.eval_lower(env);
            let hi = upper.eval_upper(env);
            for v in lo..=hi {
                env.insert(iv.clone(), v);
                walk(body, env, out);
            }
            env.remove(iv);
        }
        PolyAst::If { conds, body } => {
            if conds.iter().all(|c| c.holds(env)) {
                walk(body, env, out);
            }
        }
        PolyAst::User { stmt } => out.push((*stmt, env.clone())),
    }
}

/// Render the AST as indented text (the `--emit ast` format).
pub fn print_ast(ast: &PolyAst, stmts: &[PolyStmt]) -> String {
    let mut out = String::new();
    print_rec(ast, stmts, 0, &mut out);
    out
}

fn print_rec(ast: &PolyAst, stmts: &[PolyStmt], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match ast {
        PolyAst::Block(children) => {
            for c in children {
                print_rec(c, stmts, indent, out);
            }
        }
        PolyAst::For {
            iv,
            lower,
            upper,
            annotations,
            body,
        } => {
            for ann in annotations {
                match ann {
                    HwAnnotation::Pipeline { ii, .. } => {
                        out.push_str(&format!("{pad}@pipeline(II={ii})\n"))
                    }
                    HwAnnotation::Unroll { factor, .. } => {
                        out.push_str(&format!("{pad}@unroll(factor={factor})\n"))
                    }
                }
            }
            let lo: Vec<String> = lower.terms.iter().map(|t| t.to_string()).collect();
            let hi: Vec<String> = upper.terms.iter().map(|t| t.to_string()).collect();
            let lo = if lo.len() == 1 {
                lo[0].clone()
            } else {
                format!("max({})", lo.join(", "))
            };
            let hi = if hi.len() == 1 {
                hi[0].clone()
            } else {
                format!("min({})", hi.join(", "))
            };
            out.push_str(&format!("{pad}for {iv} in [{lo}, {hi}] {{\n"));
            print_rec(body, stmts, indent + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
        PolyAst::If { conds, body } => {
            let cs: Vec<String> = conds.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{pad}if {} {{\n", cs.join(" and ")));
            print_rec(body, stmts, indent + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        }
        PolyAst::User { stmt } => {
            let s = &stmts[*stmt];
            let args: Vec<String> = s
                .orig_iters
                .iter()
                .map(|n| s.iter_map[n].to_string())
                .collect();
            out.push_str(&format!("{pad}{}({})\n", s.name, args.join(", ")));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::polyhedral::stmt::lift;
    use crate::polyhedral::transform;

    fn gemm_stmt() -> PolyStmt {
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
        lift(&f.computes[0], 0, 0)
    }

    #[test]
    fn single_statement_nest() {
        let s = gemm_stmt();
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        assert!(built.warnings.is_empty());
        // three nested for-nodes then a user-node
        let mut ast = &built.ast;
        for expected in ["i", "j", "k"] {
            match ast {
                PolyAst::For { iv, body, .. } => {
                    assert_eq!(iv, expected);
                    ast = body;
                }
                other => panic!("expected for node, got {other:?}"),
            }
        }
        assert!(matches!(ast, PolyAst::User { stmt: 0 }));
        assert_eq!(enumerate_instances(&built.ast).len(), 512);
    }

    #[test]
    fn instances_cover_domain_in_schedule_order() {
        let s = gemm_stmt();
        let tiled = transform::tile(&s, "i", "j", 4, 4, "i0", "j0", "i1", "j1").unwrap();
        let built = build_ast(std::slice::from_ref(&tiled)).unwrap();
        let instances = enumerate_instances(&built.ast);
        assert_eq!(instances.len(), 512);
        // multiset of instances == domain points, and execution order
        // equals lexicographic order of schedule tuples
        let mut seen = std::collections::BTreeSet::new();
        let mut last: Option<Vec<i64>> = None;
        for (idx, env) in &instances {
            assert_eq!(*idx, 0);
            let point: Vec<i64> = tiled
                .domain
                .dims()
                .iter()
                .map(|d| env[d])
                .collect();
            assert!(tiled.domain.contains(&point), "instance outside domain");
            assert!(seen.insert(point.clone()), "duplicate instance");
            let tuple = tiled.schedule.tuple(env);
            if let Some(prev) = &last {
                assert!(prev < &tuple, "schedule order violated");
            }
            last = Some(tuple);
        }
        assert_eq!(seen.len(), tiled.domain.point_count());
    }

    #[test]
    fn two_root_nests_become_a_block() {
        let f = parse_program(
            r#"
            func f {
              iter i = 0..4; iter j = 0..4;
              array A: f32[4] inout; array B: f32[4][4] inout;
              compute S1 (i) { A[i] = A[i] + 1.0; }
              compute S2 (i, j) { B[i][j] = B[i][j] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s1 = lift(&f.computes[0], 0, 0);
        let s2 = lift(&f.computes[1], 1, 1);
        let built = build_ast(&[s1, s2]).unwrap();
        match &built.ast {
            PolyAst::Block(children) => assert_eq!(children.len(), 2),
            other => panic!("expected block, got {other:?}"),
        }
        assert_eq!(enumerate_instances(&built.ast).len(), 4 + 16);
    }

    #[test]
    fn shared_loop_orders_statements_by_static() {
        let f = parse_program(
            r#"
            func f {
              iter i = 0..4;
              array A: f32[4] inout; array B: f32[4] inout;
              compute S1 (i) { A[i] = A[i] + 1.0; }
              compute S2 (i) { B[i] = B[i] + 2.0; }
            }
            "#,
        )
        .unwrap();
        let s1 = lift(&f.computes[0], 0, 0);
        let s2 = lift(&f.computes[1], 1, 1);
        let (s2o, s1o) = transform::order_after(&s2, &s1, Some("i")).unwrap();
        let built = build_ast(&[s1o, s2o]).unwrap();
        // one loop, block of two users inside
        match &built.ast {
            PolyAst::For { iv, body, .. } => {
                assert_eq!(iv, "i");
                match body.as_ref() {
                    PolyAst::Block(kids) => {
                        assert!(matches!(kids[0], PolyAst::User { stmt: 0 }));
                        assert!(matches!(kids[1], PolyAst::User { stmt: 1 }));
                    }
                    other => panic!("expected block, got {other:?}"),
                }
            }
            other => panic!("expected for, got {other:?}"),
        }
        let inst = enumerate_instances(&built.ast);
        // interleaved: S1(0), S2(0), S1(1), S2(1), ..
        assert_eq!(inst.len(), 8);
        assert_eq!(inst[0].0, 0);
        assert_eq!(inst[1].0, 1);
        assert_eq!(inst[0].1["i"], 0);
        assert_eq!(inst[1].1["i"], 0);
    }

    #[test]
    fn nondivisible_split_gets_min_bound() {
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
        let t = transform::split(&s, "i", 4, "i0", "i1").unwrap();
        let built = build_ast(&[t]).unwrap();
        match &built.ast {
            PolyAst::For { iv, body, .. } => {
                assert_eq!(iv, "i0");
                match body.as_ref() {
                    PolyAst::For { iv, upper, .. } => {
                        assert_eq!(iv, "i1");
                        assert_eq!(upper.terms.len(), 2, "expected min(3, 9-4*i0)");
                    }
                    other => panic!("expected inner for, got {other:?}"),
                }
            }
            other => panic!("expected for, got {other:?}"),
        }
        assert_eq!(enumerate_instances(&built.ast).len(), 10);
    }

    #[test]
    fn normalized_box_of_fig8_split() {
        let f = parse_program(
            r#"
            func f {
              iter t = 0..32; iter i = 0..32;
              array A: f32[32][32] inout;
              compute S (t, i) { A[t][i] = A[t][i] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let t = transform::split(&s, "i", 8, "i0", "i1").unwrap();
        let bx = normalized_box(&t.domain).unwrap();
        assert_eq!(bx, vec![(0, 31), (0, 3), (0, 7)]);
    }
}
