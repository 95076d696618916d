//! Loop transformations as manipulations of integer sets and schedules.
//! Every operation is pure: the input statement is cloned, never mutated.

use std::collections::BTreeMap;

use crate::affine::AffineExpr;
use crate::diag::{CompileError, CompileResult};
use crate::polyhedral::schedule::SchedCoord;
use crate::polyhedral::set::Constraint;
use crate::polyhedral::stmt::PolyStmt;

/// Swap loop levels `a` and `b`. Constraints travel with their names, so
/// only the dimension order and the schedule slots change.
pub fn interchange(s: &PolyStmt, a: &str, b: &str) -> CompileResult<PolyStmt> {
    let mut out = s.clone();
    let pa = s
        .domain
        .dim_index(a)
        .ok_or_else(|| CompileError::UnknownDim(a.to_string()))?;
    let pb = s
        .domain
        .dim_index(b)
        .ok_or_else(|| CompileError::UnknownDim(b.to_string()))?;
    let mut dims = s.domain.dims().to_vec();
    dims.swap(pa, pb);
    out.domain.set_dims(dims);
    out.schedule.swap_loops(a, b);
    Ok(out)
}

/// Split level `dim` by `factor`: `dim = factor*outer + inner` with
/// `0 <= inner <= factor-1`. The original dimension is eliminated by
/// substitution; its bound constraints keep constraining the new pair.
pub fn split(
    s: &PolyStmt,
    dim: &str,
    factor: i64,
    outer: &str,
    inner: &str,
) -> CompileResult<PolyStmt> {
    if factor < 2 {
        return Err(CompileError::BadSplitFactor(factor));
    }
    split_any(s, dim, factor, outer, inner)
}

/// Split allowing factor 1 (used by `tile`, where a unit factor leaves a
/// single-valued inner dimension).
fn split_any(
    s: &PolyStmt,
    dim: &str,
    factor: i64,
    outer: &str,
    inner: &str,
) -> CompileResult<PolyStmt> {
    if factor < 1 {
        return Err(CompileError::BadSplitFactor(factor));
    }
    let pos = s
        .domain
        .dim_index(dim)
        .ok_or_else(|| CompileError::UnknownDim(dim.to_string()))?;
    for fresh in [outer, inner] {
        if s.has_dim(fresh) || outer == inner {
            return Err(CompileError::DimNotFresh(fresh.to_string()));
        }
    }

    let mut out = s.clone();
    let repl = AffineExpr::dim(outer)
        .scale(factor)
        .add(&AffineExpr::dim(inner));
    out.domain.substitute_dim(dim, &repl);
    let mut dims = out.domain.dims().to_vec();
    dims.splice(pos..pos, [outer.to_string(), inner.to_string()]);
    out.domain.set_dims(dims);
    out.domain
        .add_constraint(Constraint::ge0(AffineExpr::dim(inner)));
    out.domain.add_constraint(Constraint::ge0(
        AffineExpr::dim(inner).scale(-1).add_constant(factor - 1),
    ));
    for expr in out.iter_map.values_mut() {
        *expr = expr.substitute(dim, &repl);
    }
    out.schedule.split_loop(dim, outer, inner);
    Ok(out)
}

/// Tile levels `(i, j)` by `(ti, tj)`, producing loop order
/// `(.., i0, j0, .., i1, j1, ..)`: the two block loops take `i`'s slot,
/// the two point loops take `j`'s.
#[allow(clippy::too_many_arguments)]
pub fn tile(
    s: &PolyStmt,
    i: &str,
    j: &str,
    ti: i64,
    tj: i64,
    i0: &str,
    j0: &str,
    i1: &str,
    j1: &str,
) -> CompileResult<PolyStmt> {
    let pi = s
        .domain
        .dim_index(i)
        .ok_or_else(|| CompileError::UnknownDim(i.to_string()))?;
    let pj = s
        .domain
        .dim_index(j)
        .ok_or_else(|| CompileError::UnknownDim(j.to_string()))?;
    if pi >= pj {
        return Err(CompileError::UnknownDim(format!(
            "tile expects `{i}` outer than `{j}`"
        )));
    }
    let out = split_any(s, i, ti, i0, i1)?;
    let out = split_any(&out, j, tj, j0, j1)?;

    // (.., i0, i1, .., j0, j1, ..) -> (.., i0, j0, .., i1, j1, ..)
    let mut order = out.domain.dims().to_vec();
    let keep: Vec<String> = order
        .iter()
        .filter(|d| *d != i1 && *d != j0)
        .cloned()
        .collect();
    order = keep;
    let at_i0 = order.iter().position(|d| d == i0).unwrap();
    order.insert(at_i0 + 1, j0.to_string());
    let at_j1 = order.iter().position(|d| d == j1).unwrap();
    order.insert(at_j1, i1.to_string());
    set_loop_order(out, &order)
}

/// Reorder loop levels to `order` (a permutation of the current dims).
pub fn set_loop_order(s: PolyStmt, order: &[String]) -> CompileResult<PolyStmt> {
    let mut out = s;
    {
        let dims = out.domain.dims();
        if order.len() != dims.len()
            || !order.iter().all(|d| dims.contains(d))
        {
            return Err(CompileError::UnknownDim(format!(
                "invalid loop order [{}]",
                order.join(", ")
            )));
        }
    }
    out.domain.set_dims(order.to_vec());
    let mut names = order.iter().cloned();
    for coord in &mut out.schedule.coords {
        if let SchedCoord::Loop(n) = coord {
            *n = names.next().expect("loop count matches dim count");
        }
    }
    Ok(out)
}

/// Skew levels `(i, j)` (with `i` outer) into `(ni, nj)` where `ni = i`
/// and `nj = t1*i + t2*j`. Only `t2 == 1` is supported: other inner
/// factors leave lattice holes that the loop IR cannot scan with unit
/// strides.
#[allow(clippy::too_many_arguments)]
pub fn skew(
    s: &PolyStmt,
    i: &str,
    j: &str,
    t1: i64,
    t2: i64,
    ni: &str,
    nj: &str,
) -> CompileResult<PolyStmt> {
    if t2 != 1 {
        return Err(CompileError::UnsupportedSkew(t2));
    }
    let pi = s
        .domain
        .dim_index(i)
        .ok_or_else(|| CompileError::UnknownDim(i.to_string()))?;
    let pj = s
        .domain
        .dim_index(j)
        .ok_or_else(|| CompileError::UnknownDim(j.to_string()))?;
    if pi >= pj {
        return Err(CompileError::UnknownDim(format!(
            "skew expects `{i}` outer than `{j}`"
        )));
    }
    for fresh in [ni, nj] {
        if s.has_dim(fresh) || ni == nj {
            return Err(CompileError::DimNotFresh(fresh.to_string()));
        }
    }

    // i = ni, j = nj - t1*ni
    let mut map = BTreeMap::new();
    map.insert(i.to_string(), AffineExpr::dim(ni));
    map.insert(
        j.to_string(),
        AffineExpr::dim(nj).sub(&AffineExpr::dim(ni).scale(t1)),
    );
    let mut out = rename_by_map(s, &map);
    let mut dims = s.domain.dims().to_vec();
    dims[pi] = ni.to_string();
    dims[pj] = nj.to_string();
    out.domain.set_dims(dims);
    out.schedule.rename_loop(i, ni);
    out.schedule.rename_loop(j, nj);
    Ok(out)
}

/// Apply a simultaneous substitution of old dims to expressions over new
/// dims in constraints and the iterator map. Dimension lists and the
/// schedule are left for the caller to fix up.
fn rename_by_map(s: &PolyStmt, map: &BTreeMap<String, AffineExpr>) -> PolyStmt {
    let mut out = s.clone();
    let mut constraints = Vec::new();
    for c in out.domain.constraints() {
        let mut nc = c.clone();
        nc.expr = nc.expr.substitute_all(map);
        constraints.push(nc);
    }
    let dims = out.domain.dims().to_vec();
    let mut fresh = crate::polyhedral::set::IntegerSet::default();
    fresh.set_dims(dims);
    for c in constraints {
        fresh.add_constraint(c);
    }
    out.domain = fresh;
    for expr in out.iter_map.values_mut() {
        *expr = expr.substitute_all(map);
    }
    out
}

/// Rename the loop dimensions of `s` positionally to `new_names`,
/// rewriting constraints, the iterator map, and the schedule. Used by
/// fusion to align two statements on one set of loop names.
pub fn rename_dims_positional(s: &PolyStmt, new_names: &[String]) -> CompileResult<PolyStmt> {
    let old = s.domain.dims().to_vec();
    if old.len() != new_names.len() {
        return Err(CompileError::NonComparableSchedules(format!(
            "cannot rename {} dims to {} names",
            old.len(),
            new_names.len()
        )));
    }
    let map: BTreeMap<String, AffineExpr> = old
        .iter()
        .zip(new_names)
        .filter(|(o, n)| o != n)
        .map(|(o, n)| (o.clone(), AffineExpr::dim(n.clone())))
        .collect();
    let mut out = rename_by_map(s, &map);
    out.domain.set_dims(new_names.to_vec());
    let mut names = new_names.iter().cloned();
    for coord in &mut out.schedule.coords {
        if let SchedCoord::Loop(n) = coord {
            *n = names.next().expect("loop count matches dim count");
        }
    }
    for ann in &mut out.annotations {
        if let Some(pos) = old.iter().position(|o| o == ann.dim()) {
            match ann {
                crate::polyhedral::stmt::HwAnnotation::Pipeline { dim, .. }
                | crate::polyhedral::stmt::HwAnnotation::Unroll { dim, .. } => {
                    *dim = new_names[pos].clone();
                }
            }
        }
    }
    Ok(out)
}

/// Order `s1` after `s2` sharing all loops outer than and including
/// `level` (a loop dim of `s2`, or `None` for no shared loops). The
/// shared prefix of `s2`'s schedule is copied into `s1`, and the static
/// coordinate immediately inside the level becomes `k+1` where `s2`
/// keeps `k`.
pub fn order_after(
    s1: &PolyStmt,
    s2: &PolyStmt,
    level: Option<&str>,
) -> CompileResult<(PolyStmt, PolyStmt)> {
    let mut a = s1.clone();
    let b = s2.clone();
    match level {
        None => {
            let base = match b.schedule.coords[0] {
                SchedCoord::Static(v) => v,
                _ => 0,
            };
            a.schedule.coords[0] = SchedCoord::Static(base + 1);
        }
        Some(level) => {
            let b_dims = b.schedule.loop_dims();
            let a_dims = a.schedule.loop_dims();
            let lvl = b_dims
                .iter()
                .position(|d| *d == level)
                .ok_or_else(|| CompileError::UnknownDim(level.to_string()))?;
            if a_dims.len() <= lvl || a_dims[..=lvl] != b_dims[..=lvl] {
                return Err(CompileError::PrefixMismatch(
                    a.name.clone(),
                    b.name.clone(),
                    level.to_string(),
                ));
            }
            // copy statics of the shared prefix: indices 0, 2, .., 2*lvl
            for l in 0..=lvl {
                a.schedule.coords[2 * l] = b.schedule.coords[2 * l].clone();
            }
            let inner = 2 * lvl + 2;
            let base = match b.schedule.coords[inner] {
                SchedCoord::Static(v) => v,
                _ => 0,
            };
            a.schedule.coords[inner] = SchedCoord::Static(base + 1);
        }
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::polyhedral::stmt::lift;

    fn stmt(src: &str) -> PolyStmt {
        let f = parse_program(src).unwrap();
        lift(&f.computes[0], 0, 0)
    }

    fn fig8() -> PolyStmt {
        stmt(
            r#"
            func f {
              iter t = 0..32; iter i = 0..32;
              array A: f32[32][32] inout;
              compute S (t, i) { A[t][i] = A[t][i] + 1.0; }
            }
            "#,
        )
    }

    fn square(n: i64) -> PolyStmt {
        stmt(&format!(
            r#"
            func f {{
              iter i = 0..{n}; iter j = 0..{n};
              array A: f32[{n}][{n}] inout;
              compute S (i, j) {{ A[i][j] = A[i][j] + 1.0; }}
            }}
            "#
        ))
    }

    #[test]
    fn interchange_swaps_schedule() {
        let s = square(8);
        let t = interchange(&s, "i", "j").unwrap();
        assert_eq!(t.schedule.to_string(), "[0, j, 0, i, 0]");
        assert_eq!(t.domain.dims(), &["j".to_string(), "i".to_string()]);
        // involution
        let back = interchange(&t, "i", "j").unwrap();
        assert_eq!(back.schedule, s.schedule);
        assert_eq!(back.domain.dims(), s.domain.dims());
    }

    #[test]
    fn split_fig8_factor_8() {
        let s = fig8();
        let t = split(&s, "i", 8, "i0", "i1").unwrap();
        assert_eq!(
            t.domain.dims(),
            &["t".to_string(), "i0".to_string(), "i1".to_string()]
        );
        // {S(t,i0,i1): 0<=t<=31, 0<=i0<=3, 0<=i1<=7}
        assert_eq!(t.domain.point_count(), 1024);
        assert!(t.domain.contains(&[0, 3, 7]));
        assert!(!t.domain.contains(&[0, 4, 0]));
        assert!(!t.domain.contains(&[0, 3, 8]));
        assert_eq!(t.schedule.to_string(), "[0, t, 0, i0, 0, i1, 0]");
        // substitution recorded for the body
        let i_expr = &t.iter_map["i"];
        assert_eq!(i_expr.coeff("i0"), 8);
        assert_eq!(i_expr.coeff("i1"), 1);
    }

    #[test]
    fn split_non_divisible_keeps_points() {
        let s = stmt(
            r#"
            func f {
              iter i = 0..10;
              array A: f32[10] inout;
              compute S (i) { A[i] = A[i] + 1.0; }
            }
            "#,
        );
        let t = split(&s, "i", 4, "i0", "i1").unwrap();
        let pts = t.domain.enumerate();
        assert_eq!(pts.len(), 10);
        // mapped back through the substitution, points cover 0..10
        let mut mapped: Vec<i64> = pts.iter().map(|p| 4 * p[0] + p[1]).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, (0..10).collect::<Vec<_>>());
        assert!(t.domain.contains(&[2, 1]));
        assert!(!t.domain.contains(&[2, 2])); // 4*2+2 = 10 out of range
    }

    #[test]
    fn split_by_extent_pins_outer() {
        let s = stmt(
            r#"
            func f {
              iter i = 0..8;
              array A: f32[8] inout;
              compute S (i) { A[i] = A[i] + 1.0; }
            }
            "#,
        );
        let t = split(&s, "i", 8, "i0", "i1").unwrap();
        let pts = t.domain.enumerate();
        assert!(pts.iter().all(|p| p[0] == 0));
        assert_eq!(pts.len(), 8);
    }

    #[test]
    fn tile_gemm_order_and_points() {
        let f = parse_program(
            r#"
            func gemm {
              iter i = 0..32; iter j = 0..32; iter k = 0..32;
              array A: f32[32][32] in; array B: f32[32][32] in; array C: f32[32][32] out;
              compute S (i, j, k) { C[i][j] += A[i][k] * B[k][j]; }
            }
            "#,
        )
        .unwrap();
        let s = lift(&f.computes[0], 0, 0);
        let t = tile(&s, "i", "j", 4, 4, "i0", "j0", "i1", "j1").unwrap();
        assert_eq!(
            t.domain.dims(),
            &[
                "i0".to_string(),
                "j0".to_string(),
                "i1".to_string(),
                "j1".to_string(),
                "k".to_string()
            ]
        );
        assert_eq!(t.domain.point_count(), 32 * 32 * 32);
        assert!(t.domain.contains(&[7, 7, 3, 3, 31]));
        assert!(!t.domain.contains(&[8, 0, 0, 0, 0]));
    }

    #[test]
    fn tile_eight_by_four() {
        let s = square(8);
        let t = tile(&s, "i", "j", 4, 4, "i0", "j0", "i1", "j1").unwrap();
        // 4 tiles of 16 points
        let pts = t.domain.enumerate();
        assert_eq!(pts.len(), 64);
        let tiles: std::collections::BTreeSet<(i64, i64)> =
            pts.iter().map(|p| (p[0], p[1])).collect();
        assert_eq!(tiles.len(), 4);
    }

    #[test]
    fn tile_unit_factors_keep_points() {
        let s = square(4);
        let t = tile(&s, "i", "j", 1, 1, "i0", "j0", "i1", "j1").unwrap();
        let pts = t.domain.enumerate();
        assert_eq!(pts.len(), 16);
        assert!(pts.iter().all(|p| p[2] == 0 && p[3] == 0));
    }

    #[test]
    fn skew_wavefront() {
        let s = square(3);
        let t = skew(&s, "i", "j", 1, 1, "ip", "jp").unwrap();
        // {(ip, jp): 0 <= ip <= 2, ip <= jp <= ip+2}
        let pts = t.domain.enumerate();
        assert_eq!(pts.len(), 9);
        for p in &pts {
            assert!(p[1] >= p[0] && p[1] <= p[0] + 2);
        }
        // distance (1,-1) becomes (1,0) under this skew
        let (t1, t2) = (1i64, 1i64);
        let (di, dj) = (1i64, -1i64);
        let (ndi, ndj) = (di, t1 * di + t2 * dj);
        assert_eq!((ndi, ndj), (1, 0));
    }

    #[test]
    fn skew_requires_unit_inner_factor() {
        let s = square(3);
        assert!(matches!(
            skew(&s, "i", "j", 1, 2, "ip", "jp"),
            Err(CompileError::UnsupportedSkew(2))
        ));
    }

    #[test]
    fn order_after_shared_level() {
        let src = r#"
            func f {
              iter i = 0..8;
              array A: f32[8] inout; array B: f32[8] inout;
              compute S1 (i) { A[i] = A[i] + 1.0; }
              compute S2 (i) { B[i] = B[i] + 1.0; }
            }
        "#;
        let f = parse_program(src).unwrap();
        let s1 = lift(&f.computes[0], 0, 0);
        let s2 = lift(&f.computes[1], 1, 1);
        // S2 after S1 at level i
        let (s2b, s1b) = order_after(&s2, &s1, Some("i")).unwrap();
        assert_eq!(s1b.schedule.to_string(), "[0, i, 0]");
        assert_eq!(s2b.schedule.to_string(), "[0, i, 1]");
    }

    #[test]
    fn order_after_root() {
        let src = r#"
            func f {
              iter i = 0..8; iter j = 0..4;
              array A: f32[8] inout; array B: f32[4] inout;
              compute S1 (i) { A[i] = A[i] + 1.0; }
              compute S2 (j) { B[j] = B[j] + 1.0; }
            }
        "#;
        let f = parse_program(src).unwrap();
        let s1 = lift(&f.computes[0], 0, 0);
        let s2 = lift(&f.computes[1], 1, 0);
        let (s2b, s1b) = order_after(&s2, &s1, None).unwrap();
        assert_eq!(s1b.schedule.to_string(), "[0, i, 0]");
        assert_eq!(s2b.schedule.to_string(), "[1, j, 0]");
    }

    #[test]
    fn order_after_prefix_mismatch() {
        let src = r#"
            func f {
              iter i = 0..8; iter j = 0..4;
              array A: f32[8] inout; array B: f32[4] inout;
              compute S1 (i) { A[i] = A[i] + 1.0; }
              compute S2 (j) { B[j] = B[j] + 1.0; }
            }
        "#;
        let f = parse_program(src).unwrap();
        let s1 = lift(&f.computes[0], 0, 0);
        let s2 = lift(&f.computes[1], 1, 1);
        assert!(order_after(&s2, &s1, Some("i")).is_err());
    }
}
