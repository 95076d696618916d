//! Semantic checks over a parsed [`Function`]. Collects diagnostics and
//! never aborts, so programmatically built functions get the same
//! scrutiny as parsed ones.

use std::collections::BTreeMap;

use crate::diag::Diagnostic;
use crate::frontend::ast::*;

pub fn validate(f: &Function) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    for (idx, p) in f.placeholders.iter().enumerate() {
        if f.placeholders[..idx].iter().any(|q| q.name == p.name) {
            diags.push(Diagnostic::error(format!("duplicate array `{}`", p.name)));
        }
        if p.shape.is_empty() {
            diags.push(Diagnostic::error(format!(
                "array `{}` needs at least one dimension",
                p.name
            )));
        }
        for &e in &p.shape {
            if e < 1 {
                diags.push(Diagnostic::error(format!(
                    "array `{}` has non-positive extent {e}",
                    p.name
                )));
            }
        }
    }

    for (idx, c) in f.computes.iter().enumerate() {
        if f.computes[..idx].iter().any(|d| d.name == c.name) {
            diags.push(Diagnostic::error(format!("duplicate compute `{}`", c.name)));
        }
        validate_compute(f, c, &mut diags);
    }

    validate_directives(f, &mut diags);
    diags
}

fn validate_compute(f: &Function, c: &Compute, diags: &mut Vec<Diagnostic>) {
    for (idx, iv) in c.iters.iter().enumerate() {
        if c.iters[..idx].iter().any(|o| o.name == iv.name) {
            diags.push(Diagnostic::error(format!(
                "compute `{}`: iterator `{}` listed twice",
                c.name, iv.name
            )));
        }
        if iv.lower >= iv.upper {
            diags.push(Diagnostic::error(format!(
                "compute `{}`: iterator `{}` has empty range {}..{}",
                c.name, iv.name, iv.lower, iv.upper
            )));
        }
    }

    let dest = match f.placeholder(&c.dest) {
        Some(p) => p,
        None => {
            diags.push(Diagnostic::error(format!(
                "compute `{}`: unknown array `{}`",
                c.name, c.dest
            )));
            return;
        }
    };
    if c.dest_indices.len() != dest.rank() {
        diags.push(Diagnostic::error(format!(
            "compute `{}`: `{}` has rank {}, got {} indices",
            c.name,
            c.dest,
            dest.rank(),
            c.dest_indices.len()
        )));
    }

    // Every referenced iterator must be one of the compute's iterators.
    let known = |name: &str| c.iters.iter().any(|iv| iv.name == name);
    for idx in &c.dest_indices {
        for (name, _) in idx.dims() {
            if !known(name) {
                diags.push(Diagnostic::error(format!(
                    "compute `{}`: unknown iterator `{name}` in destination index",
                    c.name
                )));
            }
        }
    }
    for name in c.rhs.iter_names() {
        if !known(name) {
            diags.push(Diagnostic::error(format!(
                "compute `{}`: unknown iterator `{name}`",
                c.name
            )));
        }
    }

    for (array, indices) in c.rhs.loads() {
        match f.placeholder(array) {
            None => diags.push(Diagnostic::error(format!(
                "compute `{}`: unknown array `{array}`",
                c.name
            ))),
            Some(p) => {
                if indices.len() != p.rank() {
                    diags.push(Diagnostic::error(format!(
                        "compute `{}`: `{array}` has rank {}, got {} indices",
                        c.name,
                        p.rank(),
                        indices.len()
                    )));
                }
                // All arrays in a statement share the destination's element
                // type; literals coerce, arrays do not.
                if p.dtype != dest.dtype {
                    diags.push(Diagnostic::error(format!(
                        "compute `{}`: `{array}` is {} but destination `{}` is {}",
                        c.name, p.dtype, c.dest, dest.dtype
                    )));
                }
            }
        }
    }
}

/// Tracks the loop dimensions of each compute as transform directives
/// rewrite them, so later directives can reference created names.
fn validate_directives(f: &Function, diags: &mut Vec<Diagnostic>) {
    let mut dims: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut transformed: BTreeMap<&str, bool> = BTreeMap::new();
    for c in &f.computes {
        dims.insert(
            c.name.as_str(),
            c.iters.iter().map(|iv| iv.name.clone()).collect(),
        );
        transformed.insert(c.name.as_str(), false);
    }

    for d in &f.directives {
        if let Some(recv) = d.receiver() {
            let is_partition = matches!(d, ScheduleDirective::Partition { .. });
            if is_partition {
                if f.placeholder(recv).is_none() {
                    diags.push(Diagnostic::error(format!("unknown array `{recv}`")));
                    continue;
                }
            } else if f.compute(recv).is_none() {
                diags.push(Diagnostic::error(format!("unknown compute `{recv}`")));
                continue;
            }
        }

        match d {
            ScheduleDirective::Interchange { compute, a, b } => {
                let cur = dims.get_mut(compute.as_str()).unwrap();
                for name in [a, b] {
                    if !cur.contains(name) {
                        diags.push(Diagnostic::error(format!(
                            "`{compute}`: unknown loop dimension `{name}`"
                        )));
                    }
                }
                if let (Some(pa), Some(pb)) = (
                    cur.iter().position(|n| n == a),
                    cur.iter().position(|n| n == b),
                ) {
                    cur.swap(pa, pb);
                }
                transformed.insert(compute.as_str(), true);
            }
            ScheduleDirective::Split {
                compute,
                dim,
                factor,
                outer,
                inner,
            } => {
                if *factor < 2 {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: split factor must be >= 2, got {factor}"
                    )));
                }
                apply_split(compute, dim, &[outer, inner], &mut dims, diags);
                transformed.insert(compute.as_str(), true);
            }
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
            } => {
                for (t, name) in [(ti, i), (tj, j)] {
                    if *t < 1 {
                        diags.push(Diagnostic::error(format!(
                            "`{compute}`: tile factor for `{name}` must be >= 1, got {t}"
                        )));
                    }
                }
                let cur = dims.get(compute.as_str()).unwrap().clone();
                if !cur.contains(i) || !cur.contains(j) {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: tile references unknown loop dimension"
                    )));
                } else if i == j {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: tile needs two distinct dimensions"
                    )));
                } else {
                    apply_split(compute, i, &[i0, i1], &mut dims, diags);
                    apply_split(compute, j, &[j0, j1], &mut dims, diags);
                    // Resulting order is (.., i0, j0, i1, j1, ..); only the
                    // name bookkeeping matters here.
                    let cur = dims.get_mut(compute.as_str()).unwrap();
                    reorder_tiled(cur, i0, j0, i1, j1);
                }
                transformed.insert(compute.as_str(), true);
            }
            ScheduleDirective::Skew {
                compute,
                i,
                j,
                t1: _,
                t2,
                ni,
                nj,
            } => {
                if *t2 != 1 {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: unsupported skew, inner factor must be 1 (got {t2})"
                    )));
                }
                let cur = dims.get_mut(compute.as_str()).unwrap();
                let pi = cur.iter().position(|n| n == i);
                let pj = cur.iter().position(|n| n == j);
                match (pi, pj) {
                    (Some(pi), Some(pj)) if pi < pj => {
                        for fresh in [ni, nj] {
                            if cur.contains(fresh) {
                                diags.push(Diagnostic::error(format!(
                                    "`{compute}`: dimension `{fresh}` is not fresh"
                                )));
                            }
                        }
                        cur[pi] = ni.clone();
                        cur[pj] = nj.clone();
                    }
                    (Some(_), Some(_)) => diags.push(Diagnostic::error(format!(
                        "`{compute}`: skew requires `{i}` outer than `{j}`"
                    ))),
                    _ => diags.push(Diagnostic::error(format!(
                        "`{compute}`: skew references unknown loop dimension"
                    ))),
                }
                transformed.insert(compute.as_str(), true);
            }
            ScheduleDirective::After {
                compute,
                base,
                level,
            } => {
                if f.compute(base).is_none() {
                    diags.push(Diagnostic::error(format!("unknown compute `{base}`")));
                    continue;
                }
                if compute == base {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}` cannot be ordered after itself"
                    )));
                    continue;
                }
                // `after` orders original loop nests; it must precede any
                // transformation of either compute so the shared prefix is
                // well-defined.
                if transformed[compute.as_str()] || transformed[base.as_str()] {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}.after({base}, ..)` must appear before loop transformations"
                    )));
                    continue;
                }
                if let AfterLevel::Dim(name) = level {
                    let (ca, cb) = (f.compute(compute).unwrap(), f.compute(base).unwrap());
                    match cb.iter_index(name) {
                        None => diags.push(Diagnostic::error(format!(
                            "`{base}` has no loop level `{name}`"
                        ))),
                        Some(lvl) => {
                            let ok = lvl < ca.depth()
                                && (0..=lvl).all(|l| {
                                    ca.iters[l].name == cb.iters[l].name
                                        && ca.iters[l].lower == cb.iters[l].lower
                                        && ca.iters[l].upper == cb.iters[l].upper
                                });
                            if !ok {
                                diags.push(Diagnostic::error(format!(
                                    "`{compute}` and `{base}` do not share loops up to `{name}`"
                                )));
                            }
                        }
                    }
                }
            }
            ScheduleDirective::Pipeline { compute, dim, ii } => {
                if *ii < 1 {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: pipeline target II must be >= 1, got {ii}"
                    )));
                }
                if !dims[compute.as_str()].contains(dim) {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: unknown loop dimension `{dim}`"
                    )));
                }
            }
            ScheduleDirective::Unroll {
                compute,
                dim,
                factor,
            } => {
                if *factor < 1 {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: unroll factor must be >= 1, got {factor}"
                    )));
                }
                if !dims[compute.as_str()].contains(dim) {
                    diags.push(Diagnostic::error(format!(
                        "`{compute}`: unknown loop dimension `{dim}`"
                    )));
                }
            }
            ScheduleDirective::Partition {
                array,
                factors,
                kind: _,
            } => {
                let p = f.placeholder(array).unwrap();
                if factors.len() > p.rank() {
                    diags.push(Diagnostic::error(format!(
                        "`{array}` has rank {}, got {} partition factors",
                        p.rank(),
                        factors.len()
                    )));
                }
                for &fac in factors {
                    if fac < 1 {
                        diags.push(Diagnostic::error(format!(
                            "`{array}`: partition factor must be >= 1, got {fac}"
                        )));
                    }
                }
            }
            ScheduleDirective::AutoDse { .. } => {}
        }
    }
}

fn apply_split(
    compute: &str,
    dim: &str,
    fresh: &[&String],
    dims: &mut BTreeMap<&str, Vec<String>>,
    diags: &mut Vec<Diagnostic>,
) {
    let cur = dims.get_mut(compute).unwrap();
    let pos = match cur.iter().position(|n| n == dim) {
        Some(p) => p,
        None => {
            diags.push(Diagnostic::error(format!(
                "`{compute}`: unknown loop dimension `{dim}`"
            )));
            return;
        }
    };
    for f in fresh {
        if cur.contains(f) {
            diags.push(Diagnostic::error(format!(
                "`{compute}`: dimension `{f}` is not fresh"
            )));
            return;
        }
    }
    if fresh[0] == fresh[1] {
        diags.push(Diagnostic::error(format!(
            "`{compute}`: split names must differ"
        )));
        return;
    }
    cur.splice(pos..=pos, [fresh[0].clone(), fresh[1].clone()]);
}

fn reorder_tiled(cur: &mut Vec<String>, i0: &str, j0: &str, i1: &str, j1: &str) {
    let anchor = match cur.iter().position(|n| n == i0) {
        Some(p) => p,
        None => return,
    };
    cur.retain(|n| n != i0 && n != j0 && n != i1 && n != j1);
    let anchor = anchor.min(cur.len());
    cur.splice(
        anchor..anchor,
        [
            i0.to_string(),
            j0.to_string(),
            i1.to_string(),
            j1.to_string(),
        ],
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse_program;

    #[test]
    fn valid_gemm_is_ok() {
        let src = r#"
        func gemm {
          iter i = 0..8; iter j = 0..8; iter k = 0..8;
          array A: f32[8][8] in; array B: f32[8][8] in; array C: f32[8][8] out;
          compute S1 (i, j, k) { C[i][j] += A[i][k] * B[k][j]; }
          schedule {
            S1.tile(i, j, 4, 4, i0, j0, i1, j1);
            S1.pipeline(j0, 1);
            S1.unroll(i1, 4);
          }
        }
        "#;
        let f = parse_program(src).unwrap();
        assert!(validate(&f).is_empty());
    }

    #[test]
    fn unknown_compute_in_directive() {
        let src = r#"
        func f {
          iter i = 0..8;
          array A: f32[8] inout;
          compute S1 (i) { A[i] = 1; }
        }
        "#;
        let mut f = parse_program(src).unwrap();
        f.directives.push(ScheduleDirective::Unroll {
            compute: "S9".into(),
            dim: "i".into(),
            factor: 4,
        });
        let diags = validate(&f);
        assert!(diags.iter().any(|d| d.message.contains("unknown compute")));
    }

    #[test]
    fn partition_factor_list_too_long() {
        let src = r#"
        func f {
          iter i = 0..8;
          array A: f32[8] inout;
          compute S1 (i) { A[i] = 1; }
          schedule { A.partition({2, 2}, "cyclic"); }
        }
        "#;
        let f = parse_program(src).unwrap();
        let diags = validate(&f);
        assert!(diags.iter().any(|d| d.message.contains("partition factors")));
    }

    #[test]
    fn directive_can_reference_created_dims() {
        let src = r#"
        func f {
          iter i = 0..16;
          array A: f32[16] inout;
          compute S1 (i) { A[i] = A[i] + 1.0; }
          schedule {
            S1.split(i, 4, i0, i1);
            S1.unroll(i1, 4);
          }
        }
        "#;
        let f = parse_program(src).unwrap();
        assert!(validate(&f).is_empty());
    }

    #[test]
    fn mixed_dtype_load_is_rejected() {
        let src = r#"
        func f {
          iter i = 0..8;
          array A: i32[8] in;
          array B: f32[8] out;
          compute S1 (i) { B[i] = A[i]; }
        }
        "#;
        let f = parse_program(src).unwrap();
        let diags = validate(&f);
        assert!(!diags.is_empty());
    }
}
