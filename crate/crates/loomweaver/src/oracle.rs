//! Brute-force dependence oracle.
//!
//! Enumerates statement instances over clamped iteration domains and
//! reports every ordered pair that touches the same array cell with at
//! least one write. The oracle is the ground truth the analytical
//! dependence analysis and fusion legality checks are tested against.
//!
//! Pair generation is data-parallel over array cells; with the `parallel`
//! feature (default) it runs on rayon, otherwise on a sequential fallback
//! with identical results.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::diag::{CompileError, CompileResult};
use crate::frontend::{AssignOp, Compute};

/// Hard cap on enumerated instances.
const MAX_POINTS: u64 = 1_000_000;

/// A (source, sink) pair of iteration vectors, sink after source in
/// lexicographic execution order.
pub type DepPair = (Vec<i64>, Vec<i64>);

/// A dependence between instances of two different computes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossDep {
    pub src: Vec<i64>,
    pub sink: Vec<i64>,
    pub array: String,
}

#[derive(Debug, Clone, Copy)]
struct Access {
    rank: u32,
    writes: bool,
    reads: bool,
}

/// Clamped half-open ranges for a compute: each trip count capped at `cap`.
fn clamped_ranges(c: &Compute, cap: usize) -> Vec<(i64, i64)> {
    c.iters
        .iter()
        .map(|iv| (iv.lower, iv.upper.min(iv.lower + cap as i64)))
        .collect()
}

fn domain_size(ranges: &[(i64, i64)]) -> u64 {
    ranges
        .iter()
        .map(|&(lo, hi)| (hi - lo).max(0) as u64)
        .try_fold(1u64, |acc, n| acc.checked_mul(n))
        .unwrap_or(u64::MAX)
}

/// Iterate all points of a rectangular domain in lexicographic order.
fn for_each_point(ranges: &[(i64, i64)], mut f: impl FnMut(u64, &[i64])) {
    let total = domain_size(ranges);
    let mut point: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).collect();
    for rank in 0..total {
        f(rank, &point);
        for lvl in (0..ranges.len()).rev() {
            point[lvl] += 1;
            if point[lvl] < ranges[lvl].1 {
                break;
            }
            point[lvl] = ranges[lvl].0;
        }
    }
}

/// Cells of the destination array touched by one instance of `c`.
fn dest_cells(c: &Compute, point: &[i64]) -> (Vec<i64>, Vec<Vec<i64>>) {
    let env: BTreeMap<String, i64> = c
        .iters
        .iter()
        .zip(point)
        .map(|(iv, &v)| (iv.name.clone(), v))
        .collect();
    let write: Vec<i64> = c.dest_indices.iter().map(|e| e.eval_map(&env)).collect();
    let mut reads = Vec::new();
    if c.op == AssignOp::Accumulate {
        reads.push(write.clone());
    }
    for (array, indices) in c.rhs.loads() {
        if array == c.dest {
            reads.push(indices.iter().map(|e| e.eval_map(&env)).collect());
        }
    }
    (write, reads)
}

/// All ordered instance pairs of `c` where one instance writes and the
/// other reads or writes the same cell of the destination array, with the
/// sink strictly after the source in lexicographic order.
///
/// Runs on rayon when the `parallel` feature is enabled, sequentially
/// otherwise; results are identical.
pub fn brute_force_dependences(c: &Compute, cap: usize) -> CompileResult<Vec<DepPair>> {
    #[cfg(feature = "parallel")]
    {
        brute_force_dependences_par(c, cap)
    }
    #[cfg(not(feature = "parallel"))]
    {
        brute_force_dependences_seq(c, cap)
    }
}

/// Sequential pair generation; always available as the reference path.
pub fn brute_force_dependences_seq(c: &Compute, cap: usize) -> CompileResult<Vec<DepPair>> {
    let (points, cell_lists) = access_map(c, cap)?;
    let mut pairs: Vec<DepPair> = cell_lists
        .iter()
        .flat_map(|list| pairs_of_cell(list, &points))
        .collect();
    pairs.sort();
    pairs.dedup();
    Ok(pairs)
}

/// Data-parallel pair generation over array cells.
#[cfg(feature = "parallel")]
pub fn brute_force_dependences_par(c: &Compute, cap: usize) -> CompileResult<Vec<DepPair>> {
    let (points, cell_lists) = access_map(c, cap)?;
    let mut pairs: Vec<DepPair> = cell_lists
        .par_iter()
        .flat_map_iter(|list| pairs_of_cell(list, &points))
        .collect();
    pairs.par_sort();
    pairs.dedup();
    Ok(pairs)
}

/// Instance points plus the per-cell access lists of the destination
/// array.
#[allow(clippy::type_complexity)]
fn access_map(c: &Compute, cap: usize) -> CompileResult<(Vec<Vec<i64>>, Vec<Vec<Access>>)> {
    let ranges = clamped_ranges(c, cap);
    let total = domain_size(&ranges);
    if total > MAX_POINTS {
        return Err(CompileError::OracleDomainTooLarge(total));
    }
    let mut points: Vec<Vec<i64>> = Vec::with_capacity(total as usize);
    let mut cells: BTreeMap<Vec<i64>, Vec<Access>> = BTreeMap::new();
    for_each_point(&ranges, |rank, point| {
        points.push(point.to_vec());
        let (write, reads) = dest_cells(c, point);
        for r in &reads {
            push_access(&mut cells, r.clone(), rank as u32, false, true);
        }
        push_access(&mut cells, write, rank as u32, true, false);
    });
    Ok((points, cells.into_values().collect()))
}

fn push_access(
    cells: &mut BTreeMap<Vec<i64>, Vec<Access>>,
    cell: Vec<i64>,
    rank: u32,
    writes: bool,
    reads: bool,
) {
    let list = cells.entry(cell).or_default();
    if let Some(last) = list.last_mut() {
        if last.rank == rank {
            last.writes |= writes;
            last.reads |= reads;
            return;
        }
    }
    list.push(Access { rank, writes, reads });
}

fn pairs_of_cell<'a>(
    list: &'a [Access],
    points: &'a [Vec<i64>],
) -> impl Iterator<Item = DepPair> + 'a {
    list.iter().enumerate().flat_map(move |(i, a)| {
        list[i + 1..].iter().filter_map(move |b| {
            (a.writes || b.writes)
                .then(|| (points[a.rank as usize].clone(), points[b.rank as usize].clone()))
        })
    })
}

/// Dependences between instances of two computes accessing shared arrays,
/// with every instance of `a` executing before every instance of `b`.
/// Used for fusion legality and for recomputing coarse edges in tests.
pub fn cross_dependences(a: &Compute, b: &Compute, cap: usize) -> CompileResult<Vec<CrossDep>> {
    let ranges_a = clamped_ranges(a, cap);
    let ranges_b = clamped_ranges(b, cap);
    let total = domain_size(&ranges_a).saturating_add(domain_size(&ranges_b));
    if total > MAX_POINTS {
        return Err(CompileError::OracleDomainTooLarge(total));
    }

    // arrays touched by both computes
    let touched = |c: &Compute| -> Vec<String> {
        let mut v: Vec<String> = c.rhs.loads().iter().map(|(n, _)| n.to_string()).collect();
        v.push(c.dest.clone());
        v.sort();
        v.dedup();
        v
    };
    let shared: Vec<String> = touched(a)
        .into_iter()
        .filter(|n| touched(b).contains(n))
        .collect();

    let mut out = Vec::new();
    for array in &shared {
        // cell -> accesses of `a`, then test `b`'s accesses against them
        let mut cells: BTreeMap<Vec<i64>, Vec<(Vec<i64>, bool)>> = BTreeMap::new();
        for_each_point(&ranges_a, |_, point| {
            for (cell, writes) in array_accesses(a, array, point) {
                cells.entry(cell).or_default().push((point.to_vec(), writes));
            }
        });
        for_each_point(&ranges_b, |_, point| {
            for (cell, b_writes) in array_accesses(b, array, point) {
                if let Some(srcs) = cells.get(&cell) {
                    for (src, a_writes) in srcs {
                        if *a_writes || b_writes {
                            out.push(CrossDep {
                                src: src.clone(),
                                sink: point.to_vec(),
                                array: array.clone(),
                            });
                        }
                    }
                }
            }
        });
    }
    out.sort_by(|x, y| (&x.array, &x.src, &x.sink).cmp(&(&y.array, &y.src, &y.sink)));
    out.dedup();
    Ok(out)
}

/// (cell, is_write) accesses of one instance on a given array.
fn array_accesses(c: &Compute, array: &str, point: &[i64]) -> Vec<(Vec<i64>, bool)> {
    let env: BTreeMap<String, i64> = c
        .iters
        .iter()
        .zip(point)
        .map(|(iv, &v)| (iv.name.clone(), v))
        .collect();
    let mut out = Vec::new();
    if c.dest == array {
        let cell: Vec<i64> = c.dest_indices.iter().map(|e| e.eval_map(&env)).collect();
        if c.op == AssignOp::Accumulate {
            out.push((cell.clone(), false));
        }
        out.push((cell, true));
    }
    for (name, indices) in c.rhs.loads() {
        if name == array {
            out.push((indices.iter().map(|e| e.eval_map(&env)).collect(), false));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::analyze_node;
    use crate::frontend::parse_program;

    #[test]
    fn independent_kernel_has_no_pairs() {
        let f = parse_program(
            r#"
            func indep {
              iter i = 0..8;
              array A: f32[8] in; array B: f32[8] out;
              compute S1 (i) { B[i] = A[i] * 2.0; }
            }
            "#,
        )
        .unwrap();
        let pairs = brute_force_dependences(&f.computes[0], 8).unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn stencil_pairs_realize_uniform_distance() {
        let f = parse_program(
            r#"
            func stencil {
              iter i = 1..4; iter j = 1..4;
              array B: f32[4][4] inout;
              compute S1 (i, j) { B[i][j] = B[i - 1][j - 1] + 1.0; }
            }
            "#,
        )
        .unwrap();
        let c = &f.computes[0];
        let pairs = brute_force_dependences(c, 4).unwrap();
        assert!(!pairs.is_empty());
        // every pair between the analyzed accesses is exactly distance (1,1)
        for (src, sink) in &pairs {
            assert_eq!(sink[0] - src[0], 1);
            assert_eq!(sink[1] - src[1], 1);
        }
        let attrs = analyze_node(c);
        let d = &attrs.self_deps[0].distance;
        assert!(pairs
            .iter()
            .any(|(s, k)| k[0] - s[0] == d.entries[0] && k[1] - s[1] == d.entries[1]));
    }

    #[test]
    fn gemm_pairs_run_along_k() {
        let f = parse_program(
            r#"
            func gemm {
              iter i = 0..4; iter j = 0..4; iter k = 0..4;
              array A: f32[4][4] in; array B: f32[4][4] in; array C: f32[4][4] out;
              compute S1 (i, j, k) { C[i][j] += A[i][k] * B[k][j]; }
            }
            "#,
        )
        .unwrap();
        let pairs = brute_force_dependences(&f.computes[0], 4).unwrap();
        // per (i,j): all ordered pairs along k: C(4,2)=6; 16 cells
        assert_eq!(pairs.len(), 16 * 6);
        for (src, sink) in &pairs {
            assert_eq!(src[0], sink[0]);
            assert_eq!(src[1], sink[1]);
            assert!(sink[2] > src[2]);
        }
    }

    #[test]
    fn domain_cap_is_enforced() {
        let f = parse_program(
            r#"
            func big {
              iter i = 0..2048; iter j = 0..2048;
              array A: f32[2048][2048] inout;
              compute S1 (i, j) { A[i][j] = 1.0; }
            }
            "#,
        )
        .unwrap();
        assert!(brute_force_dependences(&f.computes[0], 2048).is_err());
        // clamped, it fits
        assert!(brute_force_dependences(&f.computes[0], 8).is_ok());
    }
}
