//! Dependence graph IR: coarse producer-consumer edges between computes
//! and per-node distance/direction vectors for loop-carried dependences.

use std::collections::BTreeSet;
use std::fmt;

use crate::affine::AffineExpr;
use crate::diag::Diagnostic;
use crate::frontend::{AssignOp, Compute, Function, ScheduleDirective};

/// Per-level iteration distance between a dependence source and sink.
/// `known == false` marks a pair the analysis could not resolve to a
/// constant vector; consumers must treat it conservatively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceVector {
    pub entries: Vec<i64>,
    pub known: bool,
}

impl DistanceVector {
    pub fn known(entries: Vec<i64>) -> Self {
        DistanceVector {
            entries,
            known: true,
        }
    }

    pub fn unknown(depth: usize) -> Self {
        DistanceVector {
            entries: vec![0; depth],
            known: false,
        }
    }

    /// Outermost level with a nonzero entry.
    pub fn carrying_level(&self) -> Option<usize> {
        self.entries.iter().position(|&d| d != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepDir {
    Lt,
    Eq,
    Gt,
}

impl fmt::Display for DepDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepDir::Lt => "<",
            DepDir::Eq => "=",
            DepDir::Gt => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionVector {
    pub entries: Vec<DepDir>,
}

impl DirectionVector {
    /// Pointwise classification of a distance vector: `<` for positive,
    /// `=` for zero, `>` for negative entries.
    pub fn from_distance(d: &DistanceVector) -> Self {
        DirectionVector {
            entries: d
                .entries
                .iter()
                .map(|&v| {
                    if v > 0 {
                        DepDir::Lt
                    } else if v < 0 {
                        DepDir::Gt
                    } else {
                        DepDir::Eq
                    }
                })
                .collect(),
        }
    }
}

/// One loop-carried self-dependence of a compute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfDep {
    pub distance: DistanceVector,
    pub direction: DirectionVector,
    /// True when the dependence comes from the read-modify-write of an
    /// accumulate destination (candidate for reassociation).
    pub accumulate: bool,
}

/// Node attributes from fine-grained analysis.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeAttr {
    pub self_deps: Vec<SelfDep>,
    pub reduction_dims: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepNode {
    pub name: String,
    pub depth: usize,
    pub attrs: NodeAttr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepEdge {
    /// Index into `DepGraph::nodes` (declaration order).
    pub producer: usize,
    pub consumer: usize,
    pub array: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DepGraph {
    /// One node per compute, in declaration order.
    pub nodes: Vec<DepNode>,
    pub edges: Vec<DepEdge>,
    /// Declaration order adjusted by `after` directives.
    pub exec_order: Vec<usize>,
    pub warnings: Vec<Diagnostic>,
}

impl DepGraph {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    fn successors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.producer == node)
            .map(|e| e.consumer)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn in_degree(&self, node: usize) -> usize {
        let preds: BTreeSet<usize> = self
            .edges
            .iter()
            .filter(|e| e.consumer == node)
            .map(|e| e.producer)
            .collect();
        preds.len()
    }
}

/// Execution order of computes: declaration order, then each
/// `s1.after(s2, ..)` moves `s1` to just after `s2`.
pub fn execution_order(f: &Function) -> Vec<usize> {
    let mut order: Vec<usize> = (0..f.computes.len()).collect();
    for d in &f.directives {
        if let ScheduleDirective::After { compute, base, .. } = d {
            let (Some(ci), Some(bi)) = (f.compute_index(compute), f.compute_index(base)) else {
                continue;
            };
            if let Some(pos) = order.iter().position(|&x| x == ci) {
                order.remove(pos);
                let base_pos = order.iter().position(|&x| x == bi).unwrap_or(0);
                order.insert(base_pos + 1, ci);
            }
        }
    }
    order
}

/// Build the coarse dependence graph: an edge `(p, c, A)` for every array
/// `A` stored by `p` and loaded by a later compute `c`. When several
/// earlier computes store the same array, only the most recent writer
/// keeps the edge and the write-write pair is reported as a warning.
pub fn build_dep_graph(f: &Function) -> DepGraph {
    let mut g = DepGraph {
        nodes: f
            .computes
            .iter()
            .map(|c| DepNode {
                name: c.name.clone(),
                depth: c.depth(),
                attrs: analyze_node(c),
            })
            .collect(),
        edges: Vec::new(),
        exec_order: execution_order(f),
        warnings: Vec::new(),
    };

    let pos_of = |idx: usize| g.exec_order.iter().position(|&x| x == idx).unwrap_or(0);

    // Write-write pairs on the same array, in execution order.
    let mut ww_reported: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (ei, &i) in g.exec_order.iter().enumerate() {
        for &j in g.exec_order.iter().skip(ei + 1) {
            if f.computes[i].dest == f.computes[j].dest && ww_reported.insert((i, j)) {
                g.warnings.push(Diagnostic::warning(format!(
                    "computes `{}` and `{}` both store to `{}`; coarse edges use the last writer",
                    f.computes[i].name, f.computes[j].name, f.computes[i].dest
                )));
            }
        }
    }

    for (ci, consumer) in f.computes.iter().enumerate() {
        let mut read_arrays: Vec<&str> = consumer.rhs.loads().iter().map(|(a, _)| *a).collect();
        if consumer.op == AssignOp::Accumulate {
            read_arrays.push(consumer.dest.as_str());
        }
        read_arrays.sort_unstable();
        read_arrays.dedup();
        for array in read_arrays {
            // Latest earlier writer of `array` in execution order.
            let producer = f
                .computes
                .iter()
                .enumerate()
                .filter(|(pi, p)| {
                    *pi != ci && p.dest == array && pos_of(*pi) < pos_of(ci)
                })
                .max_by_key(|(pi, _)| pos_of(*pi));
            if let Some((pi, _)) = producer {
                g.edges.push(DepEdge {
                    producer: pi,
                    consumer: ci,
                    array: array.to_string(),
                });
            }
        }
    }
    g.edges
        .sort_by(|a, b| (a.producer, a.consumer, &a.array).cmp(&(b.producer, b.consumer, &b.array)));
    g
}

/// All maximal source-to-sink paths, DFS order, lexicographic by node
/// declaration index. Errors with a diagnostic if the graph has a cycle.
pub fn collect_paths(g: &DepGraph) -> Result<Vec<Vec<usize>>, Diagnostic> {
    // The construction only creates forward edges, but reject cycles in
    // hand-built graphs rather than looping forever.
    let mut state = vec![0u8; g.nodes.len()];
    for n in 0..g.nodes.len() {
        if state[n] == 0 && has_cycle(g, n, &mut state) {
            return Err(Diagnostic::error("dependence graph has a cycle"));
        }
    }

    let mut paths = Vec::new();
    for src in 0..g.nodes.len() {
        if g.in_degree(src) == 0 {
            let mut stack = vec![src];
            dfs_paths(g, &mut stack, &mut paths);
        }
    }
    Ok(paths)
}

fn has_cycle(g: &DepGraph, n: usize, state: &mut [u8]) -> bool {
    state[n] = 1;
    for s in g.successors(n) {
        if state[s] == 1 || (state[s] == 0 && has_cycle(g, s, state)) {
            return true;
        }
    }
    state[n] = 2;
    false
}

fn dfs_paths(g: &DepGraph, stack: &mut Vec<usize>, paths: &mut Vec<Vec<usize>>) {
    let last = *stack.last().unwrap();
    let succ = g.successors(last);
    if succ.is_empty() {
        paths.push(stack.clone());
        return;
    }
    for s in succ {
        stack.push(s);
        dfs_paths(g, stack, paths);
        stack.pop();
    }
}

/// Fine-grained analysis of one compute: reduction dimensions and
/// loop-carried self-dependences.
pub fn analyze_node(c: &Compute) -> NodeAttr {
    let mut attrs = NodeAttr::default();

    if c.op == AssignOp::Accumulate {
        for (level, iv) in c.iters.iter().enumerate() {
            let used = c.dest_indices.iter().any(|idx| idx.coeff(&iv.name) != 0);
            if !used {
                attrs.reduction_dims.insert(level);
            }
        }
        // The read-modify-write recurs at the innermost reduction dimension.
        if let Some(&innermost) = attrs.reduction_dims.iter().max() {
            let mut entries = vec![0i64; c.depth()];
            entries[innermost] = 1;
            let distance = DistanceVector::known(entries);
            let direction = DirectionVector::from_distance(&distance);
            attrs.self_deps.push(SelfDep {
                distance,
                direction,
                accumulate: true,
            });
        }
    }

    // Store/load pairs on the destination array within the statement.
    for (array, indices) in c.rhs.loads() {
        if array != c.dest {
            continue;
        }
        if let Some(dep) = pair_distance(c, &c.dest_indices, indices) {
            if !attrs.self_deps.contains(&dep) {
                attrs.self_deps.push(dep);
            }
        }
    }
    attrs
}

/// Distance between a store and a load with access functions `store_idx`
/// and `load_idx` on the same array. Returns `None` when the accesses can
/// never touch the same cell, a known vector when the pair is uniform,
/// and an unknown marker otherwise.
fn pair_distance(
    c: &Compute,
    store_idx: &[AffineExpr],
    load_idx: &[AffineExpr],
) -> Option<SelfDep> {
    let depth = c.depth();
    let unknown = || {
        let distance = DistanceVector::unknown(depth);
        let direction = DirectionVector::from_distance(&distance);
        Some(SelfDep {
            distance,
            direction,
            accumulate: false,
        })
    };

    if store_idx.len() != load_idx.len() {
        return unknown();
    }
    // Identical linear parts per array dimension, else fall back to unknown.
    for (s, l) in store_idx.iter().zip(load_idx) {
        let same_linear = c
            .iters
            .iter()
            .all(|iv| s.coeff(&iv.name) == l.coeff(&iv.name));
        if !same_linear {
            return unknown();
        }
    }

    // Solve per-iterator deltas from single-iterator unit-coefficient dims;
    // anything richer is reported as unknown rather than guessed.
    let mut delta: Vec<Option<i64>> = vec![None; depth];
    let mut constrained = vec![false; depth];
    for (s, l) in store_idx.iter().zip(load_idx) {
        let used: Vec<usize> = c
            .iters
            .iter()
            .enumerate()
            .filter(|(_, iv)| s.coeff(&iv.name) != 0)
            .map(|(lvl, _)| lvl)
            .collect();
        let offset = s.constant_term() - l.constant_term();
        match used.as_slice() {
            [] => {
                // Constant index on both sides: different constants never
                // alias, equal constants constrain nothing.
                if offset != 0 {
                    return None;
                }
            }
            [lvl] => {
                let coeff = s.coeff(&c.iters[*lvl].name);
                if coeff.abs() != 1 {
                    return unknown();
                }
                let d = offset / coeff;
                match delta[*lvl] {
                    Some(prev) if prev != d => return None,
                    _ => delta[*lvl] = Some(d),
                }
                constrained[*lvl] = true;
            }
            _ => return unknown(),
        }
    }

    // An iterator absent from the access pair leaves the dependence free
    // at that level; the vector is not a single constant there.
    if constrained.iter().any(|&c| !c) {
        return unknown();
    }

    let mut entries: Vec<i64> = delta.into_iter().map(|d| d.unwrap_or(0)).collect();
    if entries.iter().all(|&d| d == 0) {
        // Loop-independent; carries no constraint across iterations.
        return None;
    }
    // Orient the vector the way execution realizes it: sink after source.
    if let Some(first) = entries.iter().find(|&&d| d != 0) {
        if *first < 0 {
            for e in &mut entries {
                *e = -*e;
            }
        }
    }
    let distance = DistanceVector::known(entries);
    let direction = DirectionVector::from_distance(&distance);
    Some(SelfDep {
        distance,
        direction,
        accumulate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn parse(src: &str) -> Function {
        parse_program(src).unwrap()
    }

    #[test]
    fn matmul_reduction_and_distance() {
        let f = parse(
            r#"
            func gemm {
              iter i = 0..8; iter j = 0..8; iter k = 0..8;
              array A: f32[8][8] in; array B: f32[8][8] in; array C: f32[8][8] out;
              compute S4 (i, j, k) { C[i][j] += A[i][k] * B[k][j]; }
            }
            "#,
        );
        let attrs = analyze_node(&f.computes[0]);
        assert_eq!(attrs.reduction_dims, BTreeSet::from([2]));
        assert_eq!(attrs.self_deps.len(), 1);
        let dep = &attrs.self_deps[0];
        assert_eq!(dep.distance, DistanceVector::known(vec![0, 0, 1]));
        assert!(dep.accumulate);
    }

    #[test]
    fn stencil_distance_and_direction() {
        let f = parse(
            r#"
            func stencil {
              iter i = 1..8; iter j = 1..8;
              array B: f32[8][8] inout;
              compute S1 (i, j) { B[i][j] = B[i - 1][j - 1] + 1.0; }
            }
            "#,
        );
        let attrs = analyze_node(&f.computes[0]);
        assert_eq!(attrs.self_deps.len(), 1);
        let dep = &attrs.self_deps[0];
        assert_eq!(dep.distance, DistanceVector::known(vec![1, 1]));
        assert_eq!(dep.direction.entries, vec![DepDir::Lt, DepDir::Lt]);
        assert!(attrs.reduction_dims.is_empty());
    }

    #[test]
    fn pointwise_statement_has_no_self_deps() {
        let f = parse(
            r#"
            func copy {
              iter i = 0..8; iter j = 0..8;
              array A: f32[8][8] in; array C: f32[8][8] out;
              compute S1 (i, j) { C[i][j] = A[i][j] + 1.0; }
            }
            "#,
        );
        let attrs = analyze_node(&f.computes[0]);
        assert!(attrs.self_deps.is_empty());
    }

    #[test]
    fn free_iterator_is_unknown() {
        // `t` appears in neither access: the dependence family is not a
        // single constant vector, so it must be reported unknown.
        let f = parse(
            r#"
            func seidelish {
              iter t = 0..4; iter i = 1..8;
              array A: f32[9] inout;
              compute S1 (t, i) { A[i] = A[i - 1] + 1.0; }
            }
            "#,
        );
        let attrs = analyze_node(&f.computes[0]);
        assert_eq!(attrs.self_deps.len(), 1);
        assert!(!attrs.self_deps[0].distance.known);
    }

    #[test]
    fn anti_direction_is_normalized() {
        let f = parse(
            r#"
            func anti {
              iter i = 0..7;
              array A: f32[8] inout;
              compute S1 (i) { A[i] = A[i + 1] + 1.0; }
            }
            "#,
        );
        let attrs = analyze_node(&f.computes[0]);
        assert_eq!(attrs.self_deps[0].distance, DistanceVector::known(vec![1]));
    }

    #[test]
    fn two_compute_chain_has_one_edge() {
        let f = parse(
            r#"
            func two {
              iter i = 0..8; iter j = 0..8; iter k = 0..8;
              array A: f32[8][8] in; array B: f32[8][8] in; array C: f32[8][8] in;
              array D: f32[8][8] temp; array E: f32[8][8] out;
              compute S1 (i, j, k) { D[i][j] += A[i][k] * B[k][j]; }
              compute S2 (i, j, k) { E[i][j] += D[i][k] * C[k][j]; }
            }
            "#,
        );
        let g = build_dep_graph(&f);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].producer, 0);
        assert_eq!(g.edges[0].consumer, 1);
        assert_eq!(g.edges[0].array, "D");
    }

    #[test]
    fn diamond_paths() {
        let mut g = DepGraph::default();
        for name in ["A", "B", "C", "D"] {
            g.nodes.push(DepNode {
                name: name.into(),
                depth: 1,
                attrs: NodeAttr::default(),
            });
        }
        g.exec_order = vec![0, 1, 2, 3];
        for (p, c) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            g.edges.push(DepEdge {
                producer: p,
                consumer: c,
                array: "x".into(),
            });
        }
        let paths = collect_paths(&g).unwrap();
        assert_eq!(paths, vec![vec![0, 1, 3], vec![0, 2, 3]]);
    }

    #[test]
    fn single_node_is_one_path() {
        let f = parse(
            r#"
            func one {
              iter i = 0..4;
              array A: f32[4] inout;
              compute S1 (i) { A[i] = 1.0; }
            }
            "#,
        );
        let g = build_dep_graph(&f);
        assert!(g.edges.is_empty());
        assert_eq!(collect_paths(&g).unwrap(), vec![vec![0]]);
    }

    #[test]
    fn three_mm_has_two_maximal_paths() {
        let f = parse(
            r#"
            func three_mm {
              iter i = 0..4; iter j = 0..4; iter k = 0..4;
              array A: f32[4][4] in; array B: f32[4][4] in;
              array C: f32[4][4] in; array D: f32[4][4] in;
              array E: f32[4][4] temp; array F: f32[4][4] temp; array G: f32[4][4] out;
              compute S1 (i, j, k) { E[i][j] += A[i][k] * B[k][j]; }
              compute S2 (i, j, k) { F[i][j] += C[i][k] * D[k][j]; }
              compute S3 (i, j, k) { G[i][j] += E[i][k] * F[k][j]; }
            }
            "#,
        );
        let g = build_dep_graph(&f);
        let edges: Vec<(usize, usize, &str)> = g
            .edges
            .iter()
            .map(|e| (e.producer, e.consumer, e.array.as_str()))
            .collect();
        assert_eq!(edges, vec![(0, 2, "E"), (1, 2, "F")]);
        let paths = collect_paths(&g).unwrap();
        assert_eq!(paths, vec![vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn cycle_is_a_diagnostic() {
        let mut g = DepGraph::default();
        for name in ["A", "B"] {
            g.nodes.push(DepNode {
                name: name.into(),
                depth: 1,
                attrs: NodeAttr::default(),
            });
        }
        g.exec_order = vec![0, 1];
        for (p, c) in [(0, 1), (1, 0)] {
            g.edges.push(DepEdge {
                producer: p,
                consumer: c,
                array: "x".into(),
            });
        }
        assert!(collect_paths(&g).is_err());
    }

    #[test]
    fn write_write_pair_is_flagged() {
        let f = parse(
            r#"
            func ww {
              iter i = 0..4;
              array A: f32[4] inout; array B: f32[4] out;
              compute S1 (i) { A[i] = 1.0; }
              compute S2 (i) { A[i] = 2.0; }
              compute S3 (i) { B[i] = A[i]; }
            }
            "#,
        );
        let g = build_dep_graph(&f);
        assert!(!g.warnings.is_empty());
        // Last writer wins: only S2 -> S3 on A.
        let a_edges: Vec<_> = g.edges.iter().filter(|e| e.array == "A").collect();
        assert_eq!(a_edges.len(), 1);
        assert_eq!(a_edges[0].producer, 1);
    }
}
