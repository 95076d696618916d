//! Two-stage design space exploration.
//!
//! Stage 1 is dependence-aware code transformation: every statement
//! proposes a loop order placing its carried levels outermost; nodes with
//! conflicting proposals are distributed into per-statement nodes, the
//! proposals are applied as interchanges, and adjacent nodes with
//! identical loop boxes are conservatively fused when the brute-force
//! oracle confirms no ordering flips. One action per iteration, up to the
//! configured bound.
//!
//! Stage 2 is bottleneck-oriented optimization: climb a parallelism
//! ladder on the longest-latency node of the critical path, tiling the
//! unrollable levels, pipelining the innermost non-unrolled level, and
//! partitioning arrays to feed the unrolled copies. A step that exceeds
//! the budget or stops improving removes the node from the optimization
//! list; the search ends when the list is empty.

use std::collections::BTreeMap;

use crate::depgraph::{self, DepGraph};
use crate::diag::{CompileError, CompileResult, Diagnostic};
use crate::frontend::{AfterLevel, Compute, Function, PartitionKind, ScheduleDirective};
use crate::loopir::{attach_hw, lower_ast, LoopIR};
use crate::oracle;
use crate::perfmodel::{
    estimate_function, estimate_node, parallelism, CostTable, Estimate, ModelOptions, NodeDep,
    ResourceBudget,
};
use crate::polyhedral::{
    build_ast, lift, order_after, set_loop_order, HwAnnotation, PolyStmt, SchedCoord,
};
use crate::report::{DseReport, EstimateJson, FinalJson, NodeResultJson, StepRecord, TraceEntry};

/// DSE configuration.
#[derive(Debug, Clone)]
pub struct DseConfig {
    pub max_stage1_iterations: usize,
    /// Ascending parallelism steps per unrollable dim.
    pub factor_ladder: Vec<i64>,
    pub budget: ResourceBudget,
    /// Model DSP reuse across sequential nodes (max instead of sum).
    pub reuse: bool,
    /// Permit reassociation of floating-point reductions when unrolling.
    /// Integer reductions reassociate freely (wrapping addition is
    /// associative).
    pub allow_reassoc: bool,
    /// Per-dim trip cap for oracle legality checks.
    pub oracle_cap: usize,
}

impl Default for DseConfig {
    fn default() -> Self {
        DseConfig {
            max_stage1_iterations: 5,
            factor_ladder: vec![1, 2, 4, 8, 16, 32],
            budget: ResourceBudget::default(),
            reuse: false,
            allow_reassoc: true,
            oracle_cap: 8,
        }
    }
}

/// A loop-carried dependence tracked through transformations, expressed
/// over the statement's current loop levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedDep {
    pub entries: Vec<i64>,
    pub known: bool,
    pub accumulate: bool,
}

impl TrackedDep {
    pub fn to_node_dep(&self) -> NodeDep {
        NodeDep {
            entries: self.entries.clone(),
            known: self.known,
            accumulate: self.accumulate,
        }
    }
}

/// Initial tracked deps of a compute (over its declared loop order).
pub fn initial_deps(c: &Compute) -> Vec<TrackedDep> {
    depgraph::analyze_node(c)
        .self_deps
        .iter()
        .map(|d| TrackedDep {
            entries: d.distance.entries.clone(),
            known: d.distance.known,
            accumulate: d.accumulate,
        })
        .collect()
}

/// Permute dependence entries to a new level order; `perm[l]` is the old
/// level now at position `l`.
pub fn permute_deps(deps: &[TrackedDep], perm: &[usize]) -> Vec<TrackedDep> {
    deps.iter()
        .map(|d| TrackedDep {
            entries: perm.iter().map(|&old| d.entries[old]).collect(),
            ..d.clone()
        })
        .collect()
}

/// Map dependences through a split of `level` (extent `extent`) by
/// `factor`: the intra-tile image plus, for carried distances, the
/// tile-boundary image.
pub fn split_deps(deps: &[TrackedDep], level: usize, factor: i64, extent: i64) -> Vec<TrackedDep> {
    let mut out = Vec::new();
    for d in deps {
        if !d.known {
            let mut entries = d.entries.clone();
            entries.insert(level, 0);
            out.push(TrackedDep {
                entries,
                ..d.clone()
            });
            continue;
        }
        let delta = d.entries[level];
        if delta.abs() < factor {
            let mut entries = d.entries.clone();
            entries[level] = delta;
            entries.insert(level, 0);
            out.push(TrackedDep {
                entries,
                ..d.clone()
            });
        }
        if delta != 0 && factor < extent {
            let sign = delta.signum();
            let mut entries = d.entries.clone();
            entries[level] = delta - sign * factor;
            entries.insert(level, sign);
            out.push(TrackedDep {
                entries,
                ..d.clone()
            });
        }
    }
    out
}

/// Map dependences through a skew `nj = t1*i + j` of levels `(pi, pj)`.
pub fn skew_deps(deps: &[TrackedDep], pi: usize, pj: usize, t1: i64) -> Vec<TrackedDep> {
    deps.iter()
        .map(|d| {
            let mut entries = d.entries.clone();
            if d.known {
                entries[pj] = t1 * d.entries[pi] + d.entries[pj];
            }
            TrackedDep {
                entries,
                ..d.clone()
            }
        })
        .collect()
}

/// One statement within a DSE node.
#[derive(Debug, Clone)]
pub struct DseStmt {
    pub stmt: PolyStmt,
    pub deps: Vec<TrackedDep>,
}

/// A schedulable unit: one loop nest holding one or more statements.
#[derive(Debug, Clone)]
pub struct DseNode {
    pub stmts: Vec<DseStmt>,
    /// Compute indices, for mapping graph paths onto nodes.
    pub members: Vec<usize>,
}

impl DseNode {
    pub fn label(&self) -> String {
        let names: Vec<&str> = self.stmts.iter().map(|s| s.stmt.name.as_str()).collect();
        names.join("+")
    }

    /// True when every statement shares the full loop depth, i.e. the
    /// schedules agree on every coordinate up to (at least) the last
    /// loop. Statements interleaved at an outer level only are not fully
    /// shared even when their dimension names coincide.
    fn fully_shared(&self) -> bool {
        let d = self.stmts[0].stmt.depth();
        self.stmts.iter().all(|s| s.stmt.depth() == d) && self.shared_levels() == d
    }

    fn shared_levels(&self) -> usize {
        let first = &self.stmts[0].stmt.schedule.coords;
        let mut shared = self.stmts[0].stmt.depth();
        for s in &self.stmts[1..] {
            let coords = &s.stmt.schedule.coords;
            let common = first
                .iter()
                .zip(coords.iter())
                .take_while(|(a, b)| a == b)
                .count();
            let loops = first[..common]
                .iter()
                .filter(|c| matches!(c, SchedCoord::Loop(_)))
                .count();
            shared = shared.min(loops);
        }
        shared
    }
}

/// Group computes into nodes: statements chained by `after` at a loop
/// level share a nest, everything else is a singleton, in execution
/// order. Schedules reflect the `after` interleaving.
pub fn initial_nodes(f: &Function, g: &DepGraph) -> CompileResult<Vec<DseNode>> {
    let n = f.computes.len();
    let exec_pos: BTreeMap<usize, usize> = g
        .exec_order
        .iter()
        .enumerate()
        .map(|(pos, &ci)| (ci, pos))
        .collect();
    let mut stmts: Vec<PolyStmt> = f
        .computes
        .iter()
        .enumerate()
        .map(|(i, c)| lift(c, i, exec_pos[&i] as i64))
        .collect();
    for d in &f.directives {
        if let ScheduleDirective::After {
            compute,
            base,
            level,
        } = d
        {
            let (Some(ci), Some(bi)) = (f.compute_index(compute), f.compute_index(base)) else {
                continue;
            };
            let lvl = match level {
                AfterLevel::Dim(name) => Some(name.as_str()),
                AfterLevel::Root => None,
            };
            let (moved, _) = order_after(&stmts[ci], &stmts[bi], lvl)?;
            stmts[ci] = moved;
        }
    }

    // union-find over loop-sharing `after` pairs
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for d in &f.directives {
        if let ScheduleDirective::After {
            compute,
            base,
            level: AfterLevel::Dim(_),
        } = d
        {
            if let (Some(a), Some(b)) = (f.compute_index(compute), f.compute_index(base)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }

    let mut nodes: Vec<DseNode> = Vec::new();
    let mut node_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    for &ci in &g.exec_order {
        let r = find(&mut parent, ci);
        let ni = *node_of_root.entry(r).or_insert_with(|| {
            nodes.push(DseNode {
                stmts: Vec::new(),
                members: Vec::new(),
            });
            nodes.len() - 1
        });
        nodes[ni].members.push(ci);
        nodes[ni].stmts.push(DseStmt {
            stmt: stmts[ci].clone(),
            deps: initial_deps(&f.computes[ci]),
        });
    }
    let mut out = nodes;
    renumber_schedules(&mut out);
    Ok(out)
}

/// Reassign root statics so node order is schedule order.
fn renumber_schedules(nodes: &mut [DseNode]) {
    for (n_idx, node) in nodes.iter_mut().enumerate() {
        for s in node.stmts.iter_mut() {
            s.stmt.schedule.coords[0] = SchedCoord::Static(n_idx as i64);
        }
    }
}

pub struct Stage1Result {
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<Diagnostic>,
}

/// Stage 1: iterate propose / split / interchange / fuse until stable or
/// out of iterations. One action per iteration.
pub fn stage1_transform(
    f: &Function,
    nodes: &mut Vec<DseNode>,
    cfg: &DseConfig,
) -> CompileResult<Stage1Result> {
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut split_rejected: Vec<String> = Vec::new();
    let mut fuse_rejected: Vec<(String, String)> = Vec::new();

    for _ in 0..cfg.max_stage1_iterations {
        let proposals: Vec<Vec<Option<Vec<usize>>>> = nodes
            .iter()
            .map(|node| node.stmts.iter().map(proposal).collect())
            .collect();

        if try_split(f, nodes, &proposals, cfg, &mut trace, &mut warnings, &mut split_rejected)? {
            renumber_schedules(nodes);
            continue;
        }
        if try_interchange(nodes, &proposals, &mut trace)? {
            continue;
        }
        if try_fuse(f, nodes, cfg, &mut trace, &mut fuse_rejected)? {
            renumber_schedules(nodes);
            continue;
        }
        break; // fixpoint
    }
    renumber_schedules(nodes);
    Ok(Stage1Result { trace, warnings })
}

/// Proposed level order for one statement: carried levels outermost,
/// stable otherwise. `None` means status quo (nothing carried, or an
/// unknown dependence forbids reordering).
fn proposal(s: &DseStmt) -> Option<Vec<usize>> {
    if s.deps.iter().any(|d| !d.known) {
        return None;
    }
    let depth = s.stmt.depth();
    let carried: Vec<bool> = (0..depth)
        .map(|l| s.deps.iter().any(|d| d.entries[l] != 0))
        .collect();
    if !carried.iter().any(|&c| c) {
        return None;
    }
    let mut order: Vec<usize> = (0..depth).filter(|&l| carried[l]).collect();
    order.extend((0..depth).filter(|&l| !carried[l]));
    Some(order)
}

fn effective_proposals(node: &DseNode, props: &[Option<Vec<usize>>]) -> Vec<Vec<usize>> {
    props
        .iter()
        .enumerate()
        .map(|(si, p)| {
            p.clone()
                .unwrap_or_else(|| (0..node.stmts[si].stmt.depth()).collect())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn try_split(
    f: &Function,
    nodes: &mut Vec<DseNode>,
    proposals: &[Vec<Option<Vec<usize>>>],
    cfg: &DseConfig,
    trace: &mut Vec<TraceEntry>,
    warnings: &mut Vec<Diagnostic>,
    rejected: &mut Vec<String>,
) -> CompileResult<bool> {
    for ni in 0..nodes.len() {
        if nodes[ni].stmts.len() < 2 {
            continue;
        }
        let effective = effective_proposals(&nodes[ni], &proposals[ni]);
        let identity: Vec<usize> = (0..effective[0].len()).collect();
        let disagree = effective.windows(2).any(|w| w[0] != w[1]);
        let partial_reorder = !nodes[ni].fully_shared() && effective.iter().any(|p| *p != identity);
        if !(disagree || partial_reorder) {
            continue;
        }
        let label = nodes[ni].label();
        if rejected.contains(&label) {
            continue;
        }
        if !split_is_legal(f, &nodes[ni], cfg)? {
            warnings.push(Diagnostic::warning(format!(
                "node {label}: conflicting loop orders, but distribution would reverse a dependence"
            )));
            rejected.push(label);
            continue;
        }
        let old = nodes.remove(ni);
        let mut replacement: Vec<DseNode> = old
            .members
            .iter()
            .map(|&ci| DseNode {
                stmts: vec![DseStmt {
                    stmt: lift(&f.computes[ci], ci, 0),
                    deps: initial_deps(&f.computes[ci]),
                }],
                members: vec![ci],
            })
            .collect();
        trace.push(TraceEntry::Split { node: old.label() });
        for (offset, node) in replacement.drain(..).enumerate() {
            nodes.insert(ni + offset, node);
        }
        return Ok(true);
    }
    Ok(false)
}

fn try_interchange(
    nodes: &mut [DseNode],
    proposals: &[Vec<Option<Vec<usize>>>],
    trace: &mut Vec<TraceEntry>,
) -> CompileResult<bool> {
    for (ni, node) in nodes.iter_mut().enumerate() {
        let props = &proposals[ni];
        let Some(p) = props[0].clone() else {
            continue;
        };
        let identity: Vec<usize> = (0..p.len()).collect();
        if p == identity {
            continue;
        }
        if node.stmts.len() > 1
            && (!node.fully_shared() || props.iter().any(|q| q.as_ref() != Some(&p)))
        {
            continue;
        }
        apply_permutation(node, &p, trace)?;
        return Ok(true);
    }
    Ok(false)
}

fn try_fuse(
    f: &Function,
    nodes: &mut Vec<DseNode>,
    cfg: &DseConfig,
    trace: &mut Vec<TraceEntry>,
    rejected: &mut Vec<(String, String)>,
) -> CompileResult<bool> {
    for ni in 0..nodes.len().saturating_sub(1) {
        let pair = (nodes[ni].label(), nodes[ni + 1].label());
        if rejected.contains(&pair) || !fusible(&nodes[ni], &nodes[ni + 1]) {
            continue;
        }
        if !fuse_is_legal(f, &nodes[ni], &nodes[ni + 1], cfg)? {
            rejected.push(pair);
            continue;
        }
        let second = nodes.remove(ni + 1);
        trace.push(TraceEntry::Fuse {
            first: nodes[ni].label(),
            second: second.label(),
        });
        fuse_nodes(&mut nodes[ni], second)?;
        return Ok(true);
    }
    Ok(false)
}

/// Apply a level permutation to every statement of a node, recording one
/// interchange per transposition.
fn apply_permutation(
    node: &mut DseNode,
    perm: &[usize],
    trace: &mut Vec<TraceEntry>,
) -> CompileResult<()> {
    let mut current: Vec<usize> = (0..perm.len()).collect();
    let mut swaps: Vec<(usize, usize)> = Vec::new();
    for target_pos in 0..perm.len() {
        let want = perm[target_pos];
        let at = current.iter().position(|&x| x == want).unwrap();
        if at != target_pos {
            current.swap(target_pos, at);
            swaps.push((target_pos, at));
        }
    }
    for s in node.stmts.iter_mut() {
        let dims = s.stmt.domain.dims().to_vec();
        let order: Vec<String> = perm.iter().map(|&l| dims[l].clone()).collect();
        for &(a, b) in &swaps {
            trace.push(TraceEntry::Interchange {
                stmt: s.stmt.name.clone(),
                a: dims[a.min(b)].clone(),
                b: dims[a.max(b)].clone(),
            });
        }
        s.stmt = set_loop_order(s.stmt.clone(), &order)?;
        s.deps = permute_deps(&s.deps, perm);
    }
    Ok(())
}

/// Nodes are fusible when both are fully shared internally, have equal
/// depth, and identical per-level constant boxes.
fn fusible(a: &DseNode, b: &DseNode) -> bool {
    if !a.fully_shared() || !b.fully_shared() {
        return false;
    }
    let (sa, sb) = (&a.stmts[0].stmt, &b.stmts[0].stmt);
    if sa.depth() != sb.depth() {
        return false;
    }
    match (
        crate::polyhedral::normalized_box(&sa.domain),
        crate::polyhedral::normalized_box(&sb.domain),
    ) {
        (Some(ba), Some(bb)) => ba == bb,
        _ => false,
    }
}

/// Oracle check: fusing `a` (first) and `b` (second) must not flip the
/// order of any dependent instance pair, in either direction.
fn fuse_is_legal(f: &Function, a: &DseNode, b: &DseNode, cfg: &DseConfig) -> CompileResult<bool> {
    for sa in &a.stmts {
        for sb in &b.stmts {
            let ca = compute_of(f, &sa.stmt)?;
            let cb = compute_of(f, &sb.stmt)?;
            // forward dependences must stay forward
            for dep in oracle::cross_dependences(ca, cb, cfg.oracle_cap)? {
                let pa = level_vector(&sa.stmt, ca, &dep.src);
                let pb = level_vector(&sb.stmt, cb, &dep.sink);
                if pb < pa {
                    return Ok(false);
                }
            }
            // and no pair may newly flip backward
            for dep in oracle::cross_dependences(cb, ca, cfg.oracle_cap)? {
                let pb = level_vector(&sb.stmt, cb, &dep.src);
                let pa = level_vector(&sa.stmt, ca, &dep.sink);
                if pb < pa {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Oracle check: distributing an interleaved node into sequential nests
/// must not reverse any dependence between its statements.
fn split_is_legal(f: &Function, node: &DseNode, cfg: &DseConfig) -> CompileResult<bool> {
    for (i, sa) in node.stmts.iter().enumerate() {
        for sb in &node.stmts[i + 1..] {
            let ca = compute_of(f, &sa.stmt)?;
            let cb = compute_of(f, &sb.stmt)?;
            for dep in oracle::cross_dependences(cb, ca, cfg.oracle_cap)? {
                let pb = level_vector(&sb.stmt, cb, &dep.src);
                let pa = level_vector(&sa.stmt, ca, &dep.sink);
                if pb < pa {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn compute_of<'f>(f: &'f Function, s: &PolyStmt) -> CompileResult<&'f Compute> {
    f.compute(&s.name)
        .ok_or_else(|| CompileError::UnknownCompute(s.name.clone()))
}

/// Map an instance's original iteration vector onto the statement's
/// current loop-level order (a permutation during stage 1).
fn level_vector(s: &PolyStmt, c: &Compute, instance: &[i64]) -> Vec<i64> {
    s.domain
        .dims()
        .iter()
        .map(|dim| {
            for (orig, expr) in &s.iter_map {
                if expr.as_single_dim() == Some(dim.as_str()) {
                    if let Some(idx) = c.iter_index(orig) {
                        return instance[idx];
                    }
                }
            }
            0
        })
        .collect()
}

/// Merge `second` into `first`: positional rename onto the first node's
/// dim names, then interleave at the innermost level.
fn fuse_nodes(first: &mut DseNode, second: DseNode) -> CompileResult<()> {
    let names = first.stmts[0].stmt.domain.dims().to_vec();
    for s in second.stmts {
        let mut renamed = crate::polyhedral::transform::rename_dims_positional(&s.stmt, &names)?;
        renamed.schedule = first.stmts[0].stmt.schedule.clone();
        first.stmts.push(DseStmt {
            stmt: renamed,
            deps: s.deps,
        });
    }
    let innermost = 2 * names.len();
    for (slot, s) in first.stmts.iter_mut().enumerate() {
        s.stmt.schedule.coords[innermost] = SchedCoord::Static(slot as i64);
    }
    first.members.extend(second.members);
    Ok(())
}

// ---------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------

/// Accepted optimization state for one node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeConfig {
    /// Ladder position; 0 = untouched baseline.
    pub step: usize,
    /// (level in the stage-1 loop order, factor) per unrollable dim.
    pub factors: Vec<(usize, i64)>,
    pub pipelined: bool,
}

pub struct DseOutcome {
    pub ir: LoopIR,
    /// Final transformed statements, for AST/IR printing.
    pub stmts: Vec<PolyStmt>,
    /// Carried dependences over each statement's final loop levels.
    pub deps: BTreeMap<String, Vec<NodeDep>>,
    pub report: DseReport,
    pub warnings: Vec<Diagnostic>,
}

/// Run both stages and return the attributed IR plus the report.
pub fn auto_dse(f: &Function, cfg: &DseConfig, table: &CostTable) -> CompileResult<DseOutcome> {
    let g = depgraph::build_dep_graph(f);
    let paths = depgraph::collect_paths(&g).map_err(|d| CompileError::Estimate(d.message))?;
    let mut nodes = initial_nodes(f, &g)?;
    let mut warnings: Vec<Diagnostic> = g.warnings.clone();

    if nodes.is_empty() {
        let built = build_ast(&[])?;
        let ir = lower_ast(&built.ast, &[], f)?;
        return Ok(DseOutcome {
            ir,
            stmts: Vec::new(),
            deps: BTreeMap::new(),
            report: DseReport {
                stage1_trace: Vec::new(),
                steps: Vec::new(),
                final_: FinalJson {
                    latency: 0,
                    resources: Default::default(),
                    parallelism: 1.0,
                    tiles: Vec::new(),
                    ii: Vec::new(),
                    nodes: Vec::new(),
                },
            },
            warnings,
        });
    }

    let stage1 = stage1_transform(f, &mut nodes, cfg)?;
    warnings.extend(stage1.warnings.iter().cloned());

    // condense compute-level paths onto nodes
    let node_of_compute: BTreeMap<usize, usize> = nodes
        .iter()
        .enumerate()
        .flat_map(|(ni, n)| n.members.iter().map(move |&ci| (ci, ni)))
        .collect();
    let node_paths: Vec<Vec<usize>> = paths
        .iter()
        .map(|p| {
            let mut np: Vec<usize> = Vec::new();
            for &ci in p {
                let ni = node_of_compute[&ci];
                if !np.contains(&ni) {
                    np.push(ni);
                }
            }
            np
        })
        .collect();

    let opts = ModelOptions {
        allow_reassoc: cfg.allow_reassoc,
    };

    let mut configs: Vec<NodeConfig> = vec![NodeConfig::default(); nodes.len()];
    let mut estimates: Vec<Estimate> = Vec::new();
    for (ni, node) in nodes.iter().enumerate() {
        estimates.push(estimate_config(f, node, &configs[ni], table, opts)?);
    }
    let mut opt_list: Vec<usize> = (0..nodes.len()).collect();
    let mut steps: Vec<StepRecord> = Vec::new();

    while !opt_list.is_empty() {
        // critical path (first max), then its longest optimizable node
        let mut critical: &[usize] = &[];
        let mut best = i64::MIN;
        for p in &node_paths {
            let lat: i64 = p.iter().map(|&n| estimates[n].latency).sum();
            if lat > best {
                best = lat;
                critical = p;
            }
        }
        let target = critical
            .iter()
            .filter(|n| opt_list.contains(n))
            .max_by_key(|&&n| estimates[n].latency)
            .or_else(|| {
                opt_list
                    .iter()
                    .max_by_key(|&&n| estimates[n].latency)
            })
            .copied();
        let Some(ni) = target else { break };

        if configs[ni].step >= cfg.factor_ladder.len() {
            opt_list.retain(|&x| x != ni);
            continue;
        }
        let mut candidate = configs[ni].clone();
        candidate.step += 1;
        candidate.pipelined = true;
        candidate.factors =
            ladder_factors(&nodes[ni], cfg.factor_ladder[candidate.step - 1], cfg, f)?;

        let cand_est = estimate_config(f, &nodes[ni], &candidate, table, opts)?;
        let mut cand_estimates = estimates.clone();
        cand_estimates[ni] = cand_est.clone();
        let mut cand_configs = configs.clone();
        cand_configs[ni] = candidate.clone();
        let cand_func =
            function_estimate(f, &nodes, &cand_configs, &cand_estimates, &node_paths, cfg)?;

        // A step is kept only when it fits the budget and strictly
        // reduces the node's modeled latency; otherwise it reverts and
        // the node leaves the optimization list.
        let improved = cand_est.latency < estimates[ni].latency;
        let accepted = improved && cand_func.resources.within(&cfg.budget);
        steps.push(StepRecord {
            node: nodes[ni].label(),
            directives: describe_config(&nodes[ni], &candidate),
            node_latency: cand_est.latency,
            estimate: EstimateJson::from(&cand_func),
            accepted,
        });
        if accepted {
            configs[ni] = candidate;
            estimates[ni] = cand_est;
            if configs[ni].step >= cfg.factor_ladder.len()
                || at_max_parallelism(&nodes[ni], &configs[ni], cfg, f)?
            {
                opt_list.retain(|&x| x != ni);
            }
        } else {
            opt_list.retain(|&x| x != ni);
        }
    }

    let (ir, stmts, deps, final_json) = assemble(f, &nodes, &configs, &estimates, &node_paths, cfg)?;
    Ok(DseOutcome {
        ir,
        stmts,
        deps,
        report: DseReport {
            stage1_trace: stage1.trace,
            steps,
            final_: final_json,
        },
        warnings,
    })
}

/// Levels of a node eligible for unrolling: no unknown dependence, and
/// no known carried distance unless it is a reassociable accumulation.
fn unrollable_levels(node: &DseNode, cfg: &DseConfig, f: &Function) -> CompileResult<Vec<usize>> {
    if !node.fully_shared() {
        return Ok(Vec::new());
    }
    let depth = node.stmts[0].stmt.depth();
    let mut ok = vec![true; depth];
    for s in &node.stmts {
        let dtype = f
            .placeholder(&compute_of(f, &s.stmt)?.dest)
            .map(|p| p.dtype);
        let reassoc = cfg.allow_reassoc || dtype.map(|d| !d.is_float()).unwrap_or(false);
        for d in &s.deps {
            if !d.known {
                ok.iter_mut().for_each(|x| *x = false);
                continue;
            }
            for (l, &delta) in d.entries.iter().enumerate() {
                if delta != 0 && !(d.accumulate && reassoc) {
                    ok[l] = false;
                }
            }
        }
    }
    Ok((0..depth).filter(|&l| ok[l]).collect())
}

fn node_box(node: &DseNode) -> CompileResult<Vec<(i64, i64)>> {
    crate::polyhedral::normalized_box(&node.stmts[0].stmt.domain)
        .ok_or_else(|| CompileError::Estimate("node has no constant loop box".into()))
}

/// Tile factors for one ladder value: each unrollable level gets
/// `min(value, extent)`.
fn ladder_factors(
    node: &DseNode,
    value: i64,
    cfg: &DseConfig,
    f: &Function,
) -> CompileResult<Vec<(usize, i64)>> {
    let levels = unrollable_levels(node, cfg, f)?;
    let boxes = node_box(node)?;
    Ok(levels
        .into_iter()
        .map(|l| {
            let extent = boxes[l].1 - boxes[l].0 + 1;
            (l, value.min(extent).max(1))
        })
        .collect())
}

fn at_max_parallelism(
    node: &DseNode,
    config: &NodeConfig,
    cfg: &DseConfig,
    f: &Function,
) -> CompileResult<bool> {
    let levels = unrollable_levels(node, cfg, f)?;
    if levels.is_empty() {
        return Ok(false);
    }
    let boxes = node_box(node)?;
    Ok(levels.iter().all(|&l| {
        let extent = boxes[l].1 - boxes[l].0 + 1;
        config
            .factors
            .iter()
            .any(|&(fl, fac)| fl == l && fac >= extent)
    }))
}

/// Apply a node config to its statements: tile each factored level, move
/// the unrolled point loops innermost, pipeline the innermost non-unrolled
/// level, and push the matching annotations.
fn configure_stmts(
    _f: &Function,
    node: &DseNode,
    config: &NodeConfig,
) -> CompileResult<(Vec<PolyStmt>, BTreeMap<String, Vec<NodeDep>>)> {
    let boxes = node_box(node)?;
    let mut stmts = Vec::new();
    let mut deps_out = BTreeMap::new();

    for s in &node.stmts {
        let mut stmt = s.stmt.clone();
        let mut deps = s.deps.clone();
        let mut unroll_dims: Vec<(String, i64)> = Vec::new();

        // full-extent factors unroll the level in place (no split)
        for &(l, fac) in &config.factors {
            let extent = boxes[l].1 - boxes[l].0 + 1;
            if fac > 1 && fac >= extent {
                unroll_dims.push((stmt.domain.dims()[l].clone(), extent));
            }
        }
        // partial factors split; descending keeps level indices valid
        let mut splits: Vec<(usize, i64)> = config
            .factors
            .iter()
            .copied()
            .filter(|&(l, fac)| {
                let extent = boxes[l].1 - boxes[l].0 + 1;
                fac > 1 && fac < extent
            })
            .collect();
        splits.sort_by_key(|&(l, _)| std::cmp::Reverse(l));
        for &(l, fac) in &splits {
            let dim = stmt.domain.dims()[l].clone();
            let outer = format!("{dim}0");
            let inner = format!("{dim}1");
            let extent = boxes[l].1 - boxes[l].0 + 1;
            stmt = crate::polyhedral::split(&stmt, &dim, fac, &outer, &inner)?;
            deps = split_deps(&deps, l, fac, extent);
            unroll_dims.push((inner, fac));
        }

        // unrolled loops innermost, preserving relative order
        let dims = stmt.domain.dims().to_vec();
        let (blocks, points): (Vec<String>, Vec<String>) = dims
            .iter()
            .cloned()
            .partition(|d| !unroll_dims.iter().any(|(u, _)| u == d));
        let order: Vec<String> = blocks.iter().chain(points.iter()).cloned().collect();
        if order != dims {
            let perm: Vec<usize> = order
                .iter()
                .map(|d| dims.iter().position(|x| x == d).unwrap())
                .collect();
            stmt = set_loop_order(stmt, &order)?;
            deps = permute_deps(&deps, &perm);
        }

        if config.pipelined {
            let target = stmt
                .domain
                .dims()
                .iter()
                .filter(|d| !unroll_dims.iter().any(|(u, _)| u == *d))
                .next_back()
                .cloned();
            if let Some(dim) = target {
                stmt.annotations.push(HwAnnotation::Pipeline { dim, ii: 1 });
            }
        }
        for (dim, fac) in &unroll_dims {
            stmt.annotations.push(HwAnnotation::Unroll {
                dim: dim.clone(),
                factor: *fac,
            });
        }
        deps_out.insert(
            stmt.name.clone(),
            deps.iter().map(TrackedDep::to_node_dep).collect(),
        );
        stmts.push(stmt);
    }
    Ok((stmts, deps_out))
}

/// Cyclic partition factors implied by a config: per array dimension,
/// the product of unroll factors of the iterators indexing it.
fn partition_factors(
    f: &Function,
    node: &DseNode,
    config: &NodeConfig,
) -> CompileResult<BTreeMap<String, Vec<i64>>> {
    let mut per_array: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    let boxes = node_box(node)?;
    for s in &node.stmts {
        let c = compute_of(f, &s.stmt)?;
        let mut factor_of_iter: BTreeMap<String, i64> = BTreeMap::new();
        for &(l, fac) in &config.factors {
            let extent = boxes[l].1 - boxes[l].0 + 1;
            let dim = s.stmt.domain.dims()[l].clone();
            for (orig, expr) in &s.stmt.iter_map {
                if expr.as_single_dim() == Some(dim.as_str()) {
                    factor_of_iter.insert(orig.clone(), fac.min(extent));
                }
            }
        }
        let mut visit = |array: &str, indices: &[crate::affine::AffineExpr]| {
            let Some(p) = f.placeholder(array) else {
                return;
            };
            let entry = per_array
                .entry(array.to_string())
                .or_insert_with(|| vec![1; p.rank()]);
            for (d, idx) in indices.iter().enumerate() {
                let mut fac = 1i64;
                for (name, _) in idx.dims() {
                    fac = fac.saturating_mul(factor_of_iter.get(name).copied().unwrap_or(1));
                }
                entry[d] = entry[d].max(fac.min(p.shape[d]));
            }
        };
        visit(&c.dest, &c.dest_indices);
        for (array, indices) in c.rhs.loads() {
            visit(array, indices);
        }
    }
    per_array.retain(|_, factors| factors.iter().any(|&fac| fac > 1));
    Ok(per_array)
}

/// Estimate one node under a config: lower it standalone and run the
/// analytical model over its nest.
fn estimate_config(
    f: &Function,
    node: &DseNode,
    config: &NodeConfig,
    table: &CostTable,
    opts: ModelOptions,
) -> CompileResult<Estimate> {
    let (stmts, deps) = configure_stmts(f, node, config)?;
    let mut local = stmts;
    for s in &mut local {
        s.schedule.coords[0] = SchedCoord::Static(0);
    }
    let built = build_ast(&local)?;
    let ir = lower_ast(&built.ast, &local, f)?;
    let mut total = Estimate::empty();
    for root in &ir.roots {
        let e = estimate_node(root, f, &deps, table, opts)?;
        total.latency += e.latency;
        total.resources = total.resources.add(e.resources);
        total.achieved_ii.extend(e.achieved_ii);
    }
    let tiles = node_tiles(node, config);
    let ii = total
        .achieved_ii
        .iter()
        .map(|&(_, ii)| ii)
        .max()
        .unwrap_or(1);
    total.parallelism = parallelism(&tiles, ii);
    Ok(total)
}

/// Tile/unroll factor vector over the node's stage-1 loop order.
fn node_tiles(node: &DseNode, config: &NodeConfig) -> Vec<i64> {
    let depth = node.stmts[0].stmt.depth();
    let mut tiles = vec![1i64; depth];
    for &(l, fac) in &config.factors {
        if l < depth {
            tiles[l] = fac;
        }
    }
    tiles
}

fn describe_config(node: &DseNode, config: &NodeConfig) -> Vec<String> {
    let mut out = Vec::new();
    let dims = node.stmts[0].stmt.domain.dims();
    for &(l, fac) in &config.factors {
        if fac > 1 {
            out.push(format!("tile {}={fac}", dims[l]));
        }
    }
    if config.pipelined {
        out.push("pipeline innermost II=1".to_string());
    }
    out
}

/// Function-level estimate including the BRAM banks the current partition
/// factors imply (one bank per slice, max factor per dim across nodes).
fn function_estimate(
    f: &Function,
    nodes: &[DseNode],
    configs: &[NodeConfig],
    estimates: &[Estimate],
    node_paths: &[Vec<usize>],
    cfg: &DseConfig,
) -> CompileResult<Estimate> {
    let mut est = estimate_function(estimates, node_paths, cfg.reuse);
    let merged = merged_partitions(f, nodes, configs)?;
    let bram: i64 = f
        .placeholders
        .iter()
        .map(|p| {
            merged
                .get(&p.name)
                .map(|fs| fs.iter().product::<i64>())
                .unwrap_or(1)
        })
        .sum();
    est.resources.bram += bram;
    Ok(est)
}

fn merged_partitions(
    f: &Function,
    nodes: &[DseNode],
    configs: &[NodeConfig],
) -> CompileResult<BTreeMap<String, Vec<i64>>> {
    let mut merged: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    for (node, config) in nodes.iter().zip(configs) {
        for (array, factors) in partition_factors(f, node, config)? {
            let entry = merged
                .entry(array)
                .or_insert_with(|| vec![1; factors.len()]);
            for (d, &fac) in factors.iter().enumerate() {
                entry[d] = entry[d].max(fac);
            }
        }
    }
    Ok(merged)
}

/// Lower the final configuration to one attributed LoopIR and build the
/// report's `final` section.
fn assemble(
    f: &Function,
    nodes: &[DseNode],
    configs: &[NodeConfig],
    estimates: &[Estimate],
    node_paths: &[Vec<usize>],
    cfg: &DseConfig,
) -> CompileResult<(LoopIR, Vec<PolyStmt>, BTreeMap<String, Vec<NodeDep>>, FinalJson)> {
    let mut all_stmts: Vec<PolyStmt> = Vec::new();
    let mut all_deps: BTreeMap<String, Vec<NodeDep>> = BTreeMap::new();
    for (node, config) in nodes.iter().zip(configs) {
        let (stmts, deps) = configure_stmts(f, node, config)?;
        all_stmts.extend(stmts);
        all_deps.extend(deps);
    }
    let built = build_ast(&all_stmts)?;
    let mut ir = lower_ast(&built.ast, &all_stmts, f)?;
    for (array, factors) in merged_partitions(f, nodes, configs)? {
        ir = attach_hw(
            &ir,
            &ScheduleDirective::Partition {
                array,
                factors,
                kind: PartitionKind::Cyclic,
            },
        )?;
    }

    let func_est = function_estimate(f, nodes, configs, estimates, node_paths, cfg)?;
    let mut node_results = Vec::new();
    let mut tiles_out = Vec::new();
    let mut ii_out = Vec::new();
    for ((node, config), est) in nodes.iter().zip(configs).zip(estimates) {
        let tiles = node_tiles(node, config);
        let ii = est
            .achieved_ii
            .iter()
            .map(|&(_, ii)| ii)
            .max()
            .unwrap_or(1);
        node_results.push(NodeResultJson {
            node: node.label(),
            tiles: tiles.clone(),
            ii,
            parallelism: parallelism(&tiles, ii).to_f64(),
            latency: est.latency,
        });
        tiles_out.push(tiles);
        ii_out.push(ii);
    }
    let final_json = FinalJson {
        latency: func_est.latency,
        resources: func_est.resources.into(),
        parallelism: node_results
            .iter()
            .map(|n| n.parallelism)
            .fold(1.0, f64::max),
        tiles: tiles_out,
        ii: ii_out,
        nodes: node_results,
    };
    Ok((ir, all_stmts, all_deps, final_json))
}
