//! Compilation driver: frontend -> dependence graph -> polyhedral ->
//! loop IR -> estimates, with either user-specified directives or the
//! automatic DSE deciding the transformations.

use std::collections::BTreeMap;

use crate::depgraph::{self, DepGraph};
use crate::diag::{CompileError, CompileResult, Diagnostic};
use crate::dse::{self, DseConfig, TrackedDep};
use crate::frontend::{AfterLevel, Function, ScheduleDirective};
use crate::loopir::{attach_hw, lower_ast, LoopIR};
use crate::perfmodel::{
    estimate_node, parallelism, CostTable, Estimate, ModelOptions, NodeDep,
};
use crate::polyhedral::{self, build_ast, lift, PolyAst, PolyStmt, SchedCoord};
use crate::report::{DseReport, EstimateJson, FunctionEstimatesJson, NodeEstimateJson};

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub dse: bool,
    pub dse_config: DseConfig,
    pub cost_table: CostTable,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            dse: false,
            dse_config: DseConfig::default(),
            cost_table: CostTable::default(),
        }
    }
}

pub struct CompileOutput {
    pub graph: DepGraph,
    pub paths: Vec<Vec<usize>>,
    pub stmts: Vec<PolyStmt>,
    pub ast: PolyAst,
    pub ir: LoopIR,
    pub node_estimates: Vec<(String, Estimate)>,
    pub function_estimate: Estimate,
    pub dse_report: Option<DseReport>,
    pub warnings: Vec<Diagnostic>,
    /// DEPENDENCE-pragma hints: statements whose loop-carried dependence
    /// the tools should know about.
    pub hints: Vec<String>,
}

impl CompileOutput {
    pub fn estimates_json(&self) -> FunctionEstimatesJson {
        FunctionEstimatesJson {
            nodes: self
                .node_estimates
                .iter()
                .map(|(name, e)| NodeEstimateJson {
                    node: name.clone(),
                    estimate: EstimateJson::from(e),
                })
                .collect(),
            function: EstimateJson::from(&self.function_estimate),
        }
    }
}

/// Compile a validated function end to end.
pub fn compile(f: &Function, opts: &CompileOptions) -> CompileResult<CompileOutput> {
    let graph = depgraph::build_dep_graph(f);
    let paths = depgraph::collect_paths(&graph).map_err(|d| CompileError::Estimate(d.message))?;
    let mut warnings: Vec<Diagnostic> = graph.warnings.clone();

    let hints: Vec<String> = graph
        .nodes
        .iter()
        .filter(|n| !n.attrs.self_deps.is_empty())
        .map(|n| {
            format!(
                "`{}` has loop-carried dependences; a DEPENDENCE pragma may help the HLS scheduler",
                n.name
            )
        })
        .collect();

    let run_dse = opts.dse || f.has_auto_dse();
    if run_dse {
        let ignored = f
            .directives
            .iter()
            .filter(|d| {
                !matches!(
                    d,
                    ScheduleDirective::After { .. } | ScheduleDirective::AutoDse { .. }
                )
            })
            .count();
        if ignored > 0 {
            warnings.push(Diagnostic::warning(format!(
                "auto DSE ignores {ignored} manual scheduling directive(s); only `after` ordering is kept"
            )));
        }
        let outcome = dse::auto_dse(f, &opts.dse_config, &opts.cost_table)?;
        warnings.extend(outcome.warnings);
        let built = build_ast(&outcome.stmts)?;
        let (node_estimates, function_estimate) =
            estimate_groups(f, &outcome.stmts, &outcome.deps, &paths, opts)?;
        Ok(CompileOutput {
            graph,
            paths,
            stmts: outcome.stmts,
            ast: built.ast,
            ir: outcome.ir,
            node_estimates,
            function_estimate,
            dse_report: Some(outcome.report),
            warnings,
            hints,
        })
    } else {
        let (stmts, deps, partitions) = apply_directives(f)?;
        let built = build_ast(&stmts)?;
        warnings.extend(built.warnings.iter().cloned());
        let mut ir = lower_ast(&built.ast, &stmts, f)?;
        for d in &partitions {
            ir = attach_hw(&ir, d)?;
        }
        let node_deps: BTreeMap<String, Vec<NodeDep>> = deps
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(TrackedDep::to_node_dep).collect()))
            .collect();
        let (node_estimates, function_estimate) =
            estimate_groups(f, &stmts, &node_deps, &paths, opts)?;
        Ok(CompileOutput {
            graph,
            paths,
            stmts,
            ast: built.ast,
            ir,
            node_estimates,
            function_estimate,
            dse_report: None,
            warnings,
            hints,
        })
    }
}

type DepsByName = BTreeMap<String, Vec<TrackedDep>>;

/// Apply the schedule block in source order, tracking dependences through
/// each transformation.
fn apply_directives(
    f: &Function,
) -> CompileResult<(Vec<PolyStmt>, DepsByName, Vec<ScheduleDirective>)> {
    let mut stmts: Vec<PolyStmt> = f
        .computes
        .iter()
        .enumerate()
        .map(|(i, c)| lift(c, i, i as i64))
        .collect();
    let mut deps: DepsByName = f
        .computes
        .iter()
        .map(|c| (c.name.clone(), dse::initial_deps(c)))
        .collect();
    let mut partitions = Vec::new();

    let idx_of = |name: &str| -> CompileResult<usize> {
        f.compute_index(name)
            .ok_or_else(|| CompileError::UnknownCompute(name.to_string()))
    };

    for d in &f.directives {
        match d {
            ScheduleDirective::Interchange { compute, a, b } => {
                let i = idx_of(compute)?;
                let s = stmts[i].clone();
                let pa = s
                    .domain
                    .dim_index(a)
                    .ok_or_else(|| CompileError::UnknownDim(a.clone()))?;
                let pb = s
                    .domain
                    .dim_index(b)
                    .ok_or_else(|| CompileError::UnknownDim(b.clone()))?;
                stmts[i] = polyhedral::interchange(&s, a, b)?;
                let mut perm: Vec<usize> = (0..s.depth()).collect();
                perm.swap(pa, pb);
                let entry = deps.get_mut(compute).unwrap();
                *entry = dse::permute_deps(entry, &perm);
            }
            ScheduleDirective::Split {
                compute,
                dim,
                factor,
                outer,
                inner,
            } => {
                let i = idx_of(compute)?;
                let s = stmts[i].clone();
                let level = s
                    .domain
                    .dim_index(dim)
                    .ok_or_else(|| CompileError::UnknownDim(dim.clone()))?;
                let extent = level_extent(&s, level);
                stmts[i] = polyhedral::split(&s, dim, *factor, outer, inner)?;
                let entry = deps.get_mut(compute).unwrap();
                *entry = dse::split_deps(entry, level, *factor, extent);
            }
            ScheduleDirective::Tile {
                compute,
                i: di,
                j: dj,
                ti,
                tj,
                i0,
                j0,
                i1,
                j1,
            } => {
                let i = idx_of(compute)?;
                let s = stmts[i].clone();
                let li = s
                    .domain
                    .dim_index(di)
                    .ok_or_else(|| CompileError::UnknownDim(di.clone()))?;
                let lj = s
                    .domain
                    .dim_index(dj)
                    .ok_or_else(|| CompileError::UnknownDim(dj.clone()))?;
                let (ei, ej) = (level_extent(&s, li), level_extent(&s, lj));
                let tiled = polyhedral::tile(&s, di, dj, *ti, *tj, i0, j0, i1, j1)?;
                // mirror tile's dep mapping: split j, split i, then the
                // reorder (.., i0, j0, .., i1, j1, ..)
                let entry = deps.get_mut(compute).unwrap();
                let mut nd = dse::split_deps(entry, lj, *tj, ej);
                nd = dse::split_deps(&nd, li, *ti, ei);
                // dims after the two splits, before reordering
                let mut dims_before: Vec<String> = s.domain.dims().to_vec();
                dims_before.splice(lj..=lj, [j0.clone(), j1.clone()]);
                dims_before.splice(li..=li, [i0.clone(), i1.clone()]);
                let target = tiled.domain.dims().to_vec();
                let perm: Vec<usize> = target
                    .iter()
                    .map(|d| dims_before.iter().position(|x| x == d).unwrap())
                    .collect();
                *entry = dse::permute_deps(&nd, &perm);
                stmts[i] = tiled;
            }
            ScheduleDirective::Skew {
                compute,
                i: di,
                j: dj,
                t1,
                t2,
                ni,
                nj,
            } => {
                let i = idx_of(compute)?;
                let s = stmts[i].clone();
                let pi = s
                    .domain
                    .dim_index(di)
                    .ok_or_else(|| CompileError::UnknownDim(di.clone()))?;
                let pj = s
                    .domain
                    .dim_index(dj)
                    .ok_or_else(|| CompileError::UnknownDim(dj.clone()))?;
                stmts[i] = polyhedral::skew(&s, di, dj, *t1, *t2, ni, nj)?;
                let entry = deps.get_mut(compute).unwrap();
                *entry = dse::skew_deps(entry, pi, pj, *t1);
            }
            ScheduleDirective::After {
                compute,
                base,
                level,
            } => {
                let ci = idx_of(compute)?;
                let bi = idx_of(base)?;
                let lvl = match level {
                    AfterLevel::Dim(name) => Some(name.as_str()),
                    AfterLevel::Root => None,
                };
                let (moved, _) = polyhedral::order_after(&stmts[ci], &stmts[bi], lvl)?;
                stmts[ci] = moved;
            }
            ScheduleDirective::Pipeline { compute, dim, ii } => {
                let i = idx_of(compute)?;
                if !stmts[i].has_dim(dim) {
                    return Err(CompileError::UnknownDim(dim.clone()));
                }
                stmts[i]
                    .annotations
                    .push(polyhedral::HwAnnotation::Pipeline {
                        dim: dim.clone(),
                        ii: *ii,
                    });
            }
            ScheduleDirective::Unroll {
                compute,
                dim,
                factor,
            } => {
                let i = idx_of(compute)?;
                if !stmts[i].has_dim(dim) {
                    return Err(CompileError::UnknownDim(dim.clone()));
                }
                stmts[i].annotations.push(polyhedral::HwAnnotation::Unroll {
                    dim: dim.clone(),
                    factor: *factor,
                });
            }
            ScheduleDirective::Partition { .. } => partitions.push(d.clone()),
            ScheduleDirective::AutoDse { .. } => {}
        }
    }
    Ok((stmts, deps, partitions))
}

fn level_extent(s: &PolyStmt, level: usize) -> i64 {
    polyhedral::normalized_box(&s.domain)
        .and_then(|b| b.get(level).map(|&(lo, hi)| hi - lo + 1))
        .unwrap_or(i64::MAX)
}

/// Group statements by their root static coordinate (shared nests are
/// one group) and estimate each group's nest, then the whole function.
fn estimate_groups(
    f: &Function,
    stmts: &[PolyStmt],
    node_deps: &BTreeMap<String, Vec<NodeDep>>,
    paths: &[Vec<usize>],
    opts: &CompileOptions,
) -> CompileResult<(Vec<(String, Estimate)>, Estimate)> {
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, s) in stmts.iter().enumerate() {
        let c0 = match s.schedule.coords[0] {
            SchedCoord::Static(v) => v,
            _ => 0,
        };
        groups.entry(c0).or_default().push(i);
    }

    let model_opts = ModelOptions {
        allow_reassoc: opts.dse_config.allow_reassoc,
    };

    let mut per_group: Vec<(String, Vec<usize>, Estimate)> = Vec::new();
    for members in groups.values() {
        let mut local: Vec<PolyStmt> = members.iter().map(|&i| stmts[i].clone()).collect();
        for s in &mut local {
            s.schedule.coords[0] = SchedCoord::Static(0);
        }
        let built = build_ast(&local)?;
        let ir = lower_ast(&built.ast, &local, f)?;
        let mut est = Estimate::empty();
        for root in &ir.roots {
            let e = estimate_node(root, f, node_deps, &opts.cost_table, model_opts)?;
            est.latency += e.latency;
            est.resources = est.resources.add(e.resources);
            est.achieved_ii.extend(e.achieved_ii);
        }
        let ii = est
            .achieved_ii
            .iter()
            .map(|&(_, ii)| ii)
            .max()
            .unwrap_or(1);
        est.parallelism = parallelism(&[1], ii.max(1));
        let label: Vec<&str> = members.iter().map(|&i| stmts[i].name.as_str()).collect();
        per_group.push((label.join("+"), members.clone(), est));
    }

    // map compute-level paths onto groups
    let group_of_stmt: BTreeMap<usize, usize> = per_group
        .iter()
        .enumerate()
        .flat_map(|(gi, (_, members, _))| members.iter().map(move |&m| (m, gi)))
        .collect();
    let compute_to_stmt: BTreeMap<usize, usize> = stmts
        .iter()
        .enumerate()
        .filter_map(|(si, s)| f.compute_index(&s.name).map(|ci| (ci, si)))
        .collect();
    let group_paths: Vec<Vec<usize>> = if paths.is_empty() {
        vec![(0..per_group.len()).collect()]
    } else {
        paths
            .iter()
            .map(|p| {
                let mut gp = Vec::new();
                for &ci in p {
                    if let Some(&si) = compute_to_stmt.get(&ci) {
                        let gi = group_of_stmt[&si];
                        if !gp.contains(&gi) {
                            gp.push(gi);
                        }
                    }
                }
                gp
            })
            .collect()
    };

    let estimates: Vec<Estimate> = per_group.iter().map(|(_, _, e)| e.clone()).collect();
    let function_estimate =
        crate::perfmodel::estimate_function(&estimates, &group_paths, opts.dse_config.reuse);
    Ok((
        per_group
            .into_iter()
            .map(|(name, _, est)| (name, est))
            .collect(),
        function_estimate,
    ))
}
