//! Analytical latency and resource estimation over the loop IR.
//!
//! The model is deliberately simple and fully documented here, since it
//! drives the second DSE stage:
//!
//! * statement depth `D` = critical-path latency of its expression tree;
//! * a pipelined loop at level `l` runs `N` initiations, where `N` is the
//!   product of the trip counts of `l` and everything inside it divided
//!   by inner unroll factors, for `latency = (N-1)*II + D`;
//! * `achieved II = max(target II, recurrence II)`, with
//!   `recurrence II = ceil(D_dep / delta)` where `delta` is the flattened
//!   iteration distance of a dependence carried at or inside the
//!   pipelined level and `D_dep` the latency of the dependence-carrying
//!   chain (the accumulation op for reduction dependences, the full
//!   statement depth otherwise); an unknown distance forces
//!   `recurrence II = D_dep`;
//! * non-pipelined loops multiply the latency of their body by their
//!   trip count; unrolling divides trip counts and multiplies resources;
//! * each partition slice of an array costs one BRAM bank.
//!
//! Trip counts fold through interval arithmetic, so non-divisible tiles
//! estimate with their worst-case trip.

use std::collections::BTreeMap;
use std::fmt;

use crate::diag::{CompileError, CompileResult};
use crate::frontend::{AssignOp, BinOp, DataType, Function};
use crate::loopir::{LoopChild, LoopIR, LoopNode, PragmaAttr, ScalarExpr, StmtNode};

/// Latency and resource cost of one operator instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCost {
    pub latency: i64,
    pub dsp: i64,
    pub lut: i64,
    pub ff: i64,
}

/// Cost table keyed by `<dtype-class>.<op>`, e.g. `f32.add`, `int.mul`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    entries: BTreeMap<String, OpCost>,
}

impl Default for CostTable {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        let mut put = |k: &str, latency, dsp, lut, ff| {
            entries.insert(k.to_string(), OpCost { latency, dsp, lut, ff });
        };
        put("f32.add", 4, 2, 200, 100);
        put("f32.mul", 3, 3, 150, 80);
        put("f32.div", 16, 0, 800, 400);
        put("f64.add", 5, 3, 400, 200);
        put("f64.mul", 4, 11, 600, 300);
        put("f64.div", 16, 0, 1600, 800);
        put("int.add", 1, 0, 32, 16);
        put("int.mul", 3, 3, 100, 50);
        put("int.div", 16, 0, 800, 400);
        CostTable { entries }
    }
}

impl CostTable {
    fn class(dtype: DataType) -> &'static str {
        match dtype {
            DataType::F32 => "f32",
            DataType::F64 => "f64",
            _ => "int",
        }
    }

    pub fn cost(&self, dtype: DataType, op: BinOp) -> OpCost {
        let op_name = match op {
            BinOp::Add | BinOp::Sub => "add",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        };
        let key = format!("{}.{}", Self::class(dtype), op_name);
        self.entries
            .get(&key)
            .copied()
            .unwrap_or(OpCost { latency: 1, dsp: 0, lut: 0, ff: 0 })
    }

    pub fn set(&mut self, key: &str, cost: OpCost) {
        self.entries.insert(key.to_string(), cost);
    }

    /// Parse `dtype.op = latency,dsp,lut,ff` lines; `#` starts a comment.
    pub fn apply_config(&mut self, text: &str) -> CompileResult<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CompileError::Estimate(format!("cost table line {}: missing `=`", lineno + 1))
            })?;
            let nums: Vec<i64> = value
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| {
                    CompileError::Estimate(format!(
                        "cost table line {}: expected latency,dsp,lut,ff",
                        lineno + 1
                    ))
                })?;
            if nums.len() != 4 {
                return Err(CompileError::Estimate(format!(
                    "cost table line {}: expected 4 numbers",
                    lineno + 1
                )));
            }
            self.set(
                key.trim(),
                OpCost {
                    latency: nums[0].max(1),
                    dsp: nums[1].max(0),
                    lut: nums[2].max(0),
                    ff: nums[3].max(0),
                },
            );
        }
        Ok(())
    }
}

/// Available resources on the target device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceBudget {
    pub dsp: i64,
    pub lut: i64,
    pub ff: i64,
    pub bram: i64,
}

impl Default for ResourceBudget {
    /// XC7Z020: 220 DSPs, 53200 LUTs, 106400 FFs, 280 BRAM banks.
    fn default() -> Self {
        ResourceBudget {
            dsp: 220,
            lut: 53200,
            ff: 106400,
            bram: 280,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResourceVec {
    pub dsp: i64,
    pub lut: i64,
    pub ff: i64,
    pub bram: i64,
}

impl ResourceVec {
    pub fn add(self, other: ResourceVec) -> ResourceVec {
        ResourceVec {
            dsp: self.dsp + other.dsp,
            lut: self.lut + other.lut,
            ff: self.ff + other.ff,
            bram: self.bram + other.bram,
        }
    }

    pub fn scale(self, k: i64) -> ResourceVec {
        ResourceVec {
            dsp: self.dsp * k,
            lut: self.lut * k,
            ff: self.ff * k,
            bram: self.bram * k,
        }
    }

    pub fn within(self, budget: &ResourceBudget) -> bool {
        self.dsp <= budget.dsp
            && self.lut <= budget.lut
            && self.ff <= budget.ff
            && self.bram <= budget.bram
    }
}

/// Exact nonnegative rational, for the parallelism metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den != 0);
        let g = gcd(num.max(1), den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn one() -> Ratio {
        Ratio { num: 1, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_integer(self) -> Option<u64> {
        (self.den == 1).then_some(self.num)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}", self.to_f64())
        }
    }
}

/// Parallelism degree: product of tile/unroll factors over achieved II.
pub fn parallelism(tiles: &[i64], achieved_ii: i64) -> Ratio {
    let product: u64 = tiles.iter().map(|&t| t.max(1) as u64).product();
    Ratio::new(product, achieved_ii.max(1) as u64)
}

/// A loop-carried dependence expressed over the loop levels of one
/// statement's nest path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDep {
    pub entries: Vec<i64>,
    pub known: bool,
    /// From an accumulate destination; dissolves under reassociated
    /// full unrolling.
    pub accumulate: bool,
}

/// Modeling options.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelOptions {
    pub allow_reassoc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub latency: i64,
    pub resources: ResourceVec,
    /// Achieved II per pipelined loop, by iv name.
    pub achieved_ii: Vec<(String, i64)>,
    pub parallelism: Ratio,
}

impl Estimate {
    pub fn empty() -> Estimate {
        Estimate {
            latency: 0,
            resources: ResourceVec::default(),
            achieved_ii: Vec::new(),
            parallelism: Ratio::one(),
        }
    }
}

/// Latency and resources of one loop-nest root.
///
/// `deps` maps statement names to their carried dependences over the
/// statement's loop path (outermost first).
pub fn estimate_node(
    root: &LoopChild,
    f: &Function,
    deps: &BTreeMap<String, Vec<NodeDep>>,
    table: &CostTable,
    opts: ModelOptions,
) -> CompileResult<Estimate> {
    let mut est = Estimate::empty();
    let ctx = Walk {
        f,
        deps,
        table,
        opts,
    };
    let intervals = BTreeMap::new();
    let (lat, res) = ctx.child(root, &Path::default(), &intervals, &mut est)?;
    est.latency = lat.max(1);
    est.resources = res;
    Ok(est)
}

/// Enclosing-loop state while walking a nest.
#[derive(Debug, Clone, Default)]
struct Path {
    /// (trip count, unroll factor, fully unrolled) per level.
    levels: Vec<(i64, i64, bool)>,
}

struct Walk<'a> {
    f: &'a Function,
    deps: &'a BTreeMap<String, Vec<NodeDep>>,
    table: &'a CostTable,
    opts: ModelOptions,
}

impl<'a> Walk<'a> {
    fn child(
        &self,
        child: &LoopChild,
        path: &Path,
        intervals: &BTreeMap<String, (i64, i64)>,
        est: &mut Estimate,
    ) -> CompileResult<(i64, ResourceVec)> {
        match child {
            LoopChild::Stmt(s) => {
                let d = self.stmt_depth(s)?;
                let res = self.stmt_resources(s)?;
                Ok((d.max(1), res))
            }
            LoopChild::If(node) => {
                let mut lat = 0i64;
                let mut res = ResourceVec::default();
                for c in &node.body {
                    let (l, r) = self.child(c, path, intervals, est)?;
                    lat += l;
                    res = res.add(r);
                }
                Ok((lat, res))
            }
            LoopChild::Loop(l) => self.loop_node(l, path, intervals, est),
        }
    }

    fn loop_node(
        &self,
        l: &LoopNode,
        path: &Path,
        intervals: &BTreeMap<String, (i64, i64)>,
        est: &mut Estimate,
    ) -> CompileResult<(i64, ResourceVec)> {
        let trip = self.max_trip(l, intervals)?;
        let unroll = l.attrs.iter().find_map(|a| match a {
            PragmaAttr::Unroll { factor, .. } => Some(*factor),
            _ => None,
        });
        let pipeline = l.attrs.iter().find_map(|a| match a {
            PragmaAttr::Pipeline { ii } => Some(*ii),
            _ => None,
        });
        let u = unroll.unwrap_or(1).max(1);
        let full = u >= trip;
        let mut inner_intervals = intervals.clone();
        if let Some(iv) = self.loop_interval(l, intervals) {
            inner_intervals.insert(l.iv.clone(), iv);
        }
        let mut sub_path = path.clone();
        sub_path.levels.push((trip, u, full));

        if let Some(target_ii) = pipeline {
            // flatten: everything inside issues through one pipeline
            let level = path.levels.len();
            let (n, depth, res, ii_floor) =
                self.pipeline_body(&l.body, &sub_path, &inner_intervals, level)?;
            let achieved = target_ii.max(ii_floor);
            est.achieved_ii.push((l.iv.clone(), achieved));
            let n = (n * div_ceil(trip, u)).max(1);
            let latency = (n - 1) * achieved + depth.max(1);
            Ok((latency, res.scale(u)))
        } else {
            let mut lat = 0i64;
            let mut res = ResourceVec::default();
            for c in &l.body {
                let (cl, cr) = self.child(c, &sub_path, &inner_intervals, est)?;
                lat += cl;
                res = res.add(cr);
            }
            let eff_trip = div_ceil(trip, u);
            Ok((lat * eff_trip, res.scale(u)))
        }
    }

    /// Initiations, pipeline depth, resources, and the recurrence II
    /// floor for the body of a pipelined loop (the loop itself is
    /// `sub_path`'s last level, at `pipeline_level`).
    fn pipeline_body(
        &self,
        body: &[LoopChild],
        path: &Path,
        intervals: &BTreeMap<String, (i64, i64)>,
        pipeline_level: usize,
    ) -> CompileResult<(i64, i64, ResourceVec, i64)> {
        let mut initiations = 0i64;
        let mut depth = 0i64;
        let mut res = ResourceVec::default();
        let mut ii_floor = 1i64;
        for c in body {
            match c {
                LoopChild::Stmt(s) => {
                    let d = self.stmt_depth(s)?;
                    depth = depth.max(d);
                    initiations += 1;
                    res = res.add(self.stmt_resources(s)?);
                    ii_floor = ii_floor.max(self.recurrence_ii(s, path, pipeline_level)?);
                }
                LoopChild::If(node) => {
                    let (n, d, r, ii) =
                        self.pipeline_body(&node.body, path, intervals, pipeline_level)?;
                    initiations += n;
                    depth = depth.max(d);
                    res = res.add(r);
                    ii_floor = ii_floor.max(ii);
                }
                LoopChild::Loop(l) => {
                    let trip = self.max_trip(l, intervals)?;
                    let unroll = l
                        .attrs
                        .iter()
                        .find_map(|a| match a {
                            PragmaAttr::Unroll { factor, .. } => Some(*factor),
                            _ => None,
                        })
                        .unwrap_or(1)
                        .max(1);
                    let full = unroll >= trip;
                    let mut inner_intervals = intervals.clone();
                    if let Some(iv) = self.loop_interval(l, intervals) {
                        inner_intervals.insert(l.iv.clone(), iv);
                    }
                    let mut sub = path.clone();
                    sub.levels.push((trip, unroll, full));
                    let (n, d, r, ii) =
                        self.pipeline_body(&l.body, &sub, &inner_intervals, pipeline_level)?;
                    initiations += n * div_ceil(trip, unroll);
                    depth = depth.max(d);
                    res = res.add(r.scale(unroll));
                    ii_floor = ii_floor.max(ii);
                }
            }
        }
        Ok((initiations, depth, res, ii_floor))
    }

    /// Recurrence II floor imposed by the statement's carried
    /// dependences on a pipeline at `pipeline_level` of its path.
    fn recurrence_ii(&self, s: &StmtNode, path: &Path, pipeline_level: usize) -> CompileResult<i64> {
        let Some(deps) = self.deps.get(&s.name) else {
            return Ok(1);
        };
        let dtype = self.dtype_of(s)?;
        let full_depth = self.stmt_depth(s)?;
        let acc_latency = self.table.cost(dtype, BinOp::Add).latency;
        let mut floor = 1i64;
        for dep in deps {
            let chain = if dep.accumulate { acc_latency } else { full_depth };
            if !dep.known {
                floor = floor.max(chain);
                continue;
            }
            let entries = &dep.entries;
            if entries.len() != path.levels.len() {
                return Err(CompileError::Estimate(format!(
                    "dependence for `{}` has {} levels, nest has {}",
                    s.name,
                    entries.len(),
                    path.levels.len()
                )));
            }
            let Some(carry) = entries.iter().position(|&d| d != 0) else {
                continue;
            };
            if carry < pipeline_level {
                continue; // carried outside the pipeline
            }
            // a distance no trip count can realize never recurs
            if entries
                .iter()
                .zip(&path.levels)
                .any(|(&d, &(trip, _, _))| d.abs() >= trip.max(1))
            {
                continue;
            }
            // reassociated full unrolling turns the chain into a tree
            if self.opts.allow_reassoc
                && dep.accumulate
                && entries
                    .iter()
                    .zip(&path.levels)
                    .all(|(&d, &(_, _, full))| d == 0 || full)
            {
                continue;
            }
            // flattened iteration distance inside the pipeline
            let mut delta = 0i64;
            for m in pipeline_level..entries.len() {
                let inner: i64 = path.levels[m + 1..].iter().map(|&(t, _, _)| t.max(1)).product();
                delta += entries[m] * inner;
            }
            if delta <= 0 {
                continue;
            }
            floor = floor.max(div_ceil(chain, delta));
        }
        Ok(floor)
    }

    fn dtype_of(&self, s: &StmtNode) -> CompileResult<DataType> {
        Ok(self
            .f
            .placeholder(&s.dest)
            .ok_or_else(|| CompileError::UnknownArray(s.dest.clone()))?
            .dtype)
    }

    /// Critical-path latency of the statement's expression tree, plus
    /// the accumulation op for `+=` destinations.
    fn stmt_depth(&self, s: &StmtNode) -> CompileResult<i64> {
        let dtype = self.dtype_of(s)?;
        let mut d = expr_depth(&s.rhs, dtype, self.table);
        if s.op == AssignOp::Accumulate {
            d += self.table.cost(dtype, BinOp::Add).latency;
        }
        Ok(d)
    }

    /// Resources of one copy of the statement.
    fn stmt_resources(&self, s: &StmtNode) -> CompileResult<ResourceVec> {
        let dtype = self.dtype_of(s)?;
        let mut r = expr_resources(&s.rhs, dtype, self.table);
        if s.op == AssignOp::Accumulate {
            let c = self.table.cost(dtype, BinOp::Add);
            r = r.add(ResourceVec {
                dsp: c.dsp,
                lut: c.lut,
                ff: c.ff,
                bram: 0,
            });
        }
        Ok(r)
    }

    /// Worst-case trip count, folding bounds through interval arithmetic.
    fn max_trip(
        &self,
        l: &LoopNode,
        intervals: &BTreeMap<String, (i64, i64)>,
    ) -> CompileResult<i64> {
        if let Some(t) = l.const_trip() {
            return Ok(t.max(0));
        }
        let iv = self
            .loop_interval(l, intervals)
            .ok_or_else(|| CompileError::Estimate(format!("non-constant trip count for `{}`", l.iv)))?;
        Ok((iv.1 - iv.0 + 1).max(0))
    }

    fn loop_interval(
        &self,
        l: &LoopNode,
        intervals: &BTreeMap<String, (i64, i64)>,
    ) -> Option<(i64, i64)> {
        crate::polyhedral::astbuild::bound_interval_pub(&l.lower, &l.upper, intervals)
    }
}

fn expr_depth(e: &ScalarExpr, dtype: DataType, table: &CostTable) -> i64 {
    match e {
        ScalarExpr::Const(_) | ScalarExpr::Affine(_) | ScalarExpr::Load { .. } => 0,
        ScalarExpr::Neg(inner) => expr_depth(inner, dtype, table),
        ScalarExpr::Bin(op, l, r) => {
            expr_depth(l, dtype, table).max(expr_depth(r, dtype, table))
                + table.cost(dtype, *op).latency
        }
    }
}

fn expr_resources(e: &ScalarExpr, dtype: DataType, table: &CostTable) -> ResourceVec {
    match e {
        ScalarExpr::Const(_) | ScalarExpr::Affine(_) | ScalarExpr::Load { .. } => {
            ResourceVec::default()
        }
        ScalarExpr::Neg(inner) => expr_resources(inner, dtype, table),
        ScalarExpr::Bin(op, l, r) => {
            let c = table.cost(dtype, *op);
            expr_resources(l, dtype, table)
                .add(expr_resources(r, dtype, table))
                .add(ResourceVec {
                    dsp: c.dsp,
                    lut: c.lut,
                    ff: c.ff,
                    bram: 0,
                })
        }
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    (a + b - 1) / b.max(1)
}

/// One BRAM bank per partition slice of every array.
pub fn array_bram(ir: &LoopIR) -> i64 {
    ir.arrays
        .iter()
        .map(|a| {
            a.partitions
                .iter()
                .map(|p| p.factor.max(1))
                .product::<i64>()
        })
        .sum()
}

/// Whole-function estimate: nodes execute sequentially in dependence
/// order, so the function latency is the longest data path; resources
/// add componentwise, with DSPs shared across nodes under `reuse`.
pub fn estimate_function(
    node_estimates: &[Estimate],
    paths: &[Vec<usize>],
    reuse: bool,
) -> Estimate {
    let mut latency = 0i64;
    for path in paths {
        let sum: i64 = path.iter().map(|&n| node_estimates[n].latency).sum();
        latency = latency.max(sum);
    }
    let mut resources = ResourceVec::default();
    for e in node_estimates {
        if reuse {
            resources = ResourceVec {
                dsp: resources.dsp.max(e.resources.dsp),
                lut: resources.lut + e.resources.lut,
                ff: resources.ff + e.resources.ff,
                bram: resources.bram + e.resources.bram,
            };
        } else {
            resources = resources.add(e.resources);
        }
    }
    let mut achieved_ii = Vec::new();
    let mut parallelism = Ratio::one();
    for e in node_estimates {
        achieved_ii.extend(e.achieved_ii.clone());
        if e.parallelism.to_f64() > parallelism.to_f64() {
            parallelism = e.parallelism;
        }
    }
    Estimate {
        latency,
        resources,
        achieved_ii,
        parallelism,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::loopir::lower_ast;
    use crate::polyhedral::{build_ast, lift, HwAnnotation};

    /// f32 accumulation over (i, j, k): `C[i][j] += A[i][k] * B[k][j]`.
    fn gemm_ir(pipeline_dim: &str, order: Option<&[&str]>) -> (LoopIR, Function, BTreeMap<String, Vec<NodeDep>>) {
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
        let mut s = lift(&f.computes[0], 0, 0);
        let mut dep = vec![0i64, 0, 1];
        if let Some(order) = order {
            let orig = ["i", "j", "k"];
            dep = order
                .iter()
                .map(|d| {
                    let pos = orig.iter().position(|o| o == d).unwrap();
                    [0i64, 0, 1][pos]
                })
                .collect();
            s = crate::polyhedral::set_loop_order(
                s,
                &order.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            )
            .unwrap();
        }
        s.annotations.push(HwAnnotation::Pipeline {
            dim: pipeline_dim.into(),
            ii: 1,
        });
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        let ir = lower_ast(&built.ast, &[s], &f).unwrap();
        let mut deps = BTreeMap::new();
        deps.insert(
            "S1".to_string(),
            vec![NodeDep {
                entries: dep,
                known: true,
                accumulate: true,
            }],
        );
        (ir, f, deps)
    }

    #[test]
    fn pipeline_latency_formula() {
        // N = 64, II = 1, D = 7 -> 63 + 7 = 70
        let f = parse_program(
            r#"
            func axpy {
              iter i = 0..8; iter j = 0..8;
              array A: f32[8][8] in; array B: f32[8][8] in; array C: f32[8][8] out;
              compute S1 (i, j) { C[i][j] = A[i][j] * 2.0 + B[i][j]; }
            }
            "#,
        )
        .unwrap();
        let mut s = lift(&f.computes[0], 0, 0);
        s.annotations.push(HwAnnotation::Pipeline {
            dim: "i".into(),
            ii: 1,
        });
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        let ir = lower_ast(&built.ast, &[s], &f).unwrap();
        let est = estimate_node(
            &ir.roots[0],
            &f,
            &BTreeMap::new(),
            &CostTable::default(),
            ModelOptions::default(),
        )
        .unwrap();
        assert_eq!(est.latency, 70);
        assert_eq!(est.achieved_ii, vec![("i".to_string(), 1)]);
    }

    #[test]
    fn recurrence_at_carrying_level() {
        // distance-1 f32 accumulation pipelined at the carrying level:
        // achieved II = f32 add latency = 4
        let (ir, f, deps) = gemm_ir("k", None);
        let est = estimate_node(
            &ir.roots[0],
            &f,
            &deps,
            &CostTable::default(),
            ModelOptions::default(),
        )
        .unwrap();
        assert_eq!(est.achieved_ii, vec![("k".to_string(), 4)]);
    }

    #[test]
    fn recurrence_gone_after_interchange() {
        // (k, i, j) with pipeline at j: the dependence is carried outside
        let (ir, f, deps) = gemm_ir("j", Some(&["k", "i", "j"]));
        let est = estimate_node(
            &ir.roots[0],
            &f,
            &deps,
            &CostTable::default(),
            ModelOptions::default(),
        )
        .unwrap();
        assert_eq!(est.achieved_ii, vec![("j".to_string(), 1)]);
    }

    #[test]
    fn parallelism_metric_matches_arithmetic() {
        assert_eq!(parallelism(&[1, 2, 16], 1).as_integer(), Some(32));
        assert_eq!(parallelism(&[1, 32], 2).as_integer(), Some(16));
        assert_eq!(parallelism(&[1, 1, 1], 1).as_integer(), Some(1));
    }

    #[test]
    fn unroll_divides_trip_and_multiplies_resources() {
        let (ir, f, deps) = gemm_ir("j", Some(&["k", "i", "j"]));
        let table = CostTable::default();
        let base = estimate_node(&ir.roots[0], &f, &deps, &table, ModelOptions::default()).unwrap();

        // unroll j by 8 (full)
        let ir2 = crate::loopir::attach_hw(
            &ir,
            &crate::frontend::ScheduleDirective::Unroll {
                compute: "S1".into(),
                dim: "j".into(),
                factor: 8,
            },
        )
        .unwrap();
        let est =
            estimate_node(&ir2.roots[0], &f, &deps, &table, ModelOptions::default()).unwrap();
        assert!(est.latency < base.latency);
        assert_eq!(est.resources.dsp, base.resources.dsp * 8);
    }

    #[test]
    fn function_latency_is_longest_path() {
        let mk = |latency| Estimate {
            latency,
            resources: ResourceVec {
                dsp: 10,
                lut: 0,
                ff: 0,
                bram: 0,
            },
            achieved_ii: Vec::new(),
            parallelism: Ratio::one(),
        };
        let nodes = vec![mk(100), mk(50), mk(70)];
        let paths = vec![vec![0, 2], vec![1, 2]];
        let est = estimate_function(&nodes, &paths, false);
        assert_eq!(est.latency, 170);
        assert_eq!(est.resources.dsp, 30);
        let reused = estimate_function(&nodes, &paths, true);
        assert_eq!(reused.resources.dsp, 10);
    }

    #[test]
    fn cost_table_config_overrides() {
        let mut t = CostTable::default();
        t.apply_config("f32.add = 2,1,50,25\n# comment\n").unwrap();
        assert_eq!(t.cost(DataType::F32, BinOp::Add).latency, 2);
        assert!(t.apply_config("bogus line").is_err());
    }
}
