//! Reference interpreter.
//!
//! Two entry points: [`run_reference`] executes the original program in
//! declaration/`after` order over rectangular domains, with no polyhedral
//! machinery involved; [`run_loopir`] executes any lowered loop IR as
//! written. Agreement between the two is the semantic-equivalence oracle
//! for every transformation in the compiler.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;


use crate::diag::{CompileError, CompileResult};
use crate::frontend::{
    AfterLevel, AssignOp, BinOp, DataType, Expr, Function, Lit, PortDir, ScheduleDirective,
};
use crate::loopir::{IfNode, LoopChild, LoopIR, LoopNode, ScalarExpr, StmtNode};

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    /// Canonical i64 per element: sign-extended for signed types, low
    /// bits for unsigned.
    Int(Vec<i64>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayValue {
    pub dtype: DataType,
    pub shape: Vec<i64>,
    pub data: ArrayData,
}

impl ArrayValue {
    pub fn zeros(dtype: DataType, shape: &[i64]) -> Self {
        let len: usize = shape.iter().product::<i64>() as usize;
        let data = match dtype {
            DataType::F32 => ArrayData::F32(vec![0.0; len]),
            DataType::F64 => ArrayData::F64(vec![0.0; len]),
            _ => ArrayData::Int(vec![0; len]),
        };
        ArrayValue {
            dtype,
            shape: shape.to_vec(),
            data,
        }
    }

    fn flat_index(&self, indices: &[i64], ctx: &str) -> CompileResult<usize> {
        if indices.len() != self.shape.len() {
            return Err(CompileError::Interp(format!(
                "{ctx}: rank mismatch ({} indices for rank {})",
                indices.len(),
                self.shape.len()
            )));
        }
        let mut flat = 0i64;
        for (d, (&idx, &extent)) in indices.iter().zip(&self.shape).enumerate() {
            if idx < 0 || idx >= extent {
                return Err(CompileError::Interp(format!(
                    "{ctx}: index {idx} out of bounds for dim {d} (extent {extent})"
                )));
            }
            flat = flat * extent + idx;
        }
        Ok(flat as usize)
    }
}

/// Runtime scalar in the destination dtype's numeric domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    F32(f32),
    F64(f64),
}

pub type Arrays = BTreeMap<String, ArrayValue>;

/// Mask a canonical value to the width/signedness of `dtype`, mirroring
/// fixed-width C arithmetic (signed overflow compiled with wrapping).
fn wrap_int(v: i64, dtype: DataType) -> i64 {
    let bits = dtype.bits();
    if bits == 64 {
        return v;
    }
    let masked = (v as u64) & ((1u64 << bits) - 1);
    if dtype.is_signed() {
        let sign = 1u64 << (bits - 1);
        if masked & sign != 0 {
            (masked | !((1u64 << bits) - 1)) as i64
        } else {
            masked as i64
        }
    } else {
        masked as i64
    }
}

fn int_bin(op: BinOp, a: i64, b: i64, dtype: DataType) -> CompileResult<i64> {
    let v = match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return Err(CompileError::Interp("integer division by zero".into()));
            }
            if dtype.is_signed() {
                a.wrapping_div(b)
            } else {
                ((a as u64).wrapping_div(b as u64)) as i64
            }
        }
    };
    Ok(wrap_int(v, dtype))
}

fn value_bin(op: BinOp, a: Value, b: Value, dtype: DataType) -> CompileResult<Value> {
    Ok(match (a, b) {
        (Value::Int(x), Value::Int(y)) => Value::Int(int_bin(op, x, y, dtype)?),
        (Value::F32(x), Value::F32(y)) => Value::F32(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
        }),
        (Value::F64(x), Value::F64(y)) => Value::F64(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
        }),
        _ => return Err(CompileError::Interp("mixed value domains".into())),
    })
}

fn value_neg(v: Value, dtype: DataType) -> Value {
    match v {
        Value::Int(x) => Value::Int(wrap_int(x.wrapping_neg(), dtype)),
        Value::F32(x) => Value::F32(-x),
        Value::F64(x) => Value::F64(-x),
    }
}

/// Coerce a literal or iterator value into the statement's domain.
fn lit_value(lit: &Lit, dtype: DataType) -> CompileResult<Value> {
    Ok(match (dtype, lit) {
        (DataType::F32, Lit::Int(v)) => Value::F32(*v as f32),
        (DataType::F32, Lit::Float(v)) => Value::F32(*v as f32),
        (DataType::F64, Lit::Int(v)) => Value::F64(*v as f64),
        (DataType::F64, Lit::Float(v)) => Value::F64(*v),
        (_, Lit::Int(v)) => Value::Int(wrap_int(*v, dtype)),
        (_, Lit::Float(_)) => {
            return Err(CompileError::Interp(
                "float literal in an integer statement".into(),
            ))
        }
    })
}

fn int_value(v: i64, dtype: DataType) -> Value {
    match dtype {
        DataType::F32 => Value::F32(v as f32),
        DataType::F64 => Value::F64(v as f64),
        _ => Value::Int(wrap_int(v, dtype)),
    }
}

fn load(arrays: &Arrays, array: &str, idx: &[i64], ctx: &str) -> CompileResult<Value> {
    let a = arrays
        .get(array)
        .ok_or_else(|| CompileError::UnknownArray(array.to_string()))?;
    let flat = a.flat_index(idx, ctx)?;
    Ok(match &a.data {
        ArrayData::Int(v) => Value::Int(v[flat]),
        ArrayData::F32(v) => Value::F32(v[flat]),
        ArrayData::F64(v) => Value::F64(v[flat]),
    })
}

fn store(
    arrays: &mut Arrays,
    array: &str,
    idx: &[i64],
    value: Value,
    op: AssignOp,
    ctx: &str,
) -> CompileResult<()> {
    let a = arrays
        .get_mut(array)
        .ok_or_else(|| CompileError::UnknownArray(array.to_string()))?;
    let dtype = a.dtype;
    let flat = a.flat_index(idx, ctx)?;
    match (&mut a.data, value) {
        (ArrayData::Int(v), Value::Int(x)) => {
            v[flat] = match op {
                AssignOp::Assign => wrap_int(x, dtype),
                AssignOp::Accumulate => wrap_int(v[flat].wrapping_add(x), dtype),
            }
        }
        (ArrayData::F32(v), Value::F32(x)) => {
            v[flat] = match op {
                AssignOp::Assign => x,
                AssignOp::Accumulate => v[flat] + x,
            }
        }
        (ArrayData::F64(v), Value::F64(x)) => {
            v[flat] = match op {
                AssignOp::Assign => x,
                AssignOp::Accumulate => v[flat] + x,
            }
        }
        _ => return Err(CompileError::Interp(format!("{ctx}: value domain mismatch"))),
    }
    Ok(())
}

/// Initial array state: zeros for every placeholder, overlaid with the
/// supplied inputs. `in` and `inout` arrays must be provided.
fn initial_arrays(f: &Function, inputs: &Arrays) -> CompileResult<Arrays> {
    let mut arrays = Arrays::new();
    for p in &f.placeholders {
        let mut val = ArrayValue::zeros(p.dtype, &p.shape);
        if let Some(given) = inputs.get(&p.name) {
            if given.dtype != p.dtype || given.shape != p.shape {
                return Err(CompileError::Interp(format!(
                    "input `{}` does not match its declaration",
                    p.name
                )));
            }
            val = given.clone();
        } else if matches!(p.dir, PortDir::In | PortDir::InOut) {
            return Err(CompileError::Interp(format!(
                "missing input array `{}`",
                p.name
            )));
        }
        arrays.insert(p.name.clone(), val);
    }
    Ok(arrays)
}

fn eval_expr(
    e: &Expr,
    dtype: DataType,
    env: &BTreeMap<String, i64>,
    arrays: &Arrays,
    ctx: &str,
) -> CompileResult<Value> {
    Ok(match e {
        Expr::Lit(l) => lit_value(l, dtype)?,
        Expr::Iter(name) => int_value(
            *env.get(name)
                .ok_or_else(|| CompileError::Interp(format!("{ctx}: unbound iterator `{name}`")))?,
            dtype,
        ),
        Expr::Load { array, indices } => {
            let idx: Vec<i64> = indices.iter().map(|i| i.eval_map(env)).collect();
            load(arrays, array, &idx, ctx)?
        }
        Expr::Neg(inner) => value_neg(eval_expr(inner, dtype, env, arrays, ctx)?, dtype),
        Expr::Bin(op, l, r) => value_bin(
            *op,
            eval_expr(l, dtype, env, arrays, ctx)?,
            eval_expr(r, dtype, env, arrays, ctx)?,
            dtype,
        )?,
    })
}

fn eval_scalar(
    e: &ScalarExpr,
    dtype: DataType,
    env: &BTreeMap<String, i64>,
    arrays: &Arrays,
    ctx: &str,
) -> CompileResult<Value> {
    Ok(match e {
        ScalarExpr::Const(l) => lit_value(l, dtype)?,
        ScalarExpr::Affine(a) => int_value(a.eval_map(env), dtype),
        ScalarExpr::Load { array, indices } => {
            let idx: Vec<i64> = indices.iter().map(|i| i.eval_map(env)).collect();
            load(arrays, array, &idx, ctx)?
        }
        ScalarExpr::Neg(inner) => value_neg(eval_scalar(inner, dtype, env, arrays, ctx)?, dtype),
        ScalarExpr::Bin(op, l, r) => value_bin(
            *op,
            eval_scalar(l, dtype, env, arrays, ctx)?,
            eval_scalar(r, dtype, env, arrays, ctx)?,
            dtype,
        )?,
    })
}

// ---------------------------------------------------------------------
// Reference execution
// ---------------------------------------------------------------------

/// One coordinate of the reference schedule skeleton.
#[derive(Debug, Clone)]
enum RefCoord {
    Static(i64),
    Loop { name: String, lower: i64, upper: i64 },
}

/// Execute the original program: instances in lexicographic iterator
/// order, computes in declaration order adjusted by `after` directives
/// (which interleave the shared loop levels).
pub fn run_reference(f: &Function, inputs: &Arrays) -> CompileResult<Arrays> {
    let mut arrays = initial_arrays(f, inputs)?;

    // schedule skeletons: statics from declaration order, then `after`
    let mut coords: Vec<Vec<RefCoord>> = f
        .computes
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let mut v = vec![RefCoord::Static(idx as i64)];
            for iv in &c.iters {
                v.push(RefCoord::Loop {
                    name: iv.name.clone(),
                    lower: iv.lower,
                    upper: iv.upper,
                });
                v.push(RefCoord::Static(0));
            }
            v
        })
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
            match level {
                AfterLevel::Root => {
                    let base_c0 = match coords[bi][0] {
                        RefCoord::Static(v) => v,
                        _ => 0,
                    };
                    coords[ci][0] = RefCoord::Static(base_c0 + 1);
                }
                AfterLevel::Dim(name) => {
                    let lvl = f.computes[bi]
                        .iter_index(name)
                        .ok_or_else(|| CompileError::UnknownDim(name.clone()))?;
                    for pos in (0..=2 * lvl).step_by(2) {
                        coords[ci][pos] = coords[bi][pos].clone();
                    }
                    let base_static = match coords[bi][2 * lvl + 2] {
                        RefCoord::Static(v) => v,
                        _ => 0,
                    };
                    coords[ci][2 * lvl + 2] = RefCoord::Static(base_static + 1);
                }
            }
        }
    }
    let max_len = coords.iter().map(|c| c.len()).max().unwrap_or(1);
    for c in &mut coords {
        while c.len() < max_len {
            c.push(RefCoord::Static(0));
        }
    }

    let group: Vec<usize> = (0..f.computes.len()).collect();
    let mut env = BTreeMap::new();
    exec_ref(f, &coords, &group, 0, max_len, &mut env, &mut arrays)?;
    Ok(arrays)
}

fn exec_ref(
    f: &Function,
    coords: &[Vec<RefCoord>],
    group: &[usize],
    pos: usize,
    len: usize,
    env: &mut BTreeMap<String, i64>,
    arrays: &mut Arrays,
) -> CompileResult<()> {
    if group.is_empty() {
        return Ok(());
    }
    if pos == len {
        for &idx in group {
            exec_instance(f, idx, env, arrays)?;
        }
        return Ok(());
    }
    if pos % 2 == 0 {
        let mut buckets: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for &idx in group {
            let v = match coords[idx][pos] {
                RefCoord::Static(v) => v,
                _ => 0,
            };
            buckets.entry(v).or_default().push(idx);
        }
        for sub in buckets.values() {
            exec_ref(f, coords, sub, pos + 1, len, env, arrays)?;
        }
        Ok(())
    } else {
        // loop position: members sharing it were validated to share the
        // iterator name and range
        let mut loopers: Vec<usize> = Vec::new();
        let mut exhausted: Vec<usize> = Vec::new();
        for &idx in group {
            match &coords[idx][pos] {
                RefCoord::Loop { .. } => loopers.push(idx),
                RefCoord::Static(_) => exhausted.push(idx),
            }
        }
        if !exhausted.is_empty() && !loopers.is_empty() {
            return Err(CompileError::NonComparableSchedules(
                "computes share a prefix but diverge in depth".into(),
            ));
        }
        if loopers.is_empty() {
            return exec_ref(f, coords, group, pos + 1, len, env, arrays);
        }
        let RefCoord::Loop { name, lower, upper } = coords[loopers[0]][pos].clone() else {
            unreachable!()
        };
        for &idx in &loopers {
            if let RefCoord::Loop {
                name: n,
                lower: lo,
                upper: hi,
            } = &coords[idx][pos]
            {
                if *n != name || *lo != lower || *hi != upper {
                    return Err(CompileError::NonComparableSchedules(format!(
                        "computes share level {} with different loops",
                        (pos - 1) / 2
                    )));
                }
            }
        }
        for v in lower..upper {
            env.insert(name.clone(), v);
            exec_ref(f, coords, &loopers, pos + 1, len, env, arrays)?;
        }
        env.remove(&name);
        Ok(())
    }
}

fn exec_instance(
    f: &Function,
    compute_idx: usize,
    env: &BTreeMap<String, i64>,
    arrays: &mut Arrays,
) -> CompileResult<()> {
    let c = &f.computes[compute_idx];
    let dtype = f
        .placeholder(&c.dest)
        .ok_or_else(|| CompileError::UnknownArray(c.dest.clone()))?
        .dtype;
    let coords: Vec<String> = c
        .iters
        .iter()
        .map(|iv| format!("{}={}", iv.name, env.get(&iv.name).copied().unwrap_or(0)))
        .collect();
    let ctx = format!("{}({})", c.name, coords.join(","));
    let value = eval_expr(&c.rhs, dtype, env, arrays, &ctx)?;
    let idx: Vec<i64> = c.dest_indices.iter().map(|i| i.eval_map(env)).collect();
    store(arrays, &c.dest, &idx, value, c.op, &ctx)
}

// ---------------------------------------------------------------------
// Loop IR execution
// ---------------------------------------------------------------------

/// Execute a lowered loop nest exactly as written. Pragma attributes are
/// performance annotations and are ignored.
pub fn run_loopir(ir: &LoopIR, f: &Function, inputs: &Arrays) -> CompileResult<Arrays> {
    let mut arrays = initial_arrays(f, inputs)?;
    let mut env = BTreeMap::new();
    for root in &ir.roots {
        exec_child(root, f, &mut env, &mut arrays)?;
    }
    Ok(arrays)
}

fn exec_child(
    child: &LoopChild,
    f: &Function,
    env: &mut BTreeMap<String, i64>,
    arrays: &mut Arrays,
) -> CompileResult<()> {
    match child {
        LoopChild::Loop(l) => exec_loop(l, f, env, arrays),
        LoopChild::If(i) => exec_if(i, f, env, arrays),
        LoopChild::Stmt(s) => exec_stmt(s, f, env, arrays),
    }
}

fn exec_loop(
    l: &LoopNode,
    f: &Function,
    env: &mut BTreeMap<String, i64>,
    arrays: &mut Arrays,
) -> CompileResult<()> {
    let lo = l.lower.eval_lower(env);
    let hi = l.upper.eval_upper(env);
    for v in lo..=hi {
        env.insert(l.iv.clone(), v);
        for c in &l.body {
            exec_child(c, f, env, arrays)?;
        }
    }
    env.remove(&l.iv);
    Ok(())
}

fn exec_if(
    node: &IfNode,
    f: &Function,
    env: &mut BTreeMap<String, i64>,
    arrays: &mut Arrays,
) -> CompileResult<()> {
    if node.conds.iter().all(|c| c.holds(env)) {
        for c in &node.body {
            exec_child(c, f, env, arrays)?;
        }
    }
    Ok(())
}

fn exec_stmt(
    s: &StmtNode,
    f: &Function,
    env: &BTreeMap<String, i64>,
    arrays: &mut Arrays,
) -> CompileResult<()> {
    let dtype = f
        .placeholder(&s.dest)
        .ok_or_else(|| CompileError::UnknownArray(s.dest.clone()))?
        .dtype;
    let coords: Vec<String> = env.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let ctx = format!("{}({})", s.name, coords.join(","));
    let value = eval_scalar(&s.rhs, dtype, env, arrays, &ctx)?;
    let idx: Vec<i64> = s.dest_indices.iter().map(|i| i.eval_map(env)).collect();
    store(arrays, &s.dest, &idx, value, s.op, &ctx)
}

/// Enumerate the statement instances a loop IR would execute, in order,
/// without touching any data. Used to check instance preservation
/// against the polyhedral AST.
pub fn trace_loopir(ir: &LoopIR) -> Vec<(String, BTreeMap<String, i64>)> {
    fn walk(
        child: &LoopChild,
        env: &mut BTreeMap<String, i64>,
        out: &mut Vec<(String, BTreeMap<String, i64>)>,
    ) {
        match child {
            LoopChild::Loop(l) => {
                let lo = l.lower.eval_lower(env);
                let hi = l.upper.eval_upper(env);
                for v in lo..=hi {
                    env.insert(l.iv.clone(), v);
                    for c in &l.body {
                        walk(c, env, out);
                    }
                }
                env.remove(&l.iv);
            }
            LoopChild::If(node) => {
                if node.conds.iter().all(|c| c.holds(env)) {
                    for c in &node.body {
                        walk(c, env, out);
                    }
                }
            }
            LoopChild::Stmt(s) => out.push((s.name.clone(), env.clone())),
        }
    }
    let mut out = Vec::new();
    let mut env = BTreeMap::new();
    for root in &ir.roots {
        walk(root, &mut env, &mut out);
    }
    out
}

// ---------------------------------------------------------------------
// Inputs and comparison
// ---------------------------------------------------------------------

/// Seeded random inputs for every `in`/`inout` placeholder: floats
/// uniform in [-1, 1], signed ints in [-8, 8], unsigned in [0, 8].
pub fn random_inputs(f: &Function, seed: u64) -> Arrays {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrays = Arrays::new();
    for p in &f.placeholders {
        if !matches!(p.dir, PortDir::In | PortDir::InOut) {
            continue;
        }
        let len: usize = p.shape.iter().product::<i64>() as usize;
        let data = match p.dtype {
            DataType::F32 => ArrayData::F32((0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()),
            DataType::F64 => ArrayData::F64((0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()),
            dt if dt.is_signed() => {
                ArrayData::Int((0..len).map(|_| rng.gen_range(-8i64..=8)).collect())
            }
            _ => ArrayData::Int((0..len).map(|_| rng.gen_range(0i64..=8)).collect()),
        };
        arrays.insert(
            p.name.clone(),
            ArrayValue {
                dtype: p.dtype,
                shape: p.shape.clone(),
                data,
            },
        );
    }
    arrays
}

/// Comparison tolerance for output checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Exact,
    /// `|a-b| <= tol * max(1, |a|, |b|)`
    Relative(f64),
}

impl Tolerance {
    /// Dtype-appropriate tolerance when reassociation-affecting
    /// directives were applied: exact for ints, 1e-5 for f32, 1e-12 for
    /// f64.
    pub fn for_dtype(dtype: DataType, reassociated: bool) -> Tolerance {
        if !reassociated {
            return Tolerance::Exact;
        }
        match dtype {
            DataType::F32 => Tolerance::Relative(1e-5),
            DataType::F64 => Tolerance::Relative(1e-12),
            _ => Tolerance::Exact,
        }
    }
}

fn close(a: f64, b: f64, tol: Tolerance) -> bool {
    match tol {
        Tolerance::Exact => a == b || (a.is_nan() && b.is_nan()),
        Tolerance::Relative(t) => {
            let scale = 1f64.max(a.abs()).max(b.abs());
            (a - b).abs() <= t * scale
        }
    }
}

/// Compare two array states. `None` on success, otherwise a description
/// of the first mismatch.
pub fn compare_arrays(a: &ArrayValue, b: &ArrayValue, tol: Tolerance) -> Option<String> {
    if a.shape != b.shape || a.dtype != b.dtype {
        return Some("shape or dtype mismatch".into());
    }
    match (&a.data, &b.data) {
        (ArrayData::Int(x), ArrayData::Int(y)) => x.iter().zip(y).enumerate().find_map(|(i, (p, q))| {
            (p != q).then(|| format!("element {i}: {p} != {q}"))
        }),
        (ArrayData::F32(x), ArrayData::F32(y)) => x.iter().zip(y).enumerate().find_map(|(i, (p, q))| {
            (!close(*p as f64, *q as f64, tol)).then(|| format!("element {i}: {p} != {q}"))
        }),
        (ArrayData::F64(x), ArrayData::F64(y)) => x.iter().zip(y).enumerate().find_map(|(i, (p, q))| {
            (!close(*p, *q, tol)).then(|| format!("element {i}: {p} != {q}"))
        }),
        _ => Some("storage mismatch".into()),
    }
}

/// Compare the `out`/`inout` arrays of two runs of the same function,
/// with the dtype-appropriate tolerance per array.
pub fn compare_outputs(
    f: &Function,
    got: &Arrays,
    want: &Arrays,
    reassociated: bool,
) -> Option<String> {
    for p in &f.placeholders {
        if !matches!(p.dir, PortDir::Out | PortDir::InOut) {
            continue;
        }
        let (Some(a), Some(b)) = (got.get(&p.name), want.get(&p.name)) else {
            return Some(format!("missing output `{}`", p.name));
        };
        let tol = Tolerance::for_dtype(p.dtype, reassociated);
        if let Some(err) = compare_arrays(a, b, tol) {
            return Some(format!("`{}`: {err}", p.name));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::polyhedral::{build_ast, lift};

    fn gemm(n: usize) -> Function {
        parse_program(&format!(
            r#"
            func gemm {{
              iter i = 0..{n}; iter j = 0..{n}; iter k = 0..{n};
              array A: f32[{n}][{n}] in; array B: f32[{n}][{n}] in; array C: f32[{n}][{n}] out;
              compute S1 (i, j, k) {{ C[i][j] += A[i][k] * B[k][j]; }}
            }}
            "#
        ))
        .unwrap()
    }

    #[test]
    fn gemm_identity_times_b_is_b() {
        let f = gemm(4);
        let mut inputs = Arrays::new();
        let mut eye = ArrayValue::zeros(DataType::F32, &[4, 4]);
        if let ArrayData::F32(v) = &mut eye.data {
            for i in 0..4 {
                v[i * 4 + i] = 1.0;
            }
        }
        inputs.insert("A".into(), eye);
        inputs.insert("B".into(), random_inputs(&f, 7)["B"].clone());
        let out = run_reference(&f, &inputs).unwrap();
        assert_eq!(
            compare_arrays(&out["C"], &inputs["B"], Tolerance::Exact),
            None
        );
    }

    #[test]
    fn bicg_matches_closed_form() {
        // s[j] = sum_i A[i][j] (all inputs ones), q[i] = sum_j A[i][j]
        let f = parse_program(
            r#"
            func bicg {
              iter i = 0..4; iter j = 0..4;
              array A: f32[4][4] in; array r: f32[4] in; array p: f32[4] in;
              array s: f32[4] out; array q: f32[4] out;
              compute S1 (i, j) { s[j] += r[i] * A[i][j]; }
              compute S2 (i, j) { q[i] += A[i][j] * p[j]; }
              schedule { S2.after(S1, j); }
            }
            "#,
        )
        .unwrap();
        let mut inputs = Arrays::new();
        for (name, shape) in [("A", vec![4i64, 4]), ("r", vec![4]), ("p", vec![4])] {
            let len: usize = shape.iter().product::<i64>() as usize;
            inputs.insert(
                name.into(),
                ArrayValue {
                    dtype: DataType::F32,
                    shape,
                    data: ArrayData::F32(vec![1.0; len]),
                },
            );
        }
        let out = run_reference(&f, &inputs).unwrap();
        for name in ["s", "q"] {
            match &out[name].data {
                ArrayData::F32(v) => assert!(v.iter().all(|&x| x == 4.0), "{name} = {v:?}"),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn out_of_bounds_reports_instance() {
        let f = parse_program(
            r#"
            func oob {
              iter i = 0..8;
              array A: f32[4] out;
              compute S1 (i) { A[i] = 1.0; }
            }
            "#,
        )
        .unwrap();
        let err = run_reference(&f, &Arrays::new()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("S1(i=4)"), "got: {msg}");
        assert!(msg.contains("out of bounds"));
    }

    #[test]
    fn untransformed_loopir_matches_reference() {
        let f = gemm(4);
        let stmts: Vec<_> = f
            .computes
            .iter()
            .enumerate()
            .map(|(i, c)| lift(c, i, i as i64))
            .collect();
        let built = build_ast(&stmts).unwrap();
        let ir = crate::loopir::lower_ast(&built.ast, &stmts, &f).unwrap();
        let inputs = random_inputs(&f, 42);
        let a = run_reference(&f, &inputs).unwrap();
        let b = run_loopir(&ir, &f, &inputs).unwrap();
        assert_eq!(compare_outputs(&f, &b, &a, false), None);
    }

    #[test]
    fn int_wraparound_is_deterministic() {
        let f = parse_program(
            r#"
            func wrap {
              iter i = 0..4;
              array A: i8[4] in; array B: i8[4] out;
              compute S1 (i) { B[i] = A[i] * 100; }
            }
            "#,
        )
        .unwrap();
        let mut inputs = Arrays::new();
        inputs.insert(
            "A".into(),
            ArrayValue {
                dtype: DataType::I8,
                shape: vec![4],
                data: ArrayData::Int(vec![5, -3, 8, 0]),
            },
        );
        let out = run_reference(&f, &inputs).unwrap();
        // 500 wraps to -12, -300 wraps to -44, 800 wraps to 32
        assert_eq!(out["B"].data, ArrayData::Int(vec![-12, -44, 32, 0]));
    }
}
