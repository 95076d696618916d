//! Module-level invariants: frontend round-trips, oracle consistency,
//! coarse-edge agreement, model monotonicity, and instance preservation
//! across lowering.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use loomweaver::corpus;
use loomweaver::depgraph::{analyze_node, build_dep_graph, DepDir, DirectionVector, DistanceVector};
use loomweaver::frontend::{parse_program, print_function, validate, AssignOp};
use loomweaver::interp::trace_loopir;
use loomweaver::loopir::lower_ast;
use loomweaver::oracle::brute_force_dependences;
use loomweaver::perfmodel::{estimate_node, CostTable, ModelOptions, NodeDep};
use loomweaver::pipeline::{compile, CompileOptions};
use loomweaver::polyhedral::{build_ast, enumerate_instances, lift, HwAnnotation};

// ------------------------------------------------------------------
// frontend
// ------------------------------------------------------------------

/// Expression sources that are valid in a compute over (i, j) reading A
/// and writing C.
fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..100).prop_map(|v| v.to_string()),
        (0u32..16, 1u32..9).prop_map(|(a, b)| format!("{a}.{b}")),
        Just("i".to_string()),
        Just("j".to_string()),
        Just("A[i][j]".to_string()),
        Just("A[i][j - 1]".to_string()),
        Just("A[2 * i][j]".to_string()),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        (inner.clone(), prop_oneof![Just("+"), Just("-"), Just("*"), Just("/")], inner)
            .prop_map(|(l, op, r)| format!("({l} {op} {r})"))
    })
}

fn directive_source() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("S1.interchange(i, j);".to_string()),
        Just("S1.split(i, 4, i0, i1);".to_string()),
        Just("S1.tile(i, j, 2, 2, a0, b0, a1, b1);".to_string()),
        Just("S1.skew(i, j, 2, 1, ip, jp);".to_string()),
        Just("S1.pipeline(j, 2);".to_string()),
        Just("S1.unroll(j, 4);".to_string()),
        Just("A.partition({2, 4}, \"block\");".to_string()),
        Just("C.partition({8}, \"complete\");".to_string()),
    ]
}

proptest! {
    /// Pretty-printing a parsed function and re-parsing it yields a
    /// structurally identical function.
    #[test]
    fn round_trip(expr in expr_source(), accumulate in any::<bool>(),
                  directives in proptest::collection::vec(directive_source(), 0..4)) {
        let op = if accumulate { "+=" } else { "=" };
        let sched = if directives.is_empty() {
            String::new()
        } else {
            format!("  schedule {{\n    {}\n  }}\n", directives.join("\n    "))
        };
        let src = format!(
            "func prop {{\n  iter i = 0..8; iter j = 0..8;\n  \
             array A: f32[16][16] in; array C: f32[16][16] out;\n  \
             compute S1 (i, j) {{ C[i][j] {op} {expr}; }}\n{sched}}}\n"
        );
        let f = match parse_program(&src) {
            Ok(f) => f,
            Err(e) => return Err(TestCaseError::fail(format!("{src}\n{e:?}"))),
        };
        let printed = print_function(&f);
        let f2 = parse_program(&printed)
            .map_err(|e| TestCaseError::fail(format!("reprint failed: {printed}\n{e:?}")))?;
        prop_assert_eq!(f, f2);
    }

    /// Parsing is total: any input yields a function or diagnostics.
    #[test]
    fn parsing_never_panics(src in "\\PC*") {
        let _ = parse_program(&src);
    }

    /// Slightly structured garbage exercises deeper parser paths.
    #[test]
    fn structured_garbage_never_panics(tokens in proptest::collection::vec(
        prop_oneof![
            Just("func"), Just("iter"), Just("array"), Just("compute"), Just("schedule"),
            Just("{"), Just("}"), Just("("), Just(")"), Just("["), Just("]"),
            Just(";"), Just(","), Just(".."), Just("."), Just("="), Just("+="),
            Just("f32"), Just("in"), Just("out"), Just("S1"), Just("i"), Just("0"), Just("32"),
        ], 0..40)) {
        let src = tokens.join(" ");
        let _ = parse_program(&src);
    }

    /// Direction vectors derive pointwise from distance vectors.
    #[test]
    fn direction_follows_distance(entries in proptest::collection::vec(-4i64..=4, 1..5)) {
        let d = DistanceVector::known(entries.clone());
        let dir = DirectionVector::from_distance(&d);
        for (v, e) in entries.iter().zip(&dir.entries) {
            let want = match v.signum() {
                1 => DepDir::Lt,
                0 => DepDir::Eq,
                _ => DepDir::Gt,
            };
            prop_assert_eq!(*e, want);
        }
    }
}

// ------------------------------------------------------------------
// dependence analysis vs. the brute-force oracle
// ------------------------------------------------------------------

#[test]
fn oracle_realizes_every_known_distance() {
    for (name, src) in corpus::all(8) {
        let f = parse_program(&src).unwrap();
        for c in &f.computes {
            let attrs = analyze_node(c);
            let pairs = brute_force_dependences(c, 8).unwrap();
            for dep in &attrs.self_deps {
                if !dep.distance.known {
                    continue;
                }
                let realized = pairs.iter().any(|(s, k)| {
                    s.iter()
                        .zip(k)
                        .map(|(a, b)| b - a)
                        .eq(dep.distance.entries.iter().copied())
                });
                assert!(
                    realized,
                    "{name}/{}: distance {:?} not realized by any oracle pair",
                    c.name, dep.distance.entries
                );
            }
            // uniform kernels: every pair is explained by a known dep or
            // the transitive closure of an accumulation
            let all_known = !attrs.self_deps.is_empty()
                && attrs.self_deps.iter().all(|d| d.distance.known);
            let any_accumulate = attrs.self_deps.iter().any(|d| d.accumulate);
            if all_known && !any_accumulate {
                for (s, k) in &pairs {
                    let diff: Vec<i64> = s.iter().zip(k).map(|(a, b)| b - a).collect();
                    assert!(
                        attrs
                            .self_deps
                            .iter()
                            .any(|d| d.distance.entries == diff),
                        "{name}/{}: unexplained oracle pair {diff:?}",
                        c.name
                    );
                }
            }
        }
    }
}

#[test]
fn coarse_edges_match_cell_level_recomputation() {
    for (name, src) in corpus::all(8) {
        let f = parse_program(&src).unwrap();
        let g = build_dep_graph(&f);
        let pos_of = |ci: usize| g.exec_order.iter().position(|&x| x == ci).unwrap();

        // cell-level recomputation over clamped domains
        let mut expected: BTreeSet<(usize, usize, String)> = BTreeSet::new();
        for (pi, p) in f.computes.iter().enumerate() {
            let written = touched_cells(&f, pi, true);
            for (ci, c) in f.computes.iter().enumerate() {
                if pi == ci || pos_of(pi) >= pos_of(ci) {
                    continue;
                }
                if c.rhs.loads().iter().any(|(a, _)| *a == p.dest)
                    || (c.op == AssignOp::Accumulate && c.dest == p.dest)
                {
                    let read = touched_cells(&f, ci, false);
                    let reads_dest: BTreeSet<&Vec<i64>> = read
                        .iter()
                        .filter(|(a, _)| *a == p.dest)
                        .map(|(_, cell)| cell)
                        .collect();
                    if written
                        .iter()
                        .any(|(a, cell)| *a == p.dest && reads_dest.contains(cell))
                    {
                        expected.insert((pi, ci, p.dest.clone()));
                    }
                }
            }
        }
        let got: BTreeSet<(usize, usize, String)> = g
            .edges
            .iter()
            .map(|e| (e.producer, e.consumer, e.array.clone()))
            .collect();
        assert_eq!(got, expected, "{name}: coarse edges disagree with the oracle");
    }
}

/// Cells written (or read) by a compute over its clamped domain.
fn touched_cells(
    f: &loomweaver::frontend::Function,
    ci: usize,
    writes: bool,
) -> BTreeSet<(String, Vec<i64>)> {
    let c = &f.computes[ci];
    let mut out = BTreeSet::new();
    let ranges: Vec<(i64, i64)> = c
        .iters
        .iter()
        .map(|iv| (iv.lower, iv.upper.min(iv.lower + 8)))
        .collect();
    let mut point: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).collect();
    let total: i64 = ranges.iter().map(|&(lo, hi)| (hi - lo).max(0)).product();
    for _ in 0..total {
        let env: BTreeMap<String, i64> = c
            .iters
            .iter()
            .zip(&point)
            .map(|(iv, &v)| (iv.name.clone(), v))
            .collect();
        if writes {
            let cell: Vec<i64> = c.dest_indices.iter().map(|e| e.eval_map(&env)).collect();
            out.insert((c.dest.clone(), cell));
        } else {
            for (array, indices) in c.rhs.loads() {
                let cell: Vec<i64> = indices.iter().map(|e| e.eval_map(&env)).collect();
                out.insert((array.to_string(), cell));
            }
            if c.op == AssignOp::Accumulate {
                let cell: Vec<i64> = c.dest_indices.iter().map(|e| e.eval_map(&env)).collect();
                out.insert((c.dest.clone(), cell));
            }
        }
        for lvl in (0..ranges.len()).rev() {
            point[lvl] += 1;
            if point[lvl] < ranges[lvl].1 {
                break;
            }
            point[lvl] = ranges[lvl].0;
        }
    }
    out
}

// ------------------------------------------------------------------
// lowering: instance preservation
// ------------------------------------------------------------------

#[test]
fn loopir_visits_exactly_the_ast_instances() {
    for (name, src) in corpus::all(8) {
        let f = parse_program(&src).unwrap();
        assert!(validate(&f).is_empty());
        let out = compile(&f, &CompileOptions::default()).unwrap();
        let ast_instances = enumerate_instances(&out.ast);
        let ir_instances = trace_loopir(&out.ir);
        assert_eq!(
            ast_instances.len(),
            ir_instances.len(),
            "{name}: instance count diverged"
        );
        for ((stmt_idx, ast_env), (ir_name, ir_env)) in
            ast_instances.iter().zip(&ir_instances)
        {
            assert_eq!(&out.stmts[*stmt_idx].name, ir_name, "{name}: order diverged");
            assert_eq!(ast_env, ir_env, "{name}: environment diverged");
        }
    }
}

// ------------------------------------------------------------------
// performance model
// ------------------------------------------------------------------

#[test]
fn unrolling_never_increases_latency_and_ii_dominates_target() {
    let f = parse_program(&corpus::gemm(8, "f32")).unwrap();
    let deps: BTreeMap<String, Vec<NodeDep>> = BTreeMap::from([(
        "S1".to_string(),
        vec![NodeDep {
            entries: vec![0, 0, 1],
            known: true,
            accumulate: true,
        }],
    )]);
    let table = CostTable::default();
    let mut last = i64::MAX;
    for unroll in [1, 2, 4, 8] {
        let mut s = lift(&f.computes[0], 0, 0);
        s.annotations.push(HwAnnotation::Pipeline {
            dim: "i".into(),
            ii: 1,
        });
        if unroll > 1 {
            s.annotations.push(HwAnnotation::Unroll {
                dim: "j".into(),
                factor: unroll,
            });
        }
        let built = build_ast(std::slice::from_ref(&s)).unwrap();
        let ir = lower_ast(&built.ast, &[s], &f).unwrap();
        let est = estimate_node(
            &ir.roots[0],
            &f,
            &deps,
            &table,
            ModelOptions { allow_reassoc: true },
        )
        .unwrap();
        assert!(
            est.latency <= last,
            "unroll {unroll} increased latency {last} -> {}",
            est.latency
        );
        for &(_, ii) in &est.achieved_ii {
            assert!(ii >= 1);
        }
        last = est.latency;
    }
}

#[test]
fn interp_is_bit_deterministic() {
    use loomweaver::interp::{random_inputs, run_reference};
    for (_, src) in corpus::all(8).into_iter().take(4) {
        let f = parse_program(&src).unwrap();
        let inputs = random_inputs(&f, 99);
        let a = run_reference(&f, &inputs).unwrap();
        let b = run_reference(&f, &inputs).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn partition_directives_survive_compilation() {
    let mut src = corpus::gemm(8, "f32");
    let end = src.rfind('}').unwrap();
    src.insert_str(end, "  schedule { A.partition({1, 4}, \"cyclic\"); }\n");
    let f = parse_program(&src).unwrap();
    let out = compile(&f, &CompileOptions::default()).unwrap();
    let a = out.ir.array("A").unwrap();
    assert_eq!(a.partitions.len(), 1);
    assert_eq!(a.partitions[0].dim, 2);
    assert_eq!(a.partitions[0].factor, 4);
    // non-partitioned arrays untouched
    assert!(out.ir.array("B").unwrap().partitions.is_empty());
}
