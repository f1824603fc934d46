mod common;

use std::collections::{BTreeMap, VecDeque};
use std::num::NonZeroUsize;
use std::sync::Arc;

use common::*;
use jacette::actions::{ActionProfile, ActionRegistry};
use jacette::engine::RuntimeError;
use jacette::graph::{NodeRecord, Object};
use jacette::jsorc::{pick_best, solve_config, ComponentConfig, PolicyParams};
use jacette::lang::{parse, pretty_print, BinOp, Direction, Expr, LValue, Literal, ParseError, Program, Stmt};
use jacette::storage::{decode_object, encode_object, GraphStore, ObjectCache, TierConfig};
use jacette::{ContextMap, ContextValue, ObjectId, Runtime};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// graph and storage

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fusion_is_invisible(seed in any::<u64>(), len in 1usize..60, threshold in 1usize..200) {
        let ops = random_ops(&mut rng(seed), len);
        prop_assert_eq!(fusion_transcript(&ops, 0), fusion_transcript(&ops, threshold));
    }

    #[test]
    fn stores_stay_referentially_intact(seed in any::<u64>(), len in 1usize..60, threshold in 0usize..100) {
        let ops = random_ops(&mut rng(seed), len);
        let dir = tempfile::tempdir().unwrap();
        let tier = TierConfig { fast_edge_threshold: threshold, cache_capacity: 4, store_path: Some(dir.path().into()) };
        let program = parse(FUSION_PROGRAM).unwrap();
        let schema = Arc::new(jacette::Schema::from_program(&program));
        {
            let rt = Runtime::new(&program, tier.clone(), Arc::new(ActionRegistry::new(None))).unwrap();
            replay(&rt, &ops);
            let mut store = rt.store().lock();
            prop_assert_eq!(store.audit().unwrap(), Vec::<String>::new());
        }
        // reopening the directory sees the same objects, byte for byte
        let before: Vec<Vec<u8>> = GraphStore::open(schema.clone(), tier.clone()).unwrap().scan().unwrap().iter().map(encode_object).collect();
        let mut reopened = GraphStore::open(schema, tier).unwrap();
        let after: Vec<Vec<u8>> = reopened.scan().unwrap().iter().map(encode_object).collect();
        prop_assert_eq!(before, after);
        prop_assert_eq!(reopened.audit().unwrap(), Vec::<String>::new());
    }

    #[test]
    fn records_round_trip_through_encoding(id in 1u64..1_000_000, ctx in context_map(), fused in proptest::collection::vec(1u64..100, 0..3)) {
        let node = Object::Node(NodeRecord {
            id: ObjectId(id),
            type_name: "item".into(),
            context: ctx.clone(),
            out_edges: fused.iter().map(|e| ObjectId(*e)).collect(),
            in_edges: Vec::new(),
            access_list: None,
            fused_edges: Vec::new(),
        });
        let bytes = encode_object(&node);
        let back = decode_object(ObjectId(id), &bytes).unwrap();
        prop_assert_eq!(encode_object(&back), bytes);
        prop_assert_eq!(back, node);
    }

    #[test]
    fn cache_matches_reference_lru(cap in 1usize..12, ops in proptest::collection::vec((0u8..3, 1u64..20, -50i64..50), 0..400)) {
        let mut cache = ObjectCache::new(NonZeroUsize::new(cap).unwrap());
        let mut model = RefLru::new(cap);
        for (kind, k, v) in ops {
            match kind {
                0 => prop_assert_eq!(cache.get(ObjectId(k)).map(cached_value), model.get(k)),
                1 => prop_assert_eq!(cache.put(ObjectId(k), cache_object(k, v)).map(|i| i.0), model.put(k, v)),
                _ => prop_assert_eq!(cache.remove(ObjectId(k)), model.remove(k)),
            }
            prop_assert!(cache.len() <= cap);
            let order: Vec<u64> = cache.recency_order().iter().map(|i| i.0).collect();
            prop_assert_eq!(order, model.order());
        }
    }
}

fn replay(rt: &Runtime, ops: &[GraphOp]) {
    let mut nodes: Vec<ObjectId> = Vec::new();
    let pick = |nodes: &[ObjectId], i: usize| nodes.get(i % nodes.len().max(1)).copied().unwrap_or(ObjectId(999_999));
    for op in ops {
        let mut store = rt.store().lock();
        let _ = match op {
            GraphOp::AddNode(v) => {
                let mut ctx = ContextMap::new();
                ctx.insert("v".into(), ContextValue::Int(*v));
                store.apply(|s| s.create_node("item", ctx)).map(|(id, _)| nodes.push(id))
            }
            GraphOp::AddEdge { src, dst, label } => {
                let mut ctx = ContextMap::new();
                ctx.insert("label".into(), ContextValue::Str("x".repeat(*label)));
                let (a, b) = (pick(&nodes, *src), pick(&nodes, *dst));
                store.apply(|s| s.create_edge("link", a, b, ctx)).map(|_| ())
            }
            GraphOp::DeleteNode(i) => {
                let id = pick(&nodes, *i);
                store.apply(|s| s.delete_node(id)).map(|_| ())
            }
            GraphOp::ClearCache => {
                store.clear_cache();
                Ok(())
            }
            GraphOp::Walk { node, .. } => {
                drop(store);
                let _ = rt.run_walker("grow", pick(&nodes, *node), ContextMap::new());
                Ok(())
            }
            _ => Ok(()),
        };
    }
}

fn context_value() -> impl Strategy<Value = ContextValue> {
    let leaf = prop_oneof![
        Just(ContextValue::Null),
        any::<bool>().prop_map(ContextValue::Bool),
        any::<i64>().prop_map(ContextValue::Int),
        (-1e12f64..1e12).prop_map(ContextValue::Float),
        ".{0,12}".prop_map(ContextValue::Str),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(ContextValue::List),
            proptest::collection::vec(("[a-z]{1,5}", inner), 0..4).prop_map(|kv| ContextValue::Map(kv.into_iter().collect())),
        ]
    })
}

fn context_map() -> impl Strategy<Value = ContextMap> {
    proptest::collection::vec(("[a-z]{1,6}", context_value()), 0..5).prop_map(|kv| kv.into_iter().collect())
}

// ---------------------------------------------------------------------------
// language

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_round_trips(seed in any::<u64>()) {
        let ast = random_program(&mut rng(seed));
        let text = pretty_print(&ast);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &ast);
        prop_assert_eq!(pretty_print(&back), text);
    }

    #[test]
    fn unknown_names_never_resolve(seed in any::<u64>()) {
        let mut ast = random_program(&mut rng(seed));
        ast.walker_decls[0].body.push(Stmt::Report(Expr::Var("zz_nowhere".into())));
        match parse(&pretty_print(&ast)) {
            Err(ParseError::Resolution { name, .. }) => prop_assert_eq!(name, "zz_nowhere"),
            other => prop_assert!(false, "expected a resolution error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn loop_variables_may_not_shadow_fields(seed in any::<u64>()) {
        let mut ast = random_program(&mut rng(seed));
        let w = &mut ast.walker_decls[0];
        w.has_fields.push("shadowed".into());
        w.body.push(Stmt::ForIn("shadowed".into(), Expr::List(vec![]), vec![]));
        let rejected = matches!(parse(&pretty_print(&ast)), Err(ParseError::Resolution { .. }));
        prop_assert!(rejected);
    }
}

fn loops_assign(stmts: &[Stmt], inside_loop: bool) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Assign(..) | Stmt::SpawnNode { .. } => inside_loop,
        Stmt::If(_, a, b) => loops_assign(a, inside_loop) || loops_assign(b, inside_loop),
        Stmt::ForIn(_, _, body) => loops_assign(body, true),
        _ => false,
    })
}

/// Runs every walker of a generated program from every node of a small
/// graph holding one node of each type. Reaching a node other than `here`
/// must be impossible: the grammar cannot express it.
fn run_generated(p: &Program) -> Result<usize, String> {
    let tier = TierConfig::default();
    let rt = Runtime::new(p, tier, Arc::new(ActionRegistry::with_builtins(None))).map_err(|e| e.to_string())?;
    let mut ids = Vec::new();
    {
        let mut store = rt.store().lock();
        store
            .apply(|s| {
                for n in &p.node_decls {
                    ids.push(s.create_node(&n.name, ContextMap::new())?);
                }
                for (i, e) in p.edge_decls.iter().enumerate() {
                    for w in 0..ids.len() {
                        s.create_edge(&e.name, ids[w], ids[(w + i + 1) % ids.len()], ContextMap::new())?;
                    }
                }
                Ok(())
            })
            .map_err(|e| e.to_string())?;
    }
    let mut runs = 0;
    for w in &p.walker_decls {
        for id in &ids {
            let args: ContextMap = w.has_fields.iter().map(|f| (f.clone(), ContextValue::List(vec![ContextValue::Int(1)]))).collect();
            match rt.run_walker(&w.name, *id, args) {
                Err(RuntimeError::ScopeViolation { .. }) => return Err(format!("scope fault in {}", w.name)),
                _ => runs += 1,
            }
        }
    }
    Ok(runs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_programs_never_touch_other_nodes(seed in any::<u64>()) {
        let p = random_program(&mut rng(seed));
        // loops that grow walker state can take exponential time; skip them
        prop_assume!(!p.walker_decls.iter().any(|w| loops_assign(&w.body, false)));
        run_generated(&p).map_err(TestCaseError::fail)?;
    }
}

// ---------------------------------------------------------------------------
// reference interpreter

/// An integer-only walker over a small random graph, with the BFS,
/// visit-once and report semantics restated independently.
#[derive(Debug, Clone)]
struct RefGraph {
    v: Vec<i64>,
    /// (src, dst, type) in creation order, which is edge id order
    edges: Vec<(usize, usize, &'static str)>,
}

struct RefWalker {
    a: i64,
    b: i64,
    report: Vec<i64>,
}

enum RefFlow {
    Next,
    Stop,
}

fn ref_expr(e: &Expr, w: &RefWalker, g: &RefGraph, here: usize) -> Option<i64> {
    Some(match e {
        Expr::Literal(Literal::Int(i)) => *i,
        Expr::WalkerField(f) => {
            if f == "a" {
                w.a
            } else {
                w.b
            }
        }
        Expr::HereField(_) => g.v[here],
        Expr::Binary(BinOp::Add, l, r) => ref_expr(l, w, g, here)?.checked_add(ref_expr(r, w, g, here)?)?,
        Expr::Binary(BinOp::Sub, l, r) => ref_expr(l, w, g, here)?.checked_sub(ref_expr(r, w, g, here)?)?,
        _ => unreachable!("outside the reference subset"),
    })
}

fn ref_cond(e: &Expr, w: &RefWalker, g: &RefGraph, here: usize) -> Option<bool> {
    match e {
        Expr::Binary(BinOp::Lt, l, r) => Some(ref_expr(l, w, g, here)? < ref_expr(r, w, g, here)?),
        Expr::Binary(BinOp::Eq, l, r) => Some(ref_expr(l, w, g, here)? == ref_expr(r, w, g, here)?),
        _ => unreachable!("outside the reference subset"),
    }
}

fn ref_block(
    stmts: &[Stmt],
    w: &mut RefWalker,
    g: &mut RefGraph,
    here: usize,
    queue: &mut VecDeque<usize>,
    seen: &mut Vec<bool>,
) -> Option<RefFlow> {
    for s in stmts {
        match s {
            Stmt::Assign(LValue::WalkerField(f), e) => {
                let x = ref_expr(e, w, g, here)?;
                if f == "a" {
                    w.a = x
                } else {
                    w.b = x
                }
            }
            Stmt::Assign(LValue::HereField(_), e) => g.v[here] = ref_expr(e, w, g, here)?,
            Stmt::Report(e) => {
                let x = ref_expr(e, w, g, here)?;
                w.report.push(x);
            }
            Stmt::Disengage => return Some(RefFlow::Stop),
            Stmt::If(c, t, o) => {
                let branch = if ref_cond(c, w, g, here)? { t } else { o };
                if let RefFlow::Stop = ref_block(branch, w, g, here, queue, seen)? {
                    return Some(RefFlow::Stop);
                }
            }
            Stmt::Take { direction, edge_type, .. } => {
                for (src, dst, ty) in g.edges.clone() {
                    if edge_type.as_deref().is_some_and(|t| t != ty) {
                        continue;
                    }
                    let next = match direction {
                        Direction::Out if src == here => dst,
                        Direction::In if dst == here => src,
                        Direction::Both if src == here => dst,
                        Direction::Both if dst == here => src,
                        _ => continue,
                    };
                    if !seen[next] {
                        seen[next] = true;
                        queue.push_back(next);
                    }
                }
            }
            _ => unreachable!("outside the reference subset"),
        }
    }
    Some(RefFlow::Next)
}

/// Report and final node values, or `None` on an arithmetic fault.
fn ref_run(body: &[Stmt], g: &mut RefGraph, start: usize, a: i64, b: i64) -> Option<(Vec<i64>, Vec<i64>)> {
    let mut w = RefWalker { a, b, report: Vec::new() };
    let mut seen = vec![false; g.v.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(here) = queue.pop_front() {
        if let RefFlow::Stop = ref_block(body, &mut w, g, here, &mut queue, &mut seen)? {
            break;
        }
    }
    Some((w.report, g.v.clone()))
}

fn int_expr(depth: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        (0i64..10).prop_map(|i| Expr::Literal(Literal::Int(i))),
        prop_oneof![Just("a"), Just("b")].prop_map(|f| Expr::WalkerField(f.into())),
        Just(Expr::HereField("v".into())),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    prop_oneof![
        2 => leaf,
        1 => (int_expr(depth - 1), int_expr(depth - 1), any::<bool>())
            .prop_map(|(l, r, add)| Expr::Binary(if add { BinOp::Add } else { BinOp::Sub }, Box::new(l), Box::new(r))),
    ]
    .boxed()
}

fn int_stmt(depth: u32) -> BoxedStrategy<Stmt> {
    let simple = prop_oneof![
        4 => (prop_oneof![Just("a"), Just("b")], int_expr(2)).prop_map(|(f, e)| Stmt::Assign(LValue::WalkerField(f.into()), e)),
        4 => int_expr(2).prop_map(|e| Stmt::Assign(LValue::HereField("v".into()), e)),
        4 => int_expr(2).prop_map(Stmt::Report),
        4 => (0u8..3, prop::option::of(prop_oneof![Just("next"), Just("alt")])).prop_map(|(d, t)| Stmt::Take {
            direction: [Direction::Out, Direction::In, Direction::Both][d as usize],
            edge_type: t.map(String::from),
            node_type: None,
        }),
        1 => Just(Stmt::Disengage),
    ];
    if depth == 0 {
        return simple.boxed();
    }
    prop_oneof![
        4 => simple,
        1 => (int_expr(1), int_expr(1), any::<bool>(), proptest::collection::vec(int_stmt(depth - 1), 0..3), proptest::collection::vec(int_stmt(depth - 1), 0..2))
            .prop_map(|(l, r, lt, t, o)| Stmt::If(Expr::Binary(if lt { BinOp::Lt } else { BinOp::Eq }, Box::new(l), Box::new(r)), t, o)),
    ]
    .boxed()
}

fn ref_graph() -> impl Strategy<Value = RefGraph> {
    (1usize..8).prop_flat_map(|n| {
        (
            proptest::collection::vec(-20i64..20, n),
            proptest::collection::vec((0..n, 0..n, prop_oneof![Just("next"), Just("alt")]), 0..(2 * n)),
        )
            .prop_map(|(v, edges)| RefGraph { v, edges })
    })
}

const REF_DECLS: &str = "node item { has v; }\nedge next { }\nedge alt { }\n";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn interpreter_agrees_with_reference(
        body in proptest::collection::vec(int_stmt(2), 1..7),
        graph in ref_graph(),
        start in 0usize..8,
        a in -5i64..5,
        b in -5i64..5,
        threshold in prop_oneof![Just(0usize), Just(64usize)],
    ) {
        let start = start % graph.v.len();
        let mut program = parse(REF_DECLS).unwrap();
        program.walker_decls.push(jacette::lang::WalkerDecl {
            name: "w".into(),
            has_fields: vec!["a".into(), "b".into()],
            can_actions: vec![],
            body: body.clone(),
        });
        let tier = TierConfig { fast_edge_threshold: threshold, ..TierConfig::default() };
        let rt = Runtime::new(&program, tier, Arc::new(ActionRegistry::new(None))).unwrap();
        let mut ids = Vec::new();
        rt.store().lock().apply(|s| {
            for v in &graph.v {
                let mut ctx = ContextMap::new();
                ctx.insert("v".into(), ContextValue::Int(*v));
                ids.push(s.create_node("item", ctx)?);
            }
            for (src, dst, ty) in &graph.edges {
                s.create_edge(ty, ids[*src], ids[*dst], ContextMap::new())?;
            }
            Ok(())
        }).unwrap();
        let args: ContextMap = [("a".to_string(), ContextValue::Int(a)), ("b".to_string(), ContextValue::Int(b))].into_iter().collect();
        let got = rt.run_walker("w", ids[start], args);
        let mut g = graph.clone();
        let want = ref_run(&body, &mut g, start, a, b);
        match (got, want) {
            (Ok(out), Some((report, values))) => {
                let ints: Vec<i64> = out.report.iter().map(|v| v.as_i64().unwrap()).collect();
                prop_assert_eq!(ints, report);
                let mut store = rt.store().lock();
                let mut ws = jacette::storage::WorkingSet::new();
                let mut s = jacette::graph::ops::Session::new(&mut store, &mut ws);
                let stored: Vec<i64> = ids.iter().map(|id| s.node(*id).unwrap().context["v"].as_i64().unwrap()).collect();
                prop_assert_eq!(stored, values);
            }
            (Err(RuntimeError::Type(_)), None) => {}
            (got, want) => prop_assert!(false, "engine {:?} vs reference {:?}\n{}", got.map(|o| o.report), want, pretty_print(&program)),
        }
    }
}

// ---------------------------------------------------------------------------
// orchestrator policy

fn profiles() -> impl Strategy<Value = (Vec<ActionProfile>, i64)> {
    proptest::collection::vec((100.0f64..5000.0, 0.5f64..4.0, 0u64..50), 1..7).prop_flat_map(|spec| {
        let total: u64 = spec.iter().map(|s| s.2).sum();
        let ps: Vec<ActionProfile> = spec
            .iter()
            .enumerate()
            .map(|(i, (l, cc, m))| ActionProfile::new(&format!("a{i}"), *l, l * cc, *m, 1))
            .collect();
        (Just(ps), 0..=total as i64 + 5)
    })
}

proptest! {
    #[test]
    fn solver_only_picks_feasible_configs((ps, budget) in profiles(), noise in 0.0f64..0.05, seed in any::<u64>()) {
        let model = jacette::jsorc::AnalyticModel::from_profiles(&ps);
        let mut ev = jacette::jsorc::ModelEvaluator::new(model, noise, seed);
        let s = solve_config(&ps, &PolicyParams::default(), budget, &mut ev).unwrap();
        let used: u64 = ps.iter().enumerate().filter(|(i, _)| s.config.is_local(*i)).map(|(_, p)| p.mem_footprint_bytes).sum();
        prop_assert!(used as i64 <= budget);
        for (c, _) in &s.scores {
            prop_assert!(c.footprint(&ps.iter().map(|p| p.mem_footprint_bytes).collect::<Vec<_>>()) as i64 <= budget);
        }
    }

    #[test]
    fn tie_rule_prefers_fewer_locals(scores in proptest::collection::btree_map(0u64..64, 100.0f64..200.0, 1..20), tie in 0.0f64..0.1) {
        let scored: Vec<(ComponentConfig, f64)> = scores.iter().map(|(m, s)| (ComponentConfig(*m), *s)).collect();
        let best = scores.values().cloned().fold(f64::INFINITY, f64::min);
        let chosen = pick_best(&scored, tie).unwrap();
        prop_assert!(scores[&chosen.0] <= best * (1.0 + tie));
        let tied: BTreeMap<u64, f64> = scores.iter().filter(|(_, s)| **s <= best * (1.0 + tie)).map(|(m, s)| (*m, *s)).collect();
        for m in tied.keys() {
            let key = (m.count_ones(), *m);
            prop_assert!((chosen.0.count_ones(), chosen.0) <= key);
        }
    }
}
