//! Generators and reference models shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use jacette::actions::ActionRegistry;
use jacette::graph::{Object, TraversalDirection};
use jacette::lang::{BinOp, Direction, EdgeDecl, Expr, LValue, Literal, NodeDecl, Program, SpawnDirection, Stmt, UnaryOp, WalkerDecl};
use jacette::storage::{TierConfig, WorkingSet};
use jacette::graph::ops::Session;
use jacette::value::canonical_map;
use jacette::{ContextMap, ContextValue, ObjectId, Runtime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Fast edge transparency

pub const FUSION_PROGRAM: &str = r#"
node item { has v; }
edge link { has label; }
walker tour { take -->; report here.v; }
walker back { take <--:link; report [here.v]; }
walker grow { spawn here ++>:link item { v = 0; }; report here.v; }
walker bump { here.v = here.v + 1; take <-->; report here.v; }
"#;

const WALKERS: [&str; 4] = ["tour", "back", "grow", "bump"];

/// One graph operation. Node operands index the list of ids created so far;
/// deleted nodes stay in the list so later operations on them fail alike.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphOp {
    AddNode(i64),
    AddEdge { src: usize, dst: usize, label: usize },
    SetNode { node: usize, v: i64 },
    /// Rewrites the label of the `nth` incident edge of `node`.
    SetEdge { node: usize, nth: usize, label: usize },
    DeleteNode(usize),
    Neighbors { node: usize, dir: u8 },
    Walk { walker: usize, node: usize },
    ClearCache,
}

/// Labels up to this many bytes straddle any threshold in 16..64.
pub const MAX_LABEL: usize = 80;

pub fn random_ops(rng: &mut impl Rng, len: usize) -> Vec<GraphOp> {
    (0..len)
        .map(|_| match rng.gen_range(0..20) {
            0..=3 => GraphOp::AddNode(rng.gen_range(-5..50)),
            4..=8 => GraphOp::AddEdge {
                src: rng.gen_range(0..64),
                dst: rng.gen_range(0..64),
                label: rng.gen_range(0..=MAX_LABEL),
            },
            9 => GraphOp::SetNode {
                node: rng.gen_range(0..64),
                v: rng.gen_range(0..9),
            },
            10 | 11 => GraphOp::SetEdge {
                node: rng.gen_range(0..64),
                nth: rng.gen_range(0..4),
                label: rng.gen_range(0..=MAX_LABEL),
            },
            12 => GraphOp::DeleteNode(rng.gen_range(0..64)),
            13 | 14 => GraphOp::Neighbors {
                node: rng.gen_range(0..64),
                dir: rng.gen_range(0..3),
            },
            15..=18 => GraphOp::Walk {
                walker: rng.gen_range(0..WALKERS.len()),
                node: rng.gen_range(0..64),
            },
            _ => GraphOp::ClearCache,
        })
        .collect()
}

fn dir(d: u8) -> TraversalDirection {
    match d % 3 {
        0 => TraversalDirection::Out,
        1 => TraversalDirection::In,
        _ => TraversalDirection::Both,
    }
}

fn label(len: usize) -> ContextMap {
    let mut m = ContextMap::new();
    m.insert("label".into(), ContextValue::Str("x".repeat(len)));
    m
}

/// Canonical text of the neighbors of `id`; the storage form of each edge
/// is deliberately left out.
fn neighbor_text(s: &mut Session, id: ObjectId, d: TraversalDirection) -> String {
    match s.neighbors(id, d, None) {
        Ok(list) => {
            let items: Vec<String> = list
                .iter()
                .map(|(e, across)| format!("[{},{},{},{},{},{}]", e.id, e.type_name, canonical_map(&e.context), e.src, e.dst, across))
                .collect();
            format!("[{}]", items.join(","))
        }
        Err(e) => format!("error: {e}"),
    }
}

/// Applies `ops` to a fresh runtime with the given fast edge threshold and
/// returns one canonical line per operation plus a final graph dump.
pub fn fusion_transcript(ops: &[GraphOp], threshold: usize) -> String {
    let tier = TierConfig {
        fast_edge_threshold: threshold,
        cache_capacity: 8,
        ..TierConfig::default()
    };
    let rt = Runtime::from_source(FUSION_PROGRAM, tier, Arc::new(ActionRegistry::new(None))).expect("fusion program");
    let mut nodes: Vec<ObjectId> = Vec::new();
    let mut out = String::new();
    let pick = |nodes: &[ObjectId], i: usize| if nodes.is_empty() { ObjectId(999_999) } else { nodes[i % nodes.len()] };
    for op in ops {
        let line = match op {
            GraphOp::AddNode(v) => {
                let mut ctx = ContextMap::new();
                ctx.insert("v".into(), ContextValue::Int(*v));
                match rt.store().lock().apply(|s| s.create_node("item", ctx)) {
                    Ok((id, _)) => {
                        nodes.push(id);
                        format!("node {id}")
                    }
                    Err(e) => format!("error: {e}"),
                }
            }
            GraphOp::AddEdge { src, dst, label: len } => {
                let (a, b) = (pick(&nodes, *src), pick(&nodes, *dst));
                match rt.store().lock().apply(|s| s.create_edge("link", a, b, label(*len))) {
                    Ok((id, _)) => format!("edge {id}"),
                    Err(e) => format!("error: {e}"),
                }
            }
            GraphOp::SetNode { node, v } => {
                let id = pick(&nodes, *node);
                match rt.store().lock().apply(|s| s.set_node_field(id, "v", ContextValue::Int(*v))) {
                    Ok(_) => "ok".to_string(),
                    Err(e) => format!("error: {e}"),
                }
            }
            GraphOp::SetEdge { node, nth, label: len } => {
                let id = pick(&nodes, *node);
                let r = rt.store().lock().apply(|s| {
                    let edges = s.neighbors(id, TraversalDirection::Both, None)?;
                    match edges.get(*nth % edges.len().max(1)) {
                        Some((e, _)) => {
                            let eid = e.id;
                            s.set_edge_field(id, eid, "label", ContextValue::Str("x".repeat(*len)))?;
                            Ok(Some(eid))
                        }
                        None => Ok(None),
                    }
                });
                match r {
                    Ok((Some(eid), _)) => format!("set {eid}"),
                    Ok((None, _)) => "no edge".to_string(),
                    Err(e) => format!("error: {e}"),
                }
            }
            GraphOp::DeleteNode(i) => {
                let id = pick(&nodes, *i);
                match rt.store().lock().apply(|s| s.delete_node(id)) {
                    Ok((n, _)) => format!("deleted {n}"),
                    Err(e) => format!("error: {e}"),
                }
            }
            GraphOp::Neighbors { node, dir: d } => {
                let id = pick(&nodes, *node);
                let mut store = rt.store().lock();
                let mut ws = WorkingSet::new();
                neighbor_text(&mut Session::new(&mut store, &mut ws), id, dir(*d))
            }
            GraphOp::Walk { walker, node } => {
                let id = pick(&nodes, *node);
                match rt.run_walker(WALKERS[*walker], id, ContextMap::new()) {
                    Ok(o) => {
                        let items: Vec<String> = o.report.iter().map(ContextValue::canonical).collect();
                        format!("report [{}] {:?}", items.join(","), o.status)
                    }
                    Err(e) => format!("error: {e}"),
                }
            }
            GraphOp::ClearCache => {
                rt.store().lock().clear_cache();
                "cleared".to_string()
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    // spawned nodes are reachable only through the scan, so dump by id range
    let mut store = rt.store().lock();
    let ids: BTreeSet<ObjectId> = store
        .scan()
        .expect("scan")
        .iter()
        .filter_map(|o| match o {
            Object::Node(n) => Some(n.id),
            Object::Edge(_) => None,
        })
        .collect();
    let mut ws = WorkingSet::new();
    let mut s = Session::new(&mut store, &mut ws);
    for id in ids {
        let ctx = canonical_map(&s.node(id).expect("scanned node").context);
        let nb = neighbor_text(&mut s, id, TraversalDirection::Both);
        out.push_str(&format!("final {id} {ctx} {nb}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Reference LRU

/// Vector-backed LRU, most recently used first. Deliberately naive.
#[derive(Debug, Clone)]
pub struct RefLru {
    cap: usize,
    entries: Vec<(u64, i64)>,
}

impl RefLru {
    pub fn new(cap: usize) -> Self {
        RefLru { cap, entries: Vec::new() }
    }

    pub fn get(&mut self, k: u64) -> Option<i64> {
        let i = self.entries.iter().position(|e| e.0 == k)?;
        let e = self.entries.remove(i);
        self.entries.insert(0, e);
        Some(e.1)
    }

    /// Returns the evicted key, if any.
    pub fn put(&mut self, k: u64, v: i64) -> Option<u64> {
        if let Some(i) = self.entries.iter().position(|e| e.0 == k) {
            self.entries.remove(i);
            self.entries.insert(0, (k, v));
            return None;
        }
        self.entries.insert(0, (k, v));
        if self.entries.len() > self.cap {
            return self.entries.pop().map(|e| e.0);
        }
        None
    }

    pub fn remove(&mut self, k: u64) -> bool {
        match self.entries.iter().position(|e| e.0 == k) {
            Some(i) => {
                self.entries.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn order(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LruOp {
    Get(u64),
    Put(u64, i64),
    Remove(u64),
}

pub fn random_lru_ops(rng: &mut impl Rng, len: usize, keys: u64) -> Vec<LruOp> {
    (0..len)
        .map(|_| {
            let k = rng.gen_range(1..=keys);
            match rng.gen_range(0..10) {
                0..=3 => LruOp::Get(k),
                4..=8 => LruOp::Put(k, rng.gen_range(-1000..1000)),
                _ => LruOp::Remove(k),
            }
        })
        .collect()
}

pub fn cache_object(id: u64, v: i64) -> Object {
    let mut context = ContextMap::new();
    context.insert("v".into(), ContextValue::Int(v));
    Object::Node(jacette::graph::NodeRecord {
        id: ObjectId(id),
        type_name: "item".into(),
        context,
        out_edges: Vec::new(),
        in_edges: Vec::new(),
        access_list: None,
        fused_edges: Vec::new(),
    })
}

pub fn cached_value(o: &Object) -> i64 {
    match o {
        Object::Node(n) => n.context["v"].as_i64().expect("int v"),
        Object::Edge(_) => panic!("cache holds nodes only"),
    }
}

// ---------------------------------------------------------------------------
// AST generation

const NODE_TYPES: [&str; 3] = ["day", "user", "box"];
const EDGE_TYPES: [&str; 2] = ["next", "owns"];
const NODE_FIELDS: [&str; 5] = ["date", "tasks", "label", "weight", "secret"];
const EDGE_FIELDS: [&str; 2] = ["w", "tag"];
const WALKER_FIELDS: [&str; 4] = ["n", "seen", "acc", "ok"];
const LOOP_VARS: [&str; 3] = ["x", "y", "item"];
const ACTIONS: [&str; 4] = ["summarize", "upper", "length", "concat"];
const STR_ALPHABET: [char; 10] = ['a', 'Z', ' ', '"', '\\', '\n', 'é', '7', ':', '{'];

/// Names visible while generating one walker body.
struct Scope {
    has: Vec<String>,
    can: Vec<String>,
    vars: Vec<String>,
    here_fields: Vec<String>,
    node_types: Vec<String>,
    edge_types: Vec<String>,
    /// node type → its fields, for spawn initializers
    node_fields: Vec<(String, Vec<String>)>,
}

fn subset(rng: &mut impl Rng, pool: &[&str], max: usize) -> Vec<String> {
    let k = rng.gen_range(0..=max.min(pool.len()));
    let mut v: Vec<String> = pool.choose_multiple(rng, k).map(|s| s.to_string()).collect();
    v.shuffle(rng);
    v
}

/// A random program that passes name resolution: here-fields are declared
/// by some node type, calls name an action the walker or a node type can
/// use, bare names are loop variables or walker fields, and loop variables
/// never shadow.
pub fn random_program(rng: &mut impl Rng) -> Program {
    let n_nodes = rng.gen_range(1..=NODE_TYPES.len());
    let node_decls: Vec<NodeDecl> = NODE_TYPES[..n_nodes]
        .iter()
        .map(|name| NodeDecl {
            name: name.to_string(),
            has_fields: subset(rng, &NODE_FIELDS, 3),
            access_walkers: if rng.gen_bool(0.3) {
                // the grammar has no empty access list
                let mut names: BTreeSet<String> = subset(rng, &["w0", "w1", "audit"], 2).into_iter().collect();
                names.insert("w0".into());
                Some(names)
            } else {
                None
            },
            can_actions: subset(rng, &ACTIONS, 1),
        })
        .collect();
    let n_edges = rng.gen_range(0..=EDGE_TYPES.len());
    let edge_decls: Vec<EdgeDecl> = EDGE_TYPES[..n_edges]
        .iter()
        .map(|name| EdgeDecl {
            name: name.to_string(),
            has_fields: subset(rng, &EDGE_FIELDS, 2),
        })
        .collect();
    let here_fields: Vec<String> = node_decls
        .iter()
        .flat_map(|d| d.has_fields.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let node_can: Vec<String> = node_decls.iter().flat_map(|d| d.can_actions.iter().cloned()).collect();
    let n_walkers = rng.gen_range(1..=2);
    let walker_decls = (0..n_walkers)
        .map(|i| {
            let has = subset(rng, &WALKER_FIELDS, 3);
            let own_can = subset(rng, &ACTIONS, 2);
            let mut can: Vec<String> = own_can.clone();
            can.extend(node_can.iter().cloned());
            let mut scope = Scope {
                has: has.clone(),
                can,
                vars: Vec::new(),
                here_fields: here_fields.clone(),
                node_types: node_decls.iter().map(|d| d.name.clone()).collect(),
                edge_types: edge_decls.iter().map(|d| d.name.clone()).collect(),
                node_fields: node_decls.iter().map(|d| (d.name.clone(), d.has_fields.clone())).collect(),
            };
            let body = block(rng, &mut scope, 3);
            WalkerDecl {
                name: format!("w{i}"),
                has_fields: has,
                can_actions: own_can,
                body,
            }
        })
        .collect();
    Program {
        node_decls,
        edge_decls,
        walker_decls,
    }
}

fn block(rng: &mut impl Rng, scope: &mut Scope, depth: u32) -> Vec<Stmt> {
    let n = rng.gen_range(0..=4);
    (0..n).map(|_| stmt(rng, scope, depth)).collect()
}

fn stmt(rng: &mut impl Rng, scope: &mut Scope, depth: u32) -> Stmt {
    loop {
        match rng.gen_range(0..10) {
            0 => {
                let mut targets: Vec<LValue> = scope.has.iter().cloned().map(LValue::WalkerField).collect();
                targets.extend(scope.vars.iter().cloned().map(LValue::Var));
                targets.extend(scope.here_fields.iter().cloned().map(LValue::HereField));
                if let Some(t) = targets.choose(rng).cloned() {
                    return Stmt::Assign(t, expr(rng, scope, depth));
                }
            }
            1 => {
                let direction = *[Direction::Out, Direction::In, Direction::Both].choose(rng).unwrap();
                let edge_type = scope.edge_types.choose(rng).filter(|_| rng.gen_bool(0.5)).cloned();
                let node_type = scope.node_types.choose(rng).filter(|_| rng.gen_bool(0.5)).cloned();
                return Stmt::Take {
                    direction,
                    edge_type,
                    node_type,
                };
            }
            2 => {
                let Some(edge_type) = scope.edge_types.choose(rng).cloned() else { continue };
                let (node_type, fields) = scope.node_fields.choose(rng).cloned().expect("at least one node type");
                let k = rng.gen_range(0..=fields.len());
                let init = fields[..k].iter().map(|f| (f.clone(), expr(rng, scope, depth.saturating_sub(1)))).collect();
                let direction = if rng.gen_bool(0.5) { SpawnDirection::Out } else { SpawnDirection::In };
                return Stmt::SpawnNode {
                    direction,
                    edge_type,
                    node_type,
                    init,
                };
            }
            3 if depth > 0 => {
                let cond = expr(rng, scope, depth - 1);
                let then = block(rng, scope, depth - 1);
                let otherwise = if rng.gen_bool(0.5) { block(rng, scope, depth - 1) } else { Vec::new() };
                return Stmt::If(cond, then, otherwise);
            }
            4 if depth > 0 => {
                let free: Vec<&str> = LOOP_VARS.iter().copied().filter(|v| !scope.vars.iter().any(|s| s == v)).collect();
                let Some(var) = free.choose(rng).map(|v| v.to_string()) else { continue };
                let iter = expr(rng, scope, depth - 1);
                scope.vars.push(var.clone());
                let body = block(rng, scope, depth - 1);
                scope.vars.pop();
                return Stmt::ForIn(var, iter, body);
            }
            5 | 6 => return Stmt::Report(expr(rng, scope, depth)),
            7 => return Stmt::Disengage,
            8 => return Stmt::Expr(expr(rng, scope, depth)),
            _ => {}
        }
    }
}

fn literal(rng: &mut impl Rng) -> Literal {
    match rng.gen_range(0..5) {
        0 => Literal::Null,
        1 => Literal::Bool(rng.gen_bool(0.5)),
        2 => Literal::Int(rng.gen_range(0..1_000_000)),
        // eighths and tiny values print exactly and exercise exponents
        3 => {
            if rng.gen_bool(0.2) {
                Literal::Float(rng.gen_range(1..100) as f64 * 1e-7)
            } else {
                Literal::Float(rng.gen_range(0..4000) as f64 / 8.0)
            }
        }
        _ => {
            let n = rng.gen_range(0..8);
            Literal::Str((0..n).map(|_| *STR_ALPHABET.choose(rng).unwrap()).collect())
        }
    }
}

const BINOPS: [BinOp; 10] = [
    BinOp::Or,
    BinOp::And,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Gt,
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
];

fn expr(rng: &mut impl Rng, scope: &Scope, depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        loop {
            match rng.gen_range(0..4) {
                0 => return Expr::Literal(literal(rng)),
                1 => {
                    if let Some(v) = scope.vars.choose(rng) {
                        return Expr::Var(v.clone());
                    }
                }
                2 => {
                    if let Some(f) = scope.has.choose(rng) {
                        return Expr::WalkerField(f.clone());
                    }
                }
                _ => {
                    if let Some(f) = scope.here_fields.choose(rng) {
                        return Expr::HereField(f.clone());
                    }
                }
            }
        }
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 => {
            let op = *BINOPS.choose(rng).unwrap();
            Expr::Binary(op, Box::new(expr(rng, scope, d)), Box::new(expr(rng, scope, d)))
        }
        1 => {
            let op = if rng.gen_bool(0.5) { UnaryOp::Not } else { UnaryOp::Neg };
            Expr::Unary(op, Box::new(expr(rng, scope, d)))
        }
        2 => {
            let n = rng.gen_range(0..=3);
            Expr::List((0..n).map(|_| expr(rng, scope, d)).collect())
        }
        3 => Expr::Index(Box::new(expr(rng, scope, d)), Box::new(expr(rng, scope, d))),
        4 if !scope.can.is_empty() => {
            let name = scope.can.choose(rng).unwrap().clone();
            let n = rng.gen_range(0..=2);
            Expr::ActionCall(name, (0..n).map(|_| expr(rng, scope, d)).collect())
        }
        _ => Expr::Binary(BinOp::Add, Box::new(expr(rng, scope, d)), Box::new(Expr::Literal(literal(rng)))),
    }
}
