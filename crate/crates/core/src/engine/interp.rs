use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::Serialize;

use super::eval;
use super::{RuntimeError, WalkerRegistry};
use crate::actions::{ActionError, ActionRegistry};
use crate::graph::ops::Session;
use crate::graph::{GraphError, ObjectId};
use crate::lang::{BinOp, Expr, LValue, Program, SpawnDirection, Stmt, WalkerDecl};
use crate::storage::{FetchCounts, GraphStore, WorkingSet};
use crate::value::{ContextMap, ContextValue};

/// Retries of a run whose commit raced a concurrent writer.
pub const MAX_COMMIT_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkerStatus {
    Running,
    Disengaged,
    Finished,
    Failed,
}

enum Flow {
    Next,
    Disengage,
}

/// A walker in flight: its private state, traversal queue and report.
pub struct WalkerInstance {
    decl: Arc<WalkerDecl>,
    base: Arc<Program>,
    start: ObjectId,
    args: ContextMap,
    pub state: ContextMap,
    pub queue: VecDeque<ObjectId>,
    pub visited: BTreeSet<ObjectId>,
    pub current: ObjectId,
    pub status: WalkerStatus,
    pub report: Vec<ContextValue>,
    /// Fetches of the committed run.
    pub fetches: FetchCounts,
    /// Records written at its commit.
    pub store_writes: u64,
    ws: WorkingSet,
}

/// Creates an instance of walker `name` positioned to start at `start`.
pub fn spawn_walker(
    registry: &WalkerRegistry,
    store: &Mutex<GraphStore>,
    name: &str,
    start: ObjectId,
    args: ContextMap,
) -> Result<WalkerInstance, RuntimeError> {
    let decl = registry
        .get(name)
        .ok_or_else(|| RuntimeError::UnknownWalker(name.to_owned()))?;
    WalkerInstance::new(decl, registry.base().clone(), store, start, args)
}

fn session<T>(
    ws: &mut WorkingSet,
    store: &Mutex<GraphStore>,
    f: impl FnOnce(&mut Session) -> Result<T, GraphError>,
) -> Result<T, RuntimeError> {
    let mut guard = store.lock();
    Ok(f(&mut Session::new(&mut guard, ws))?)
}

impl WalkerInstance {
    fn new(
        decl: Arc<WalkerDecl>,
        base: Arc<Program>,
        store: &Mutex<GraphStore>,
        start: ObjectId,
        args: ContextMap,
    ) -> Result<Self, RuntimeError> {
        if let Some(bad) = args.keys().find(|k| !decl.has_fields.contains(k)) {
            return Err(GraphError::UndeclaredField {
                type_name: decl.name.clone(),
                field: bad.clone(),
            }
            .into());
        }
        let state = decl
            .has_fields
            .iter()
            .map(|f| (f.clone(), args.get(f).cloned().unwrap_or_default()))
            .collect();
        let mut ws = WorkingSet::new();
        session(&mut ws, store, |s| s.node(start).map(|_| ()))?;
        Ok(WalkerInstance {
            decl,
            base,
            start,
            args,
            state,
            queue: VecDeque::from([start]),
            visited: BTreeSet::from([start]),
            current: ObjectId::NULL,
            status: WalkerStatus::Running,
            report: Vec::new(),
            fetches: FetchCounts::default(),
            store_writes: 0,
            ws,
        })
    }

    pub fn walker_type(&self) -> &str {
        &self.decl.name
    }

    /// A fresh instance with the same declaration, start node and arguments.
    pub fn respawn(&self, store: &Mutex<GraphStore>) -> Result<Self, RuntimeError> {
        WalkerInstance::new(self.decl.clone(), self.base.clone(), store, self.start, self.args.clone())
    }

    /// Runs to completion and commits. On any error nothing is committed.
    /// A commit that conflicts with a concurrent run fails with `Conflict`.
    pub fn run(&mut self, store: &Mutex<GraphStore>, actions: &ActionRegistry) -> Result<Vec<ContextValue>, RuntimeError> {
        if self.status != WalkerStatus::Running {
            return Err(RuntimeError::Type("walker instance has already run".into()));
        }
        let result = self.walk(store, actions).and_then(|()| {
            let ws = std::mem::take(&mut self.ws);
            let fetches = ws.fetches();
            match store.lock().commit_if_current(ws)? {
                Some(summary) => {
                    self.fetches = fetches;
                    self.store_writes = summary.writes;
                    Ok(())
                }
                None => Err(RuntimeError::Conflict(1)),
            }
        });
        match result {
            Ok(()) => Ok(self.report.clone()),
            Err(e) => {
                self.status = WalkerStatus::Failed;
                Err(e)
            }
        }
    }

    /// Runs, respawning after commit conflicts up to [`MAX_COMMIT_ATTEMPTS`]
    /// times. Returns the instance that completed.
    pub fn run_to_completion(
        mut self,
        store: &Mutex<GraphStore>,
        actions: &ActionRegistry,
    ) -> Result<WalkerInstance, RuntimeError> {
        for _ in 1..MAX_COMMIT_ATTEMPTS {
            match self.run(store, actions) {
                Err(RuntimeError::Conflict(_)) => self = self.respawn(store)?,
                Err(e) => return Err(e),
                Ok(_) => return Ok(self),
            }
        }
        match self.run(store, actions) {
            Err(RuntimeError::Conflict(_)) => Err(RuntimeError::Conflict(MAX_COMMIT_ATTEMPTS)),
            other => other.map(|_| self),
        }
    }

    fn walk(&mut self, store: &Mutex<GraphStore>, actions: &ActionRegistry) -> Result<(), RuntimeError> {
        if let Some(missing) = self.decl.can_actions.iter().find(|a| !actions.contains(a)) {
            return Err(ActionError::UnknownAction(missing.clone()).into());
        }
        let decl = self.decl.clone();
        while let Some(id) = self.queue.pop_front() {
            self.current = id;
            let node = session(&mut self.ws, store, |s| s.node(id).cloned())?;
            if !node.allows(&decl.name) {
                return Err(self.denied(id, &node.type_name));
            }
            let mut vars = Vec::new();
            if let Flow::Disengage = self.block(&decl.body, &mut vars, store, actions)? {
                self.queue.clear();
                self.status = WalkerStatus::Disengaged;
                return Ok(());
            }
        }
        self.status = WalkerStatus::Finished;
        Ok(())
    }

    fn denied(&self, node: ObjectId, node_type: &str) -> RuntimeError {
        RuntimeError::AccessDenied {
            walker: self.decl.name.clone(),
            node_type: node_type.to_owned(),
            node,
        }
    }

    /// Every context access names the node it touches; only `here` is legal.
    fn guard(&self, id: ObjectId) -> Result<(), RuntimeError> {
        if id == self.current {
            Ok(())
        } else {
            Err(RuntimeError::ScopeViolation {
                current: self.current,
                touched: id,
            })
        }
    }

    fn here_get(&mut self, store: &Mutex<GraphStore>, id: ObjectId, field: &str) -> Result<ContextValue, RuntimeError> {
        self.guard(id)?;
        let node = session(&mut self.ws, store, |s| s.node(id).cloned())?;
        // a field the current node's type lacks reads as null
        Ok(node.context.get(field).cloned().unwrap_or_default())
    }

    fn here_set(&mut self, store: &Mutex<GraphStore>, id: ObjectId, field: &str, v: ContextValue) -> Result<(), RuntimeError> {
        self.guard(id)?;
        session(&mut self.ws, store, |s| s.set_node_field(id, field, v))
    }

    fn block(
        &mut self,
        body: &[Stmt],
        vars: &mut Vec<(String, ContextValue)>,
        store: &Mutex<GraphStore>,
        actions: &ActionRegistry,
    ) -> Result<Flow, RuntimeError> {
        for stmt in body {
            if let Flow::Disengage = self.stmt(stmt, vars, store, actions)? {
                return Ok(Flow::Disengage);
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(
        &mut self,
        stmt: &Stmt,
        vars: &mut Vec<(String, ContextValue)>,
        store: &Mutex<GraphStore>,
        actions: &ActionRegistry,
    ) -> Result<Flow, RuntimeError> {
        match stmt {
            Stmt::Assign(target, e) => {
                let v = self.expr(e, vars, store, actions)?;
                match target {
                    LValue::WalkerField(f) => {
                        self.state.insert(f.clone(), v);
                    }
                    LValue::Var(name) => {
                        let slot = vars
                            .iter_mut()
                            .rev()
                            .find(|(n, _)| n == name)
                            .ok_or_else(|| RuntimeError::Type(format!("unbound variable `{name}`")))?;
                        slot.1 = v;
                    }
                    LValue::HereField(f) => self.here_set(store, self.current, f, v)?,
                }
            }
            Stmt::Take {
                direction,
                edge_type,
                node_type,
            } => self.take((*direction).into(), edge_type.as_deref(), node_type.as_deref(), store)?,
            Stmt::SpawnNode {
                direction,
                edge_type,
                node_type,
                init,
            } => {
                let mut ctx = ContextMap::new();
                for (field, e) in init {
                    let v = self.expr(e, vars, store, actions)?;
                    ctx.insert(field.clone(), v);
                }
                let here = self.current;
                self.guard(here)?;
                let dir = *direction;
                session(&mut self.ws, store, |s| {
                    let new = s.create_node(node_type, ctx)?;
                    let (src, dst) = match dir {
                        SpawnDirection::Out => (here, new),
                        SpawnDirection::In => (new, here),
                    };
                    s.create_edge(edge_type, src, dst, ContextMap::new())?;
                    Ok(())
                })?;
            }
            Stmt::If(cond, then, otherwise) => {
                let c = self.expr(cond, vars, store, actions)?;
                let branch = if eval::truthy(&c, "if condition").map_err(RuntimeError::Type)? {
                    then
                } else {
                    otherwise
                };
                return self.block(branch, vars, store, actions);
            }
            Stmt::ForIn(var, e, body) => {
                let items = eval::iterate(&self.expr(e, vars, store, actions)?).map_err(RuntimeError::Type)?;
                for item in items {
                    vars.push((var.clone(), item));
                    let flow = self.block(body, vars, store, actions);
                    vars.pop();
                    if let Flow::Disengage = flow? {
                        return Ok(Flow::Disengage);
                    }
                }
            }
            Stmt::Report(e) => {
                let v = self.expr(e, vars, store, actions)?;
                self.report.push(v);
            }
            Stmt::Disengage => return Ok(Flow::Disengage),
            Stmt::Expr(e) => {
                self.expr(e, vars, store, actions)?;
            }
        }
        Ok(Flow::Next)
    }

    fn take(
        &mut self,
        direction: crate::graph::TraversalDirection,
        edge_type: Option<&str>,
        node_type: Option<&str>,
        store: &Mutex<GraphStore>,
    ) -> Result<(), RuntimeError> {
        let here = self.current;
        let walker = self.decl.name.clone();
        let mut enqueue = Vec::new();
        let mut denied = None;
        session(&mut self.ws, store, |s| {
            for (_, next) in s.neighbors(here, direction, edge_type)? {
                if enqueue.contains(&next) || self.visited.contains(&next) {
                    continue;
                }
                let node = s.node(next)?;
                if node_type.is_some_and(|t| t != node.type_name) {
                    continue;
                }
                if !node.allows(&walker) {
                    denied = Some((next, node.type_name.clone()));
                    break;
                }
                enqueue.push(next);
            }
            Ok(())
        })?;
        if let Some((node, node_type)) = denied {
            return Err(self.denied(node, &node_type));
        }
        for id in enqueue {
            self.visited.insert(id);
            self.queue.push_back(id);
        }
        Ok(())
    }

    fn expr(
        &mut self,
        e: &Expr,
        vars: &mut Vec<(String, ContextValue)>,
        store: &Mutex<GraphStore>,
        actions: &ActionRegistry,
    ) -> Result<ContextValue, RuntimeError> {
        let ty = RuntimeError::Type;
        Ok(match e {
            Expr::Literal(l) => eval::literal(l),
            Expr::Var(name) => vars
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| ty(format!("unbound variable `{name}`")))?,
            Expr::HereField(f) => self.here_get(store, self.current, f)?,
            Expr::WalkerField(f) => self.state.get(f).cloned().unwrap_or_default(),
            Expr::ActionCall(name, args) => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.expr(a, vars, store, actions)?);
                }
                self.check_action(name, store)?;
                actions.call(name, &values)?
            }
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lv = eval::truthy(&self.expr(l, vars, store, actions)?, op.symbol()).map_err(ty)?;
                if lv == (*op == BinOp::Or) {
                    ContextValue::Bool(lv)
                } else {
                    let rv = eval::truthy(&self.expr(r, vars, store, actions)?, op.symbol()).map_err(ty)?;
                    ContextValue::Bool(rv)
                }
            }
            Expr::Binary(op, l, r) => {
                let lv = self.expr(l, vars, store, actions)?;
                let rv = self.expr(r, vars, store, actions)?;
                eval::binary(*op, &lv, &rv).map_err(ty)?
            }
            Expr::Unary(op, inner) => eval::unary(*op, &self.expr(inner, vars, store, actions)?).map_err(ty)?,
            Expr::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(self.expr(i, vars, store, actions)?);
                }
                ContextValue::List(out)
            }
            Expr::Index(base, idx) => {
                let b = self.expr(base, vars, store, actions)?;
                let i = self.expr(idx, vars, store, actions)?;
                eval::index(&b, &i).map_err(ty)?
            }
        })
    }

    /// Walker `can` lists are always callable; node `can` lists only while
    /// `here` is a node of that type.
    fn check_action(&mut self, name: &str, store: &Mutex<GraphStore>) -> Result<(), RuntimeError> {
        if self.decl.can_actions.iter().any(|a| a == name) {
            return Ok(());
        }
        let here = self.current;
        let node_type = session(&mut self.ws, store, |s| s.node(here).map(|n| n.type_name.clone()))?;
        let allowed = self
            .base
            .node(&node_type)
            .is_some_and(|d| d.can_actions.iter().any(|a| a == name));
        if allowed {
            Ok(())
        } else {
            Err(RuntimeError::ActionNotAllowed {
                action: name.to_owned(),
                walker: self.decl.name.clone(),
                node_type,
            })
        }
    }
}
