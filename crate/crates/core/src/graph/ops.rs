use std::collections::BTreeSet;

use super::{
    EdgeRecord, GraphError, NodeRecord, Object, ObjectId, Schema, TraversalDirection,
};
use crate::storage::{CommitSummary, GraphStore, WorkingSet};
use crate::value::{context_size, ContextMap, ContextValue};

/// Structural graph operations over a store and a working set. Changes stay
/// in the working set until [`GraphStore::commit`].
pub struct Session<'a> {
    pub store: &'a mut GraphStore,
    pub ws: &'a mut WorkingSet,
}

impl<'a> Session<'a> {
    pub fn new(store: &'a mut GraphStore, ws: &'a mut WorkingSet) -> Self {
        Session { store, ws }
    }

    fn is_fast(&self, context: &ContextMap) -> bool {
        let threshold = self.store.config().fast_edge_threshold;
        threshold > 0 && context_size(context) < threshold
    }

    pub fn node(&mut self, id: ObjectId) -> Result<&NodeRecord, GraphError> {
        match self.store.load(self.ws, id)? {
            Object::Node(n) => Ok(n),
            Object::Edge(_) => Err(GraphError::WrongKind(id, "edge", "node")),
        }
    }

    fn node_mut(&mut self, id: ObjectId) -> Result<&mut NodeRecord, GraphError> {
        self.node(id)?;
        self.ws.mark_dirty(id);
        Ok(self.ws.node_mut(id).expect("loaded above"))
    }

    fn edge(&mut self, id: ObjectId) -> Result<EdgeRecord, GraphError> {
        match self.store.load(self.ws, id)? {
            Object::Edge(e) => Ok(e.clone()),
            Object::Node(_) => Err(GraphError::WrongKind(id, "node", "edge")),
        }
    }

    pub fn create_node(&mut self, type_name: &str, context: ContextMap) -> Result<ObjectId, GraphError> {
        let schema = self.store.schema().clone();
        let decl = schema.node(type_name)?;
        let context = Schema::build_context(decl, type_name, context)?;
        let id = self.store.alloc_id();
        self.ws.insert_new(Object::Node(NodeRecord {
            id,
            type_name: type_name.to_owned(),
            context,
            out_edges: Vec::new(),
            in_edges: Vec::new(),
            access_list: decl.access.clone(),
            fused_edges: Vec::new(),
        }));
        Ok(id)
    }

    pub fn create_edge(
        &mut self,
        type_name: &str,
        src: ObjectId,
        dst: ObjectId,
        context: ContextMap,
    ) -> Result<ObjectId, GraphError> {
        let schema = self.store.schema().clone();
        let decl = schema.edge(type_name)?;
        let context = Schema::build_context(decl, type_name, context)?;
        for end in [src, dst] {
            match self.node(end) {
                Ok(_) => {}
                Err(GraphError::NotFound(_)) | Err(GraphError::WrongKind(..)) => {
                    return Err(GraphError::DanglingEndpoint(end))
                }
                Err(e) => return Err(e),
            }
        }
        let id = self.store.alloc_id();
        let is_fast = self.is_fast(&context);
        let edge = EdgeRecord {
            id,
            type_name: type_name.to_owned(),
            context,
            src,
            dst,
            is_fast,
        };
        if is_fast {
            self.node_mut(src)?.fused_edges.push(edge.clone());
            if dst != src {
                self.node_mut(dst)?.fused_edges.push(edge.clone());
            }
            // materialized for reads; the endpoint files carry it
            self.ws.insert_new(Object::Edge(edge));
        } else {
            self.node_mut(src)?.out_edges.push(id);
            self.node_mut(dst)?.in_edges.push(id);
            self.ws.insert_new(Object::Edge(edge));
        }
        Ok(id)
    }

    /// Deletes a node and every incident edge. Returns 1 + edges removed.
    pub fn delete_node(&mut self, id: ObjectId) -> Result<usize, GraphError> {
        let node = self.node(id)?.clone();
        let normal: BTreeSet<ObjectId> = node.out_edges.iter().chain(&node.in_edges).copied().collect();
        let mut removed = 0;
        for edge_id in &normal {
            let edge = self.edge(*edge_id)?;
            let other = edge.other(id);
            if other != id {
                let other_node = self.node_mut(other)?;
                other_node.out_edges.retain(|e| e != edge_id);
                other_node.in_edges.retain(|e| e != edge_id);
            }
            self.ws.remove(*edge_id);
            removed += 1;
        }
        for edge in &node.fused_edges {
            let other = edge.other(id);
            if other != id {
                self.node_mut(other)?.fused_edges.retain(|e| e.id != edge.id);
            }
            self.ws.remove(edge.id);
            removed += 1;
        }
        self.ws.remove(id);
        Ok(1 + removed)
    }

    /// Incident edges and the node across each, in ascending edge id order.
    /// Fused and stored edges are returned alike.
    pub fn neighbors(
        &mut self,
        id: ObjectId,
        direction: TraversalDirection,
        edge_type: Option<&str>,
    ) -> Result<Vec<(EdgeRecord, ObjectId)>, GraphError> {
        let node = self.node(id)?.clone();
        let wants_out = matches!(direction, TraversalDirection::Out | TraversalDirection::Both);
        let wants_in = matches!(direction, TraversalDirection::In | TraversalDirection::Both);
        let mut ids: BTreeSet<ObjectId> = BTreeSet::new();
        if wants_out {
            ids.extend(&node.out_edges);
        }
        if wants_in {
            ids.extend(&node.in_edges);
        }
        for e in &node.fused_edges {
            if (wants_out && e.src == id) || (wants_in && e.dst == id) {
                ids.insert(e.id);
            }
        }
        let mut out = Vec::with_capacity(ids.len());
        for edge_id in ids {
            let edge = self.edge(edge_id)?;
            if edge_type.is_some_and(|t| t != edge.type_name) {
                continue;
            }
            let across = match direction {
                TraversalDirection::Out => edge.dst,
                TraversalDirection::In => edge.src,
                TraversalDirection::Both => edge.other(id),
            };
            out.push((edge, across));
        }
        Ok(out)
    }

    pub fn set_node_field(
        &mut self,
        id: ObjectId,
        field: &str,
        value: ContextValue,
    ) -> Result<(), GraphError> {
        let node = self.node(id)?;
        if !node.context.contains_key(field) {
            return Err(GraphError::UndeclaredField {
                type_name: node.type_name.clone(),
                field: field.to_owned(),
            });
        }
        self.node_mut(id)?.context.insert(field.to_owned(), value);
        Ok(())
    }

    /// Updates a field of an edge incident to `node`. A fast edge whose
    /// context grows to the threshold is promoted to a stored edge; stored
    /// edges are never demoted.
    pub fn set_edge_field(
        &mut self,
        node: ObjectId,
        edge_id: ObjectId,
        field: &str,
        value: ContextValue,
    ) -> Result<(), GraphError> {
        self.node(node)?;
        let mut edge = self.edge(edge_id)?;
        if edge.src != node && edge.dst != node {
            return Err(GraphError::NotFound(edge_id));
        }
        if !edge.context.contains_key(field) {
            return Err(GraphError::UndeclaredField {
                type_name: edge.type_name.clone(),
                field: field.to_owned(),
            });
        }
        edge.context.insert(field.to_owned(), value);
        let was_fast = edge.is_fast;
        if was_fast && !self.is_fast(&edge.context) {
            edge.is_fast = false;
        }
        if was_fast {
            for end in [edge.src, edge.dst] {
                let n = self.node_mut(end)?;
                n.fused_edges.retain(|e| e.id != edge_id);
                if edge.is_fast {
                    n.fused_edges.push(edge.clone());
                    n.fused_edges.sort_by_key(|e| e.id);
                }
            }
        }
        if was_fast && !edge.is_fast {
            self.node_mut(edge.src)?.out_edges.push(edge_id);
            self.node_mut(edge.dst)?.in_edges.push(edge_id);
        }
        *self.ws.edge_mut(edge_id).expect("loaded above") = edge;
        self.ws.mark_dirty(edge_id);
        Ok(())
    }
}

impl GraphStore {
    /// Runs `f` in a fresh session and commits it; the session's changes are
    /// discarded if `f` fails.
    pub fn apply<T>(
        &mut self,
        f: impl FnOnce(&mut Session) -> Result<T, GraphError>,
    ) -> Result<(T, CommitSummary), GraphError> {
        let mut ws = WorkingSet::new();
        let value = f(&mut Session::new(self, &mut ws))?;
        let summary = self.commit(ws)?;
        Ok((value, summary))
    }

    /// Full referential-integrity audit of the persistent tier. Returns a
    /// description of each violation found.
    pub fn audit(&mut self) -> Result<Vec<String>, GraphError> {
        use std::collections::HashMap;
        let objects = self.scan()?;
        let mut nodes: HashMap<ObjectId, &NodeRecord> = HashMap::new();
        let mut edges: HashMap<ObjectId, &EdgeRecord> = HashMap::new();
        for o in &objects {
            match o {
                Object::Node(n) => {
                    nodes.insert(n.id, n);
                }
                Object::Edge(e) => {
                    edges.insert(e.id, e);
                }
            }
        }
        let mut problems = Vec::new();
        for n in nodes.values() {
            if n.access_list.as_ref().is_some_and(|a| a.is_empty()) {
                problems.push(format!("node {} has an empty access list", n.id));
            }
            for (list, end) in [(&n.out_edges, "src"), (&n.in_edges, "dst")] {
                for e in list {
                    match edges.get(e) {
                        None => problems.push(format!("node {} lists missing edge {e}", n.id)),
                        Some(edge) => {
                            let ok = if end == "src" { edge.src == n.id } else { edge.dst == n.id };
                            if !ok || edge.is_fast {
                                problems.push(format!("node {} lists edge {e} inconsistently", n.id));
                            }
                        }
                    }
                }
            }
            for f in &n.fused_edges {
                if f.src != n.id && f.dst != n.id {
                    problems.push(format!("node {} fuses foreign edge {}", n.id, f.id));
                }
                let other = f.other(n.id);
                match nodes.get(&other) {
                    None => problems.push(format!("fused edge {} dangles to {other}", f.id)),
                    Some(o) => {
                        if !o.fused_edges.iter().any(|g| g == f) {
                            problems.push(format!("fused edge {} differs between endpoints", f.id));
                        }
                    }
                }
            }
        }
        for e in edges.values() {
            for end in [e.src, e.dst] {
                if end.is_null() || !nodes.contains_key(&end) {
                    problems.push(format!("edge {} dangles to {end}", e.id));
                }
            }
            if e.is_fast {
                problems.push(format!("fast edge {} stored standalone", e.id));
            }
        }
        Ok(problems)
    }
}
