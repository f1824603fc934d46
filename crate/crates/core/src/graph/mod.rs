//! Graph data model: nodes, edges, their typed contexts, and the schema
//! derived from a program's node and edge declarations.
//!
//! Structural operations (`create_node`, `create_edge`, `delete_node`,
//! `neighbors`, ...) live in [`ops`] and run against a [`GraphStore`]
//! session so that every object access goes through the storage tiers.
//!
//! [`GraphStore`]: crate::storage::GraphStore

pub mod ops;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::Program;
use crate::value::{ContextMap, ContextValue};

/// Identity of a stored node or edge. Zero is the null reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u64);

impl ObjectId {
    pub const NULL: ObjectId = ObjectId(0);

    pub fn is_null(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: ObjectId,
    pub type_name: String,
    pub context: ContextMap,
    pub out_edges: Vec<ObjectId>,
    pub in_edges: Vec<ObjectId>,
    pub access_list: Option<BTreeSet<String>>,
    /// Fast edges stored inline; each fast edge is kept by both endpoints.
    pub fused_edges: Vec<EdgeRecord>,
}

impl NodeRecord {
    pub fn allows(&self, walker_type: &str) -> bool {
        self.access_list
            .as_ref()
            .is_none_or(|allowed| allowed.contains(walker_type))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: ObjectId,
    pub type_name: String,
    pub context: ContextMap,
    pub src: ObjectId,
    pub dst: ObjectId,
    pub is_fast: bool,
}

impl EdgeRecord {
    /// The endpoint opposite `node`.
    pub fn other(&self, node: ObjectId) -> ObjectId {
        if self.src == node {
            self.dst
        } else {
            self.src
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Node(NodeRecord),
    Edge(EdgeRecord),
}

impl Object {
    pub fn id(&self) -> ObjectId {
        match self {
            Object::Node(n) => n.id,
            Object::Edge(e) => e.id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Object::Node(_) => "node",
            Object::Edge(_) => "edge",
        }
    }

    pub fn type_name(&self) -> &str {
        match self {
            Object::Node(n) => &n.type_name,
            Object::Edge(e) => &e.type_name,
        }
    }

    /// Canonical JSON body of the record (without the storage header line).
    pub fn canonical(&self) -> String {
        match self {
            Object::Node(n) => serde_json::to_string(n),
            Object::Edge(e) => serde_json::to_string(e),
        }
        .expect("records always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraversalDirection {
    Out,
    In,
    Both,
}

impl From<crate::lang::Direction> for TraversalDirection {
    fn from(d: crate::lang::Direction) -> Self {
        match d {
            crate::lang::Direction::Out => TraversalDirection::Out,
            crate::lang::Direction::In => TraversalDirection::In,
            crate::lang::Direction::Both => TraversalDirection::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{type_name}` declares no field `{field}`")]
    UndeclaredField { type_name: String, field: String },
    #[error("edge endpoint {0} does not resolve to a node")]
    DanglingEndpoint(ObjectId),
    #[error("object {0} not found")]
    NotFound(ObjectId),
    #[error("object {0} is a {1}, expected a {2}")]
    WrongKind(ObjectId, &'static str, &'static str),
    #[error("storage i/o failure: {0}")]
    Io(String),
    #[error("corrupt stored object {id}: {message}")]
    Corrupt { id: ObjectId, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub fields: Vec<String>,
    pub access: Option<BTreeSet<String>>,
}

/// Declared node and edge types with their closed field lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub nodes: HashMap<String, TypeDecl>,
    pub edges: HashMap<String, TypeDecl>,
}

impl Schema {
    pub fn from_program(program: &Program) -> Self {
        let nodes = program
            .node_decls
            .iter()
            .map(|d| {
                (
                    d.name.clone(),
                    TypeDecl {
                        fields: d.has_fields.clone(),
                        access: d.access_walkers.clone(),
                    },
                )
            })
            .collect();
        let edges = program
            .edge_decls
            .iter()
            .map(|d| {
                (
                    d.name.clone(),
                    TypeDecl {
                        fields: d.has_fields.clone(),
                        access: None,
                    },
                )
            })
            .collect();
        Schema { nodes, edges }
    }

    /// Builds a full context in declaration order. Missing keys become null;
    /// undeclared keys are rejected.
    pub fn build_context(
        decl: &TypeDecl,
        type_name: &str,
        given: ContextMap,
    ) -> Result<ContextMap, GraphError> {
        if let Some(bad) = given.keys().find(|k| !decl.fields.contains(k)) {
            return Err(GraphError::UndeclaredField {
                type_name: type_name.to_owned(),
                field: bad.clone(),
            });
        }
        let mut given = given;
        Ok(decl
            .fields
            .iter()
            .map(|f| (f.clone(), given.swap_remove(f).unwrap_or(ContextValue::Null)))
            .collect())
    }

    pub fn node(&self, type_name: &str) -> Result<&TypeDecl, GraphError> {
        self.nodes
            .get(type_name)
            .ok_or_else(|| GraphError::UnknownType(type_name.to_owned()))
    }

    pub fn edge(&self, type_name: &str) -> Result<&TypeDecl, GraphError> {
        self.edges
            .get(type_name)
            .ok_or_else(|| GraphError::UnknownType(type_name.to_owned()))
    }
}
