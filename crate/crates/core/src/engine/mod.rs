//! Walker execution.
//!
//! A walker runs breadth-first: its body executes once per visited node,
//! `take` enqueues unvisited matching neighbours, and `disengage` drops the
//! rest of the queue. The only graph state a body can name is `here`, the
//! node it currently sits on. All changes are held in the run's working set
//! and committed together when the run ends.

mod eval;
mod interp;
mod registry;

pub use interp::{spawn_walker, WalkerInstance, WalkerStatus, MAX_COMMIT_ATTEMPTS};
pub use registry::{RegistrySnapshot, WalkerRegistry};

use serde_json::json;

use crate::actions::ActionError;
use crate::graph::{GraphError, ObjectId};
use crate::lang::ParseError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("unknown walker `{0}`")]
    UnknownWalker(String),
    #[error("source must declare exactly one walker and nothing else")]
    NotAWalker,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("walker `{walker}` may not visit node {node} of type `{node_type}`")]
    AccessDenied {
        walker: String,
        node_type: String,
        node: ObjectId,
    },
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("action `{action}` is not declared by walker `{walker}` or node type `{node_type}`")]
    ActionNotAllowed {
        action: String,
        walker: String,
        node_type: String,
    },
    #[error("runtime type error: {0}")]
    Type(String),
    /// Internal fault: the interpreter touched a node other than `here`.
    #[error("scope violation: touched {touched} while at {current}")]
    ScopeViolation { current: ObjectId, touched: ObjectId },
    #[error("commit conflicted {0} times with concurrent runs")]
    Conflict(usize),
}

impl RuntimeError {
    /// Stable error name used in API responses and CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            RuntimeError::UnknownWalker(_) => "UnknownWalker",
            RuntimeError::NotAWalker => "NotAWalker",
            RuntimeError::Parse(ParseError::Syntax(_)) => "SyntaxError",
            RuntimeError::Parse(ParseError::Resolution { .. }) => "ResolutionError",
            RuntimeError::Graph(GraphError::UnknownType(_)) => "UnknownType",
            RuntimeError::Graph(GraphError::UndeclaredField { .. }) => "UndeclaredField",
            RuntimeError::Graph(GraphError::NotFound(_)) => "NotFound",
            RuntimeError::Graph(GraphError::DanglingEndpoint(_)) => "DanglingEndpoint",
            RuntimeError::Graph(_) => "StorageError",
            RuntimeError::AccessDenied { .. } => "AccessDenied",
            RuntimeError::Action(ActionError::UnknownAction(_)) => "UnknownAction",
            RuntimeError::Action(ActionError::ActionFailure { .. }) => "ActionFailure",
            RuntimeError::ActionNotAllowed { .. } => "ActionNotAllowed",
            RuntimeError::Type(_) => "RuntimeTypeError",
            RuntimeError::ScopeViolation { .. } => "ScopeViolation",
            RuntimeError::Conflict(_) => "Conflict",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        let extra = match self {
            RuntimeError::AccessDenied { walker, node_type, node } => {
                json!({ "walker": walker, "node_type": node_type, "node": node })
            }
            RuntimeError::UnknownWalker(w) => json!({ "walker": w }),
            RuntimeError::Action(ActionError::ActionFailure { name, .. }) => json!({ "action": name }),
            RuntimeError::Parse(e) => json!({ "line": e.line() }),
            _ => json!({}),
        };
        if let (Some(o), Some(e)) = (v.as_object_mut(), extra.as_object()) {
            o.extend(e.clone());
        }
        v
    }
}
