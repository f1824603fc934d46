//! Seed graphs: a JSON list of node and edge objects, created in order.
//! Edges name their endpoints by node label.
//!
//! ```json
//! [{"node": "day", "label": "d1", "context": {"date": "2024-01-01"}},
//!  {"node": "day", "label": "d2"},
//!  {"edge": "next", "src": "d1", "dst": "d2"}]
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::ops::Session;
use crate::graph::{GraphError, ObjectId};
use crate::value::ContextMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedObject {
    Node {
        node: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default)]
        context: ContextMap,
    },
    Edge {
        edge: String,
        src: String,
        dst: String,
        #[serde(default)]
        context: ContextMap,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeedError {
    #[error("seed edge refers to unknown label `{0}`")]
    UnknownLabel(String),
    #[error("seed label `{0}` is used twice")]
    DuplicateLabel(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("bad seed file: {0}")]
    Format(String),
}

pub fn parse_seed(text: &str) -> Result<Vec<SeedObject>, SeedError> {
    serde_json::from_str(text).map_err(|e| SeedError::Format(e.to_string()))
}

/// Creates the seed objects in order. Returns the id of every labelled node.
pub fn apply_seed(s: &mut Session, objects: &[SeedObject]) -> Result<BTreeMap<String, ObjectId>, SeedError> {
    let mut labels = BTreeMap::new();
    for o in objects {
        match o {
            SeedObject::Node { node, label, context } => {
                let id = s.create_node(node, context.clone())?;
                if let Some(l) = label {
                    if labels.insert(l.clone(), id).is_some() {
                        return Err(SeedError::DuplicateLabel(l.clone()));
                    }
                }
            }
            SeedObject::Edge { edge, src, dst, context } => {
                let end = |l: &String| labels.get(l).copied().ok_or_else(|| SeedError::UnknownLabel(l.clone()));
                let (a, b) = (end(src)?, end(dst)?);
                s.create_edge(edge, a, b, context.clone())?;
            }
        }
    }
    Ok(labels)
}
