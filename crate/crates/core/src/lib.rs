//! A data-spatial graph runtime.
//!
//! Programs declare node, edge and walker types in a small walker language
//! ([`lang`]). Graph objects live in a tiered store ([`storage`]) that fuses
//! small edges into their endpoint nodes. Walkers ([`engine`]) traverse the
//! graph and call actions ([`actions`]) whose binding, in-process or remote,
//! is chosen at runtime by the orchestrator ([`jsorc`]).

pub mod actions;
pub mod bench;
pub mod corpus;
pub mod engine;
pub mod graph;
pub mod jsorc;
pub mod lang;
pub mod metrics;
pub mod par;
pub mod runtime;
pub mod seed;
pub mod service;
pub mod storage;
pub mod value;

pub use graph::{EdgeRecord, GraphError, NodeRecord, Object, ObjectId, Schema, TraversalDirection};
pub use runtime::{RunOutcome, Runtime};
pub use value::{ContextMap, ContextValue};
