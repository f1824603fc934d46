//! A runtime instance: one program's walker registry, one graph store and
//! one action table, shared by concurrent callers.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::Mutex;
use serde::Serialize;

use crate::actions::ActionRegistry;
use crate::engine::{spawn_walker, RuntimeError, WalkerInstance, WalkerRegistry, WalkerStatus};
use crate::graph::ops::Session;
use crate::graph::{GraphError, ObjectId, Schema};
use crate::lang::{parse, Program};
use crate::metrics::MetricsRecorder;
use crate::seed::{apply_seed, SeedError, SeedObject};
use crate::storage::{FetchCounts, GraphStore, StoreStats, TierConfig, WorkingSet};
use crate::value::{ContextMap, ContextValue};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub report: Vec<ContextValue>,
    pub status: WalkerStatus,
    pub elapsed_us: u64,
    pub visited: usize,
    pub fetches: FetchCounts,
    pub store_writes: u64,
}

pub struct Runtime {
    walkers: WalkerRegistry,
    store: Mutex<GraphStore>,
    actions: Arc<ActionRegistry>,
    metrics: Arc<MetricsRecorder>,
}

impl Runtime {
    /// End-to-end latencies go to the action registry's recorder when it
    /// has one.
    pub fn new(program: &Program, tier: TierConfig, actions: Arc<ActionRegistry>) -> Result<Self, GraphError> {
        let schema = Arc::new(Schema::from_program(program));
        let store = GraphStore::open(schema, tier)?;
        let metrics = actions.metrics().cloned().unwrap_or_default();
        Ok(Runtime {
            walkers: WalkerRegistry::new(program),
            store: Mutex::new(store),
            actions,
            metrics,
        })
    }

    pub fn from_source(source: &str, tier: TierConfig, actions: Arc<ActionRegistry>) -> Result<Self, RuntimeError> {
        let program = parse(source)?;
        Ok(Runtime::new(&program, tier, actions)?)
    }

    pub fn walkers(&self) -> &WalkerRegistry {
        &self.walkers
    }

    pub fn actions(&self) -> &Arc<ActionRegistry> {
        &self.actions
    }

    pub fn metrics(&self) -> &Arc<MetricsRecorder> {
        &self.metrics
    }

    pub fn store(&self) -> &Mutex<GraphStore> {
        &self.store
    }

    pub fn stats(&self) -> StoreStats {
        self.store.lock().stats_snapshot()
    }

    /// Creates a seed graph in one commit; labelled node ids are returned.
    pub fn seed(&self, objects: &[SeedObject]) -> Result<BTreeMap<String, ObjectId>, SeedError> {
        let mut store = self.store.lock();
        let mut ws = WorkingSet::new();
        let labels = apply_seed(&mut Session::new(&mut store, &mut ws), objects)?;
        store.commit(ws)?;
        Ok(labels)
    }

    pub fn spawn(&self, walker: &str, start: ObjectId, args: ContextMap) -> Result<WalkerInstance, RuntimeError> {
        spawn_walker(&self.walkers, &self.store, walker, start, args)
    }

    /// Spawns and runs a walker, retrying on commit conflicts, and records
    /// its end-to-end latency.
    pub fn run_walker(&self, walker: &str, start: ObjectId, args: ContextMap) -> Result<RunOutcome, RuntimeError> {
        let t = Instant::now();
        let done = self.spawn(walker, start, args)?.run_to_completion(&self.store, &self.actions)?;
        let elapsed = t.elapsed();
        self.metrics.record_request(elapsed);
        Ok(RunOutcome {
            report: done.report,
            status: done.status,
            elapsed_us: elapsed.as_micros() as u64,
            visited: done.visited.len(),
            fetches: done.fetches,
            store_writes: done.store_writes,
        })
    }

    pub fn inject_walker(&self, source: &str) -> Result<String, RuntimeError> {
        self.walkers.inject_walker(source)
    }

    pub fn remove_walker(&self, name: &str) -> Result<(), RuntimeError> {
        self.walkers.remove_walker(name)
    }
}
