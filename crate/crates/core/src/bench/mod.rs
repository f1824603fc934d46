//! Experiment drivers: Fast Edge access counts, the static configuration
//! sweep, and the orchestrator comparison. Results are CSV rows plus the
//! raw per-request samples they were computed from.
//!
//! Summary CSV columns, in order: `scenario, variant, config_mask,
//! local_count, fast_edge_threshold, kind, requests, qps, mean_us, p99_us,
//! objects_fetched, store_reads, cache_hits, store_writes`. Inapplicable
//! cells are empty.

mod fastedge;
mod orchestrate;
mod sweep;
pub mod workload;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fastedge::{bench_fast_edge, fetch_counter_sweep, FastEdgeResult};
pub use orchestrate::{bench_orchestrator, OrchestratorBench, OrchestratorResult, Policy, PolicyRow};
pub use sweep::{bench_config_sweep, box_stats, BoxStats, GroupRow, SweepResult};
pub use workload::{build_graph, run_workload, workload_source, ClientGraph, Mix, RequestKind, RequestSample, WorkloadSpec};

use crate::actions::{serve_actions, ActionRegistry, ActionServer, Binding, ManifestEntry};
use crate::engine::RuntimeError;
use crate::jsorc::{ComponentConfig, JsorcError};
use crate::metrics::{mean, percentile, MetricsRecorder};
use crate::runtime::Runtime;
use crate::storage::TierConfig;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Seed(#[from] crate::seed::SeedError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Jsorc(#[from] JsorcError),
    #[error(transparent)]
    Action(#[from] crate::actions::ActionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad scenario: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub variant: String,
    pub config_mask: Option<u64>,
    pub local_count: Option<u32>,
    pub fast_edge_threshold: Option<usize>,
    pub kind: String,
    pub requests: usize,
    pub qps: f64,
    pub mean_us: f64,
    pub p99_us: f64,
    pub objects_fetched: u64,
    pub store_reads: u64,
    pub cache_hits: u64,
    pub store_writes: u64,
}

impl BenchRow {
    /// Aggregates `samples` (all of one variant) observed over `span_s`.
    pub fn from_samples(scenario: &str, variant: &str, kind: &str, samples: &[&RequestSample], span_s: f64) -> Self {
        let lat: Vec<f64> = samples.iter().map(|s| s.latency_us).collect();
        BenchRow {
            scenario: scenario.into(),
            variant: variant.into(),
            config_mask: None,
            local_count: None,
            fast_edge_threshold: None,
            kind: kind.into(),
            requests: samples.len(),
            qps: if span_s > 0.0 { samples.len() as f64 / span_s } else { 0.0 },
            mean_us: mean(&lat),
            p99_us: percentile(&lat, 0.99),
            objects_fetched: samples.iter().map(|s| s.fetches.objects_fetched()).sum(),
            store_reads: samples.iter().map(|s| s.fetches.store_reads).sum(),
            cache_hits: samples.iter().map(|s| s.fetches.cache_hits).sum(),
            store_writes: samples.iter().map(|s| s.store_writes).sum(),
        }
    }
}

/// One raw sample, tagged with the row it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub scenario: String,
    pub variant: String,
    pub client: usize,
    pub seq: u64,
    pub kind: String,
    pub start_us: u64,
    pub latency_us: f64,
    pub objects_fetched: u64,
    pub store_reads: u64,
    pub cache_hits: u64,
    pub store_writes: u64,
}

impl SampleRow {
    pub fn new(scenario: &str, variant: &str, s: &RequestSample) -> Self {
        SampleRow {
            scenario: scenario.into(),
            variant: variant.into(),
            client: s.client,
            seq: s.seq,
            kind: s.kind.as_str().into(),
            start_us: s.start_us,
            latency_us: s.latency_us,
            objects_fetched: s.fetches.objects_fetched(),
            store_reads: s.fetches.store_reads,
            cache_hits: s.fetches.cache_hits,
            store_writes: s.store_writes,
        }
    }
}

/// Writes `rows` as CSV with a header row.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall time from the first request start to the last completion.
pub fn span_s(samples: &[RequestSample]) -> f64 {
    let begin = samples.iter().map(|s| s.start_us).min().unwrap_or(0);
    let end = samples.iter().map(|s| s.end_us()).max().unwrap_or(0);
    end.saturating_sub(begin) as f64 / 1e6
}

/// Synthetic actions with a common compute time and per-action injected
/// network delay, so cc ≈ (compute + delay) / compute.
pub fn synthetic_actions(compute_ms: f64, delays_ms: &[f64], mem_footprint_bytes: u64) -> Vec<ManifestEntry> {
    delays_ms
        .iter()
        .enumerate()
        .map(|(i, d)| ManifestEntry::synth(&format!("act{i}"), mem_footprint_bytes, compute_ms, *d))
        .collect()
}

/// An action table with one shared in-process server hosting every action.
pub struct SyntheticApp {
    pub registry: Arc<ActionRegistry>,
    pub names: Vec<String>,
    pub server: ActionServer,
}

impl SyntheticApp {
    pub fn new(entries: &[ManifestEntry]) -> Result<Self, BenchError> {
        let registry = Arc::new(ActionRegistry::new(Some(Arc::new(MetricsRecorder::default()))));
        for e in entries {
            e.install(&registry).map_err(BenchError::Spec)?;
        }
        let names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();
        let server = serve_actions("127.0.0.1:0".parse().expect("literal addr"), registry.action_set(Some(&names)))?;
        Ok(SyntheticApp { registry, names, server })
    }

    /// Binds bit i of `mask` local, the rest to the shared server.
    pub fn apply_static(&self, mask: ComponentConfig) -> Result<(), BenchError> {
        let addr = self.server.local_addr();
        let changes: Vec<(String, Binding)> = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let b = if mask.is_local(i) { Binding::Local } else { Binding::Remote { addr } };
                (n.clone(), b)
            })
            .collect();
        self.registry.rebind_all(&changes)?;
        Ok(())
    }

    /// A runtime for the benchmark program over these actions, with its
    /// client graphs seeded.
    pub fn runtime(&self, spec: &WorkloadSpec, tier: TierConfig) -> Result<(Runtime, Vec<ClientGraph>), BenchError> {
        let rt = Runtime::from_source(&workload_source(&self.names), tier, self.registry.clone())?;
        let graphs = build_graph(&rt, spec)?;
        Ok((rt, graphs))
    }
}
