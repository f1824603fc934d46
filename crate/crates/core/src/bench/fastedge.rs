use std::sync::Arc;

use super::{span_s, BenchError, BenchRow, RequestKind, RequestSample, SampleRow, WorkloadSpec};
use super::workload::{build_graph, run_workload, workload_source};
use crate::actions::ActionRegistry;
use crate::par;
use crate::runtime::Runtime;
use crate::storage::TierConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct FastEdgeResult {
    /// One row per (threshold, request kind present).
    pub rows: Vec<BenchRow>,
    /// Raw samples per threshold; threshold 0 is the unfused baseline.
    pub samples: Vec<(usize, Vec<RequestSample>)>,
}

impl FastEdgeResult {
    pub fn row(&self, threshold: usize, kind: RequestKind) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.fast_edge_threshold == Some(threshold) && r.kind == kind.as_str())
    }

    pub fn sample_rows(&self) -> Vec<SampleRow> {
        self.samples
            .iter()
            .flat_map(|(t, ss)| ss.iter().map(move |s| SampleRow::new("fastedge", &variant(*t), s)))
            .collect()
    }
}

fn variant(threshold: usize) -> String {
    if threshold == 0 {
        "fusion=off".into()
    } else {
        format!("threshold={threshold}")
    }
}

fn run_once(spec: &WorkloadSpec, threshold: usize, cache_capacity: usize) -> Result<Vec<RequestSample>, BenchError> {
    let tier = TierConfig {
        cache_capacity,
        fast_edge_threshold: threshold,
        store_path: None,
    };
    let rt = Runtime::from_source(&workload_source(&[]), tier, Arc::new(ActionRegistry::with_builtins(None)))?;
    let mut graphs = build_graph(&rt, spec)?;
    run_workload(&rt, spec, &mut graphs)
}

/// Runs the identical seeded workload unfused and then once per threshold,
/// one after another so timings do not interfere.
pub fn bench_fast_edge(spec: &WorkloadSpec, thresholds: &[usize], cache_capacity: usize) -> Result<FastEdgeResult, BenchError> {
    spec.validate()?;
    let mut all = vec![0];
    all.extend(thresholds.iter().copied().filter(|t| *t != 0));
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for t in all {
        let ss = run_once(spec, t, cache_capacity)?;
        let span = span_s(&ss);
        for kind in RequestKind::ALL {
            let of_kind: Vec<&RequestSample> = ss.iter().filter(|s| s.kind == kind).collect();
            if of_kind.is_empty() {
                continue;
            }
            let mut row = BenchRow::from_samples("fastedge", &variant(t), kind.as_str(), &of_kind, span);
            row.fast_edge_threshold = Some(t);
            rows.push(row);
        }
        samples.push((t, ss));
    }
    Ok(FastEdgeResult { rows, samples })
}

/// Total objects fetched for each (workload, threshold) case. Counters are
/// deterministic, so cases run data-parallel unless `parallel` is false.
pub fn fetch_counter_sweep(cases: Vec<(WorkloadSpec, usize)>, parallel: bool) -> Result<Vec<u64>, BenchError> {
    let one = |(spec, t): (WorkloadSpec, usize)| -> Result<u64, BenchError> {
        let ss = run_once(&spec, t, 1 << 16)?;
        Ok(ss.iter().map(|s| s.fetches.objects_fetched()).sum())
    };
    let results = if parallel { par::map(cases, one) } else { par::map_seq(cases, one) };
    results.into_iter().collect()
}
