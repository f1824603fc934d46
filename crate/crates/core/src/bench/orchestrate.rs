use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::workload::run_workload_from;
use super::{span_s, BenchError, RequestSample, SampleRow, SyntheticApp, WorkloadSpec};
use crate::actions::{ActionProfile, ManifestEntry};
use crate::jsorc::{
    analyze_application, spawn_controller, ComponentConfig, Decision, DecisionLog, LiveEvaluator, LocalEndpointManager,
    Orchestrator, PolicyParams, Reconfigurator,
};
use crate::metrics::{mean, percentile};
use crate::storage::TierConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    AllRemote,
    AllLocal,
    Jsorc,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::AllRemote => "all_remote",
            Policy::AllLocal => "all_local",
            Policy::Jsorc => "jsorc",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Policy::AllRemote => "baseline",
            Policy::AllLocal => "upper bound",
            Policy::Jsorc => "dynamic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrchestratorBench {
    pub spec: WorkloadSpec,
    pub actions: Vec<ManifestEntry>,
    pub params: PolicyParams,
    pub profile_trials: usize,
    /// Must include `all_remote`, the normalization baseline.
    pub policies: Vec<Policy>,
}

/// Columns of the orchestrator CSV. Normalized columns are relative to the
/// full all-remote run: `qps_norm` = qps / baseline qps, speedups =
/// baseline latency / latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: String,
    pub label: String,
    /// `full` covers the whole run; `steady` excludes evaluation phases
    /// and everything before the first decision.
    pub segment: String,
    pub requests: usize,
    pub qps: f64,
    pub mean_us: f64,
    pub p99_us: f64,
    pub qps_norm: f64,
    pub mean_speedup: f64,
    pub p99_speedup: f64,
}

#[derive(Debug, Clone)]
pub struct OrchestratorResult {
    pub rows: Vec<PolicyRow>,
    pub samples: Vec<(Policy, Vec<RequestSample>)>,
    /// Samples of the jsorc run inside the steady segment.
    pub steady: Vec<RequestSample>,
    /// Evaluation phases of the jsorc run, microseconds from its start.
    pub phases_us: Vec<(u64, u64)>,
    pub decisions: Vec<Decision>,
    pub profiles: Vec<ActionProfile>,
    pub final_config: Option<ComponentConfig>,
}

impl OrchestratorResult {
    pub fn row(&self, policy: Policy, segment: &str) -> Option<&PolicyRow> {
        self.rows.iter().find(|r| r.policy == policy.as_str() && r.segment == segment)
    }

    pub fn sample_rows(&self) -> Vec<SampleRow> {
        self.samples
            .iter()
            .flat_map(|(p, ss)| ss.iter().map(move |s| SampleRow::new("jsorc", p.as_str(), s)))
            .collect()
    }
}

struct Measured {
    requests: usize,
    qps: f64,
    mean_us: f64,
    p99_us: f64,
}

fn measure(samples: &[RequestSample], span_s: f64) -> Measured {
    let lat: Vec<f64> = samples.iter().map(|s| s.latency_us).collect();
    Measured {
        requests: samples.len(),
        qps: if span_s > 0.0 { samples.len() as f64 / span_s } else { 0.0 },
        mean_us: mean(&lat),
        p99_us: percentile(&lat, 0.99),
    }
}

/// Requests that neither overlap an evaluation phase nor start before the
/// first phase ended, and the wall time those requests could occupy.
fn steady_segment(samples: &[RequestSample], phases: &[(u64, u64)]) -> (Vec<RequestSample>, f64) {
    let Some(first_end) = phases.first().map(|p| p.1) else {
        return (Vec::new(), 0.0);
    };
    let steady: Vec<RequestSample> = samples
        .iter()
        .filter(|s| s.start_us >= first_end && phases.iter().all(|(a, b)| s.end_us() < *a || s.start_us > *b))
        .cloned()
        .collect();
    let end = samples.iter().map(|s| s.end_us()).max().unwrap_or(first_end);
    let excluded: u64 = phases[1..]
        .iter()
        .map(|(a, b)| (*b).min(end).saturating_sub(*a))
        .sum();
    let wall = end.saturating_sub(first_end).saturating_sub(excluded);
    (steady, wall as f64 / 1e6)
}

/// Runs the identical seeded workload once per policy. Actions are profiled
/// against a shared server first; the jsorc run starts all-remote and the
/// orchestrator places actions from live end-to-end latencies.
pub fn bench_orchestrator(cfg: &OrchestratorBench) -> Result<OrchestratorResult, BenchError> {
    cfg.spec.validate()?;
    if !cfg.policies.contains(&Policy::AllRemote) {
        return Err(BenchError::Spec("policies must include all_remote".into()));
    }
    let n = cfg.actions.len();
    let app = SyntheticApp::new(&cfg.actions)?;
    let profiles = analyze_application(&app.registry, &app.names, app.server.local_addr(), cfg.profile_trials, None)?;
    let mut measured = Vec::new();
    let mut samples = Vec::new();
    let mut steady = Vec::new();
    let mut phases_us = Vec::new();
    let mut decisions = Vec::new();
    let mut final_config = None;
    for &policy in &cfg.policies {
        let (rt, mut graphs) = app.runtime(&cfg.spec, TierConfig::default())?;
        let ss = match policy {
            Policy::AllRemote | Policy::AllLocal => {
                let mask = if policy == Policy::AllLocal {
                    ComponentConfig::all_local(n)
                } else {
                    ComponentConfig::all_remote()
                };
                app.apply_static(mask)?;
                run_workload_from(&rt, &cfg.spec, &mut graphs, Instant::now())?
            }
            Policy::Jsorc => {
                app.apply_static(ComponentConfig::all_remote())?;
                let endpoints = Arc::new(LocalEndpointManager::new(app.registry.clone()));
                let reconf = Reconfigurator::new(app.names.clone(), app.registry.clone(), endpoints)?;
                let orch = Arc::new(Orchestrator::new(reconf, profiles.clone(), cfg.params.clone(), DecisionLog::in_memory()));
                let evaluator = LiveEvaluator::new(rt.metrics().clone(), &cfg.params, cfg.spec.clients, Duration::from_secs(30));
                let cancel = evaluator.cancel.clone();
                let began = Instant::now();
                let handle = spawn_controller(orch.clone(), Box::new(evaluator));
                let ss = run_workload_from(&rt, &cfg.spec, &mut graphs, began);
                cancel.store(true, Ordering::SeqCst);
                handle.stop();
                let ss = ss?;
                let end = ss.iter().map(|s| s.end_us()).max().unwrap_or(0);
                phases_us = orch
                    .evaluation_phases()
                    .iter()
                    .map(|(a, b)| {
                        let us = |t: Instant| t.saturating_duration_since(began).as_micros() as u64;
                        (us(*a), b.map(us).unwrap_or(end))
                    })
                    .collect();
                let (st, wall) = steady_segment(&ss, &phases_us);
                measured.push((policy, "steady", measure(&st, wall)));
                steady = st;
                decisions = orch.log().entries();
                final_config = Some(orch.current());
                ss
            }
        };
        measured.push((policy, "full", measure(&ss, span_s(&ss))));
        samples.push((policy, ss));
    }
    let base = &measured
        .iter()
        .find(|(p, seg, _)| *p == Policy::AllRemote && *seg == "full")
        .expect("baseline measured")
        .2;
    let (bq, bm, bp) = (base.qps, base.mean_us, base.p99_us);
    let mut rows: Vec<PolicyRow> = measured
        .iter()
        .map(|(p, seg, m)| PolicyRow {
            policy: p.as_str().into(),
            label: p.label().into(),
            segment: (*seg).into(),
            requests: m.requests,
            qps: m.qps,
            mean_us: m.mean_us,
            p99_us: m.p99_us,
            qps_norm: m.qps / bq,
            mean_speedup: bm / m.mean_us,
            p99_speedup: bp / m.p99_us,
        })
        .collect();
    rows.sort_by_key(|r| (cfg.policies.iter().position(|p| p.as_str() == r.policy), r.segment != "full"));
    Ok(OrchestratorResult {
        rows,
        samples,
        steady,
        phases_us,
        decisions,
        profiles,
        final_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::FetchCounts;

    fn sample(start_us: u64, latency_us: f64) -> RequestSample {
        RequestSample {
            client: 0,
            seq: 0,
            kind: super::super::RequestKind::ActionHeavy,
            start_us,
            latency_us,
            fetches: FetchCounts::default(),
            store_writes: 0,
        }
    }

    #[test]
    fn steady_excludes_phases_and_the_prefix() {
        let ss = [sample(0, 10.0), sample(100, 10.0), sample(150, 10.0), sample(195, 10.0), sample(300, 10.0)];
        let (st, wall) = steady_segment(&ss, &[(0, 120), (200, 250)]);
        let starts: Vec<u64> = st.iter().map(|s| s.start_us).collect();
        assert_eq!(starts, vec![150, 300]);
        assert!((wall - (310.0 - 120.0 - 50.0) / 1e6).abs() < 1e-12);
    }
}
