//! The benchmark application: per-client chains of day nodes, each day with
//! task leaves. `create` appends a day with its tasks, `walk` traverses the
//! chain summing task minutes, `action_heavy` calls every action once.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::graph::ops::Session;
use crate::graph::{ObjectId, TraversalDirection};
use crate::runtime::Runtime;
use crate::seed::SeedObject;
use crate::storage::{FetchCounts, WorkingSet};
use crate::value::{ContextMap, ContextValue};

/// Request mix weights; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Mix {
    pub create: f64,
    pub walk: f64,
    pub action_heavy: f64,
}

impl Default for Mix {
    /// 20:80 create to walk.
    fn default() -> Self {
        Mix {
            create: 0.2,
            walk: 0.8,
            action_heavy: 0.0,
        }
    }
}

impl Mix {
    pub fn only(kind: RequestKind) -> Self {
        let mut m = Mix {
            create: 0.0,
            walk: 0.0,
            action_heavy: 0.0,
        };
        match kind {
            RequestKind::Create => m.create = 1.0,
            RequestKind::Walk => m.walk = 1.0,
            RequestKind::ActionHeavy => m.action_heavy = 1.0,
        }
        m
    }

    fn pick(&self, u: f64) -> RequestKind {
        if u < self.create {
            RequestKind::Create
        } else if u < self.create + self.walk {
            RequestKind::Walk
        } else {
            RequestKind::ActionHeavy
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Create,
    Walk,
    ActionHeavy,
}

impl RequestKind {
    pub const ALL: [RequestKind; 3] = [RequestKind::Create, RequestKind::Walk, RequestKind::ActionHeavy];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Create => "create",
            RequestKind::Walk => "walk",
            RequestKind::ActionHeavy => "action_heavy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub mix: Mix,
    /// Closed-loop clients, each with its own chain.
    pub clients: usize,
    pub duration_s: f64,
    pub graph_seed: u64,
    /// Day nodes per client chain.
    pub graph_size: usize,
    /// Task leaves per day.
    pub chain_fanout: usize,
    /// A fixed request count per client instead of a duration.
    pub requests_per_client: Option<u64>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            mix: Mix::default(),
            clients: 4,
            duration_s: 10.0,
            graph_seed: 7,
            graph_size: 50,
            chain_fanout: 2,
            requests_per_client: None,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let m = &self.mix;
        let weights = [m.create, m.walk, m.action_heavy];
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(BenchError::Spec("mix weights must be in [0, 1] and sum to 1".into()));
        }
        if self.clients == 0 || self.graph_size == 0 {
            return Err(BenchError::Spec("clients and graph_size must be positive".into()));
        }
        if self.requests_per_client.is_none() && (self.duration_s.is_nan() || self.duration_s <= 0.0) {
            return Err(BenchError::Spec("duration_s must be positive".into()));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.graph_seed);
        r.set_stream(stream);
        r
    }

    /// The first `n` request kinds client `client` issues.
    pub fn request_plan(&self, client: usize, n: usize) -> Vec<RequestKind> {
        let mut rng = self.rng(client as u64 + 1);
        (0..n).map(|_| self.mix.pick(rng.gen::<f64>())).collect()
    }
}

/// Source of the benchmark program for the given action names.
pub fn workload_source(actions: &[String]) -> String {
    let mut src = String::from(
        "node day { has date, minutes; }
node task { has minutes, done; }
edge next { }
edge has_task { }

walker walk_days {
    has total;
    total = total + here.minutes;
    take -->:next (day);
    take -->:has_task (task);
}

walker create_day {
    has date, tasks, stage;
    if stage == null {
        spawn here ++>:next day { date = date; minutes = 0; };
        stage = 1;
        take -->:next (day);
    } else {
        for m in tasks {
            spawn here ++>:has_task task { minutes = m; done = false; };
        }
        disengage;
    }
}

walker action_heavy {
",
    );
    for a in actions {
        src.push_str(&format!("    can {a};\n"));
    }
    for a in actions {
        src.push_str(&format!("    {a}(here.date);\n"));
    }
    src.push_str("}\n");
    src
}

/// One client's chain: walks start at `head`, creates extend `tail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientGraph {
    pub head: ObjectId,
    pub tail: ObjectId,
    pub days: usize,
}

/// Seeds every client chain, one commit per client.
pub fn build_graph(rt: &Runtime, spec: &WorkloadSpec) -> Result<Vec<ClientGraph>, BenchError> {
    let mut rng = spec.rng(0);
    let mut out = Vec::with_capacity(spec.clients);
    for c in 0..spec.clients {
        let mut objs = Vec::new();
        for d in 0..spec.graph_size {
            objs.push(SeedObject::Node {
                node: "day".into(),
                label: Some(format!("d{d}")),
                context: ctx(&[("date", date(c, d)), ("minutes", ContextValue::Int(0))]),
            });
            if d > 0 {
                objs.push(edge("next", format!("d{}", d - 1), format!("d{d}")));
            }
            for t in 0..spec.chain_fanout {
                let label = format!("d{d}t{t}");
                objs.push(SeedObject::Node {
                    node: "task".into(),
                    label: Some(label.clone()),
                    context: ctx(&[
                        ("minutes", ContextValue::Int(rng.gen_range(5..120))),
                        ("done", ContextValue::Bool(rng.gen_bool(0.5))),
                    ]),
                });
                objs.push(edge("has_task", format!("d{d}"), label));
            }
        }
        let labels = rt.seed(&objs)?;
        out.push(ClientGraph {
            head: labels["d0"],
            tail: labels[&format!("d{}", spec.graph_size - 1)],
            days: spec.graph_size,
        });
    }
    Ok(out)
}

fn ctx(pairs: &[(&str, ContextValue)]) -> ContextMap {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn date(client: usize, day: usize) -> ContextValue {
    ContextValue::Str(format!("c{client}-day{day}"))
}

fn edge(kind: &str, src: String, dst: String) -> SeedObject {
    SeedObject::Edge {
        edge: kind.into(),
        src,
        dst,
        context: ContextMap::new(),
    }
}

/// One completed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSample {
    pub client: usize,
    pub seq: u64,
    pub kind: RequestKind,
    /// Start, microseconds after the run began.
    pub start_us: u64,
    pub latency_us: f64,
    pub fetches: FetchCounts,
    pub store_writes: u64,
}

impl RequestSample {
    pub fn end_us(&self) -> u64 {
        self.start_us + self.latency_us as u64
    }
}

/// Runs the closed-loop clients to completion and returns every sample,
/// ordered by client then sequence number.
pub fn run_workload(rt: &Runtime, spec: &WorkloadSpec, graphs: &mut [ClientGraph]) -> Result<Vec<RequestSample>, BenchError> {
    run_workload_from(rt, spec, graphs, Instant::now())
}

/// As [`run_workload`], with sample times measured from `began`.
pub fn run_workload_from(
    rt: &Runtime,
    spec: &WorkloadSpec,
    graphs: &mut [ClientGraph],
    began: Instant,
) -> Result<Vec<RequestSample>, BenchError> {
    spec.validate()?;
    assert_eq!(graphs.len(), spec.clients, "one graph per client");
    let deadline = Instant::now() + Duration::from_secs_f64(spec.duration_s.max(0.0));
    let results: Vec<Result<Vec<RequestSample>, BenchError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = graphs
            .iter_mut()
            .enumerate()
            .map(|(c, g)| scope.spawn(move || client_loop(rt, spec, c, g, began, deadline)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("client thread panicked")).collect()
    });
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    Ok(all)
}

fn client_loop(
    rt: &Runtime,
    spec: &WorkloadSpec,
    client: usize,
    graph: &mut ClientGraph,
    began: Instant,
    deadline: Instant,
) -> Result<Vec<RequestSample>, BenchError> {
    let mut kinds = spec.rng(client as u64 + 1);
    let mut params = spec.rng(1 << 32 | client as u64);
    let mut out = Vec::new();
    for seq in 0.. {
        match spec.requests_per_client {
            Some(n) if seq >= n => break,
            None if Instant::now() >= deadline => break,
            _ => {}
        }
        let kind = spec.mix.pick(kinds.gen::<f64>());
        let (walker, start, args) = match kind {
            RequestKind::Create => {
                let tasks = (0..spec.chain_fanout)
                    .map(|_| ContextValue::Int(params.gen_range(5..120)))
                    .collect();
                let args = ctx(&[("date", date(client, graph.days)), ("tasks", ContextValue::List(tasks))]);
                ("create_day", graph.tail, args)
            }
            RequestKind::Walk => ("walk_days", graph.head, ctx(&[("total", ContextValue::Int(0))])),
            RequestKind::ActionHeavy => ("action_heavy", graph.head, ContextMap::new()),
        };
        let start_us = began.elapsed().as_micros() as u64;
        let t = Instant::now();
        let outcome = rt.run_walker(walker, start, args)?;
        let latency_us = t.elapsed().as_secs_f64() * 1e6;
        if kind == RequestKind::Create {
            graph.tail = new_tail(rt, graph.tail)?;
            graph.days += 1;
        }
        out.push(RequestSample {
            client,
            seq,
            kind,
            start_us,
            latency_us,
            fetches: outcome.fetches,
            store_writes: outcome.store_writes,
        });
    }
    Ok(out)
}

/// The day a create appended after `tail`. Bookkeeping outside the
/// measured request; it shows only in the global store counters.
fn new_tail(rt: &Runtime, tail: ObjectId) -> Result<ObjectId, BenchError> {
    let mut store = rt.store().lock();
    let mut ws = WorkingSet::new();
    let next = Session::new(&mut store, &mut ws).neighbors(tail, TraversalDirection::Out, Some("next"))?;
    next.last()
        .map(|(_, n)| *n)
        .ok_or_else(|| BenchError::Spec("create did not extend the chain".into()))
}
