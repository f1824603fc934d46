//! Componentization orchestrator.
//!
//! Actions are profiled once (local vs remote latency, memory footprint).
//! At runtime the orchestrator periodically enters an evaluation phase:
//! every feasible local/remote configuration is applied in turn and scored
//! on live traffic, and the best one is kept until the next phase.
//! Configurations are bitmasks over an ordered action list; bit `i` set
//! means action `i` is bound in-process.

mod analysis;
mod model;
mod orchestrator;
mod reconfig;
mod solver;

pub use analysis::{analyze_application, read_profiles, write_profiles};
pub use model::{AnalyticModel, ModelEvaluator};
pub use orchestrator::{spawn_controller, ControllerHandle, Decision, DecisionLog, LiveEvaluator, Orchestrator};
pub use reconfig::{EndpointProvider, LocalEndpointManager, Reconfigurator, StaticEndpoints};
pub use solver::{feasible_configs, greedy_config, pick_best, solve_config, ConfigEvaluator, SolveMethod, Solution};

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentConfig(pub u64);

impl ComponentConfig {
    pub fn all_remote() -> Self {
        ComponentConfig(0)
    }

    pub fn all_local(n: usize) -> Self {
        ComponentConfig(if n >= 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn is_local(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn local_count(self) -> u32 {
        self.0.count_ones()
    }

    /// Memory used by the locally bound actions.
    pub fn footprint(self, footprints: &[u64]) -> u64 {
        footprints
            .iter()
            .enumerate()
            .filter(|(i, _)| self.is_local(*i))
            .map(|(_, f)| *f)
            .sum()
    }

    pub fn feasible(self, footprints: &[u64], budget: i64) -> bool {
        budget >= 0 && self.footprint(footprints) <= budget as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    AvgLatency,
    P99,
    Throughput,
}

impl Objective {
    /// Score of a measurement window; lower is better.
    pub fn score(self, w: &crate::metrics::MetricsWindow) -> f64 {
        match self {
            Objective::AvgLatency => w.mean_us,
            Objective::P99 => w.p99_us,
            Objective::Throughput => -w.throughput_qps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    #[serde(with = "millis")]
    pub epoch_interval: Duration,
    /// Requests observed per candidate during evaluation.
    pub eval_window: usize,
    pub memory_budget_bytes: i64,
    pub objective: Objective,
    /// Above this many actions the solver falls back to greedy placement.
    pub max_exhaustive: usize,
    /// Candidates scoring within this fraction of the best count as tied.
    pub tie_threshold: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            epoch_interval: Duration::from_secs(10),
            eval_window: 20,
            memory_budget_bytes: i64::MAX,
            objective: Objective::AvgLatency,
            max_exhaustive: 12,
            tie_threshold: 0.02,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JsorcError {
    #[error("no feasible configuration under budget {0}")]
    NoFeasibleConfig(i64),
    #[error("configuration {mask:#b} exceeds budget {budget}")]
    Infeasible { mask: u64, budget: i64 },
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("endpoint for `{action}` unavailable: {message}")]
    Endpoint { action: String, message: String },
    #[error(transparent)]
    Action(#[from] crate::actions::ActionError),
    #[error("profile file: {0}")]
    ProfileFile(String),
}
