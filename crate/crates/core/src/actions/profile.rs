use std::net::SocketAddr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ActionError, ActionRegistry, Binding};
use crate::metrics::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub name: String,
    pub local_latency_us: f64,
    pub remote_latency_us: f64,
    /// Componentization coefficient: remote over local latency.
    pub cc: f64,
    pub mem_footprint_bytes: u64,
    pub trials: usize,
}

impl ActionProfile {
    pub fn new(name: &str, local_us: f64, remote_us: f64, mem_footprint_bytes: u64, trials: usize) -> Self {
        // a zero local median would make cc unbounded
        let local = local_us.max(1.0);
        ActionProfile {
            name: name.to_owned(),
            local_latency_us: local,
            remote_latency_us: remote_us,
            cc: remote_us.max(1.0) / local,
            mem_footprint_bytes,
            trials,
        }
    }
}

/// Times `trials` calls of `name` on each binding with the action's
/// canonical arguments and derives its profile from the medians. One
/// untimed call per binding warms up connections first.
pub fn profile_action(
    registry: &ActionRegistry,
    name: &str,
    remote: SocketAddr,
    trials: usize,
) -> Result<ActionProfile, ActionError> {
    let spec = registry
        .spec(name)
        .ok_or_else(|| ActionError::UnknownAction(name.to_owned()))?;
    let trials = trials.max(1);
    let args = spec.canonical_args.clone();
    let time = |binding: Binding| -> Result<f64, ActionError> {
        registry.call_with(name, binding, &args)?;
        let mut samples = Vec::with_capacity(trials);
        for _ in 0..trials {
            let t = Instant::now();
            registry.call_with(name, binding, &args)?;
            samples.push(t.elapsed().as_secs_f64() * 1e6);
        }
        Ok(median(&samples))
    };
    let local = time(Binding::Local)?;
    let remote = time(Binding::Remote { addr: remote })?;
    Ok(ActionProfile::new(name, local, remote, spec.mem_footprint_bytes, trials))
}
