//! Late-bound actions. Each action name has one in-process implementation
//! and may be bound either to it or to a remote action server; callers go
//! through [`ActionRegistry::call`] and never see which.

mod builtins;
mod client;
mod manifest;
mod profile;
mod server;
pub mod wire;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use arc_swap::ArcSwap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

pub use builtins::{builtin, builtin_names, first_sentence, synth_action, synth_payload};
pub use client::{ConnectionPool, REMOTE_ATTEMPTS};
pub use manifest::{load_manifest, ActionKind, ManifestEntry, ManifestParams};
pub use profile::{profile_action, ActionProfile};
pub use server::{serve_actions, ActionServer, ActionSet};

use crate::metrics::{BindingTag, MetricsRecorder};
use crate::value::ContextValue;

/// An in-process action implementation. `Err` carries a failure message.
pub type ActionFn = Arc<dyn Fn(&[ContextValue]) -> Result<ContextValue, String> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Binding {
    Local,
    Remote { addr: SocketAddr },
}

impl Binding {
    pub fn tag(&self) -> BindingTag {
        match self {
            Binding::Local => BindingTag::Local,
            Binding::Remote { .. } => BindingTag::Remote,
        }
    }
}

/// Injected network cost of a remote call: a fixed delay plus a per-byte
/// delay over request and response line lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NetDelay {
    pub fixed_ms: f64,
    pub per_byte_us: f64,
}

impl NetDelay {
    pub fn for_bytes(&self, bytes: usize) -> Duration {
        Duration::from_secs_f64((self.fixed_ms * 1e3 + self.per_byte_us * bytes as f64).max(0.0) / 1e6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSpec {
    pub name: String,
    pub binding: Binding,
    pub mem_footprint_bytes: u64,
    pub net_delay: NetDelay,
    /// Arguments used when profiling the action.
    pub canonical_args: Vec<ContextValue>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActionError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{name}` failed: {message}")]
    ActionFailure { name: String, message: String },
}

impl ActionError {
    pub fn failure(name: &str, message: impl Into<String>) -> Self {
        ActionError::ActionFailure {
            name: name.to_owned(),
            message: message.into(),
        }
    }
}

struct BoundAction {
    spec: ActionSpec,
    imp: ActionFn,
}

type Table = HashMap<String, Arc<BoundAction>>;

/// Bound on re-dispatches of one call after concurrent rebinds.
const MAX_REDISPATCH: usize = 4;

/// The binding table. Reads are lock-free snapshot loads; every change
/// publishes a new table, so a call dispatches entirely on one binding.
pub struct ActionRegistry {
    table: ArcSwap<Table>,
    writer: Mutex<()>,
    pool: ConnectionPool,
    metrics: Option<Arc<MetricsRecorder>>,
}

impl Default for ActionRegistry {
    fn default() -> Self {
        ActionRegistry::new(None)
    }
}

impl ActionRegistry {
    pub fn new(metrics: Option<Arc<MetricsRecorder>>) -> Self {
        ActionRegistry {
            table: ArcSwap::from_pointee(HashMap::new()),
            writer: Mutex::new(()),
            pool: ConnectionPool::default(),
            metrics,
        }
    }

    /// Registry holding every builtin, all bound locally.
    pub fn with_builtins(metrics: Option<Arc<MetricsRecorder>>) -> Self {
        let r = ActionRegistry::new(metrics);
        for name in builtin_names() {
            r.register(local_spec(name, 0), builtin(name).expect("builtin"));
        }
        r
    }

    pub fn metrics(&self) -> Option<&Arc<MetricsRecorder>> {
        self.metrics.as_ref()
    }

    fn update(&self, f: impl FnOnce(&mut Table) -> Result<(), ActionError>) -> Result<(), ActionError> {
        let _w = self.writer.lock();
        let mut next: Table = (**self.table.load()).clone();
        f(&mut next)?;
        self.table.store(Arc::new(next));
        Ok(())
    }

    /// Adds or replaces an action.
    pub fn register(&self, spec: ActionSpec, imp: ActionFn) {
        self.update(|t| {
            t.insert(spec.name.clone(), Arc::new(BoundAction { spec, imp }));
            Ok(())
        })
        .expect("insert cannot fail");
    }

    fn modify(&self, name: &str, f: impl FnOnce(&mut ActionSpec)) -> Result<(), ActionError> {
        self.update(|t| {
            let cur = t.get(name).ok_or_else(|| ActionError::UnknownAction(name.to_owned()))?;
            let mut spec = cur.spec.clone();
            f(&mut spec);
            let imp = cur.imp.clone();
            t.insert(name.to_owned(), Arc::new(BoundAction { spec, imp }));
            Ok(())
        })
    }

    /// Atomically switches the binding of `name`. Calls already dispatched
    /// finish on the old binding.
    pub fn rebind(&self, name: &str, binding: Binding) -> Result<(), ActionError> {
        self.modify(name, |s| s.binding = binding)
    }

    /// Applies several rebinds as one table swap.
    pub fn rebind_all(&self, changes: &[(String, Binding)]) -> Result<(), ActionError> {
        self.update(|t| {
            for (name, binding) in changes {
                let cur = t.get(name).ok_or_else(|| ActionError::UnknownAction(name.clone()))?;
                let mut spec = cur.spec.clone();
                spec.binding = *binding;
                let imp = cur.imp.clone();
                t.insert(name.clone(), Arc::new(BoundAction { spec, imp }));
            }
            Ok(())
        })
    }

    pub fn set_net_delay(&self, name: &str, delay: NetDelay) -> Result<(), ActionError> {
        self.modify(name, |s| s.net_delay = delay)
    }

    pub fn spec(&self, name: &str) -> Option<ActionSpec> {
        self.table.load().get(name).map(|b| b.spec.clone())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.table.load().contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.table.load().keys().cloned().collect();
        names.sort();
        names
    }

    /// The in-process implementations, for hosting on an action server.
    pub fn action_set(&self, names: Option<&[String]>) -> ActionSet {
        let table = self.table.load();
        table
            .iter()
            .filter(|(n, _)| names.is_none_or(|ns| ns.contains(n)))
            .map(|(n, b)| (n.clone(), b.imp.clone()))
            .collect()
    }

    fn lookup(&self, name: &str) -> Result<Arc<BoundAction>, ActionError> {
        self.table
            .load()
            .get(name)
            .cloned()
            .ok_or_else(|| ActionError::UnknownAction(name.to_owned()))
    }

    /// Invokes `name` on its current binding. A call that loaded a remote
    /// binding just before a switch may find that endpoint already gone; if
    /// the binding has changed since, the call is dispatched again on the
    /// new one.
    pub fn call(&self, name: &str, args: &[ContextValue]) -> Result<ContextValue, ActionError> {
        let mut bound = self.lookup(name)?;
        for _ in 0..MAX_REDISPATCH {
            let binding = bound.spec.binding;
            let Binding::Remote { addr } = binding else {
                return self.dispatch(&bound, binding, args);
            };
            match self.timed(name, binding, || self.pool.try_call(addr, name, args, bound.spec.net_delay)) {
                Ok(result) => return result,
                Err(last) => {
                    let now = self.lookup(name)?;
                    if now.spec.binding == binding {
                        return Err(client::unreachable(name, addr, &last));
                    }
                    log::debug!("`{name}` was rebound during a failed remote call; retrying");
                    bound = now;
                }
            }
        }
        Err(ActionError::failure(name, "binding kept changing under the call"))
    }

    /// Invokes `name` on an explicit binding, ignoring the table's choice.
    pub fn call_with(
        &self,
        name: &str,
        binding: Binding,
        args: &[ContextValue],
    ) -> Result<ContextValue, ActionError> {
        self.dispatch(&*self.lookup(name)?, binding, args)
    }

    fn dispatch(
        &self,
        bound: &BoundAction,
        binding: Binding,
        args: &[ContextValue],
    ) -> Result<ContextValue, ActionError> {
        let name = bound.spec.name.as_str();
        self.timed(name, binding, || match binding {
            Binding::Local => (bound.imp)(args).map_err(|m| ActionError::failure(name, m)),
            Binding::Remote { addr } => self.pool.call(addr, name, args, bound.spec.net_delay),
        })
    }

    fn timed<T>(&self, name: &str, binding: Binding, f: impl FnOnce() -> T) -> T {
        let started = Instant::now();
        let result = f();
        if let Some(m) = &self.metrics {
            m.record_action(name, binding.tag(), started.elapsed());
        }
        result
    }
}

/// A locally bound spec with no injected delay.
pub fn local_spec(name: &str, mem_footprint_bytes: u64) -> ActionSpec {
    ActionSpec {
        name: name.to_owned(),
        binding: Binding::Local,
        mem_footprint_bytes,
        net_delay: NetDelay::default(),
        canonical_args: Vec::new(),
    }
}
