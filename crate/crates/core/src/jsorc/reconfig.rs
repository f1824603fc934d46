use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use parking_lot::Mutex;

use super::{ComponentConfig, JsorcError};
use crate::actions::{serve_actions, ActionRegistry, ActionServer, Binding};

/// Supplies remote endpoints: the stand-in for a cluster scheduler.
pub trait EndpointProvider: Send + Sync {
    /// An address serving `action`, started if necessary.
    fn ensure(&self, action: &str) -> Result<SocketAddr, String>;
    /// Signals that `action` no longer needs a remote endpoint.
    fn release(&self, action: &str);
}

/// Fixed, externally managed endpoints.
pub struct StaticEndpoints(pub HashMap<String, SocketAddr>);

impl StaticEndpoints {
    /// Every action served at one address.
    pub fn shared(actions: &[String], addr: SocketAddr) -> Self {
        StaticEndpoints(actions.iter().map(|a| (a.clone(), addr)).collect())
    }
}

impl EndpointProvider for StaticEndpoints {
    fn ensure(&self, action: &str) -> Result<SocketAddr, String> {
        self.0.get(action).copied().ok_or_else(|| format!("no endpoint for `{action}`"))
    }

    fn release(&self, _: &str) {}
}

/// Starts one in-process action server per remotely bound action and
/// stops it once the action is bound locally again.
pub struct LocalEndpointManager {
    registry: Arc<ActionRegistry>,
    servers: Mutex<HashMap<String, ActionServer>>,
}

impl LocalEndpointManager {
    pub fn new(registry: Arc<ActionRegistry>) -> Self {
        LocalEndpointManager {
            registry,
            servers: Mutex::new(HashMap::new()),
        }
    }

    pub fn running(&self) -> Vec<String> {
        let mut names: Vec<String> = self.servers.lock().keys().cloned().collect();
        names.sort();
        names
    }
}

impl EndpointProvider for LocalEndpointManager {
    fn ensure(&self, action: &str) -> Result<SocketAddr, String> {
        let mut servers = self.servers.lock();
        if let Some(s) = servers.get(action) {
            return Ok(s.local_addr());
        }
        let set = self.registry.action_set(Some(&[action.to_owned()]));
        if set.is_empty() {
            return Err(format!("no implementation of `{action}` to host"));
        }
        let server = serve_actions("127.0.0.1:0".parse().expect("literal addr"), set).map_err(|e| e.to_string())?;
        let addr = server.local_addr();
        servers.insert(action.to_owned(), server);
        Ok(addr)
    }

    fn release(&self, action: &str) {
        let server = self.servers.lock().remove(action);
        if let Some(s) = server {
            s.shutdown();
        }
    }
}

/// Applies configurations to the action registry. Endpoints are in place
/// before any action is switched to remote; the whole switch is one atomic
/// table swap; endpoints of actions that became local are released after.
pub struct Reconfigurator {
    actions: Vec<String>,
    footprints: Vec<u64>,
    registry: Arc<ActionRegistry>,
    endpoints: Arc<dyn EndpointProvider>,
    current: Mutex<ComponentConfig>,
}

impl Reconfigurator {
    /// The current configuration is read from the registry's bindings.
    pub fn new(
        actions: Vec<String>,
        registry: Arc<ActionRegistry>,
        endpoints: Arc<dyn EndpointProvider>,
    ) -> Result<Self, JsorcError> {
        let mut mask = 0u64;
        let mut footprints = Vec::with_capacity(actions.len());
        for (i, a) in actions.iter().enumerate() {
            let spec = registry
                .spec(a)
                .ok_or_else(|| crate::actions::ActionError::UnknownAction(a.clone()))?;
            if spec.binding == Binding::Local {
                mask |= 1 << i;
            }
            footprints.push(spec.mem_footprint_bytes);
        }
        Ok(Reconfigurator {
            actions,
            footprints,
            registry,
            endpoints,
            current: Mutex::new(ComponentConfig(mask)),
        })
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn footprints(&self) -> &[u64] {
        &self.footprints
    }

    pub fn current(&self) -> ComponentConfig {
        *self.current.lock()
    }

    /// Switches to `target`, refusing configurations over `budget`.
    pub fn apply(&self, target: ComponentConfig, budget: i64) -> Result<(), JsorcError> {
        if !target.feasible(&self.footprints, budget) {
            return Err(JsorcError::Infeasible { mask: target.0, budget });
        }
        let mut current = self.current.lock();
        let mut changes = Vec::new();
        for (i, name) in self.actions.iter().enumerate() {
            let want_local = target.is_local(i);
            let spec_binding = self.registry.spec(name).map(|s| s.binding);
            let binding = if want_local {
                Binding::Local
            } else {
                let addr = self.endpoints.ensure(name).map_err(|message| JsorcError::Endpoint {
                    action: name.clone(),
                    message,
                })?;
                Binding::Remote { addr }
            };
            if spec_binding != Some(binding) {
                changes.push((name.clone(), binding));
            }
        }
        self.registry.rebind_all(&changes)?;
        for (i, name) in self.actions.iter().enumerate() {
            if target.is_local(i) && !current.is_local(i) {
                self.endpoints.release(name);
            }
        }
        *current = target;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ManifestEntry;

    #[test]
    fn endpoints_follow_remote_bits() {
        let reg = Arc::new(ActionRegistry::default());
        for name in ["a", "b"] {
            ManifestEntry::synth(name, 10, 0.0, 0.0).install(&reg).unwrap();
        }
        let mgr = Arc::new(LocalEndpointManager::new(reg.clone()));
        let r = Reconfigurator::new(vec!["a".into(), "b".into()], reg.clone(), mgr.clone()).unwrap();
        assert_eq!(r.current(), ComponentConfig(0b11));
        r.apply(ComponentConfig(0b01), 100).unwrap();
        assert_eq!(mgr.running(), vec!["b".to_owned()]);
        assert!(matches!(reg.spec("b").unwrap().binding, Binding::Remote { .. }));
        assert_eq!(reg.call("b", &[]).unwrap(), reg.call_with("b", Binding::Local, &[]).unwrap());
        r.apply(ComponentConfig(0b11), 100).unwrap();
        assert!(mgr.running().is_empty());
        assert_eq!(reg.spec("b").unwrap().binding, Binding::Local);
        assert!(matches!(
            r.apply(ComponentConfig(0b11), 15),
            Err(JsorcError::Infeasible { .. })
        ));
        assert_eq!(r.current(), ComponentConfig(0b11));
    }
}
