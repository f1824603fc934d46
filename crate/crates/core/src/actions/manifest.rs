//! Action manifest: a JSON list declaring each action's implementation,
//! memory footprint and injected network delay.
//!
//! ```json
//! [{"name": "embed", "mem_footprint_bytes": 400000000, "kind": "synth",
//!   "params": {"compute_ms": 5, "payload_bytes": 64, "net_delay_ms": 10}}]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{builtin, synth_action, ActionFn, ActionRegistry, ActionSpec, Binding, NetDelay};
use crate::value::ContextValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Builtin,
    Synth,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifestParams {
    pub compute_ms: f64,
    pub payload_bytes: usize,
    pub net_delay_ms: f64,
    pub net_per_byte_us: f64,
    /// Arguments used when profiling.
    pub args: Vec<ContextValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub mem_footprint_bytes: u64,
    pub kind: ActionKind,
    #[serde(default)]
    pub params: ManifestParams,
}

impl ManifestEntry {
    pub fn synth(name: &str, mem_footprint_bytes: u64, compute_ms: f64, net_delay_ms: f64) -> Self {
        ManifestEntry {
            name: name.to_owned(),
            mem_footprint_bytes,
            kind: ActionKind::Synth,
            params: ManifestParams {
                compute_ms,
                payload_bytes: 16,
                net_delay_ms,
                ..ManifestParams::default()
            },
        }
    }

    pub fn implementation(&self) -> Result<ActionFn, String> {
        match self.kind {
            ActionKind::Builtin => builtin(&self.name).ok_or_else(|| format!("no builtin action `{}`", self.name)),
            ActionKind::Synth => Ok(synth_action(self.params.compute_ms, self.params.payload_bytes)),
        }
    }

    pub fn spec(&self) -> ActionSpec {
        ActionSpec {
            name: self.name.clone(),
            binding: Binding::Local,
            mem_footprint_bytes: self.mem_footprint_bytes,
            net_delay: NetDelay {
                fixed_ms: self.params.net_delay_ms,
                per_byte_us: self.params.net_per_byte_us,
            },
            canonical_args: self.params.args.clone(),
        }
    }

    /// Registers the entry, bound locally.
    pub fn install(&self, registry: &ActionRegistry) -> Result<(), String> {
        registry.register(self.spec(), self.implementation()?);
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_installs() {
        let entries: Vec<ManifestEntry> = serde_json::from_str(
            r#"[{"name":"summarize","mem_footprint_bytes":10,"kind":"builtin"},
                {"name":"a0","mem_footprint_bytes":5,"kind":"synth","params":{"compute_ms":0,"payload_bytes":3,"net_delay_ms":2}}]"#,
        )
        .unwrap();
        let reg = ActionRegistry::default();
        for e in &entries {
            e.install(&reg).unwrap();
        }
        assert_eq!(reg.call("a0", &[]).unwrap(), "xxx".into());
        assert_eq!(reg.spec("a0").unwrap().net_delay.fixed_ms, 2.0);
        assert_eq!(reg.spec("summarize").unwrap().mem_footprint_bytes, 10);
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        let e = ManifestEntry {
            name: "nope".into(),
            mem_footprint_bytes: 0,
            kind: ActionKind::Builtin,
            params: ManifestParams::default(),
        };
        assert!(e.install(&ActionRegistry::default()).is_err());
    }
}
