use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;

use super::JsorcError;
use crate::actions::{profile_action, ActionProfile, ActionRegistry};

/// Profiles every action against `remote`. The profile file, when given,
/// is written only after all profiles succeed, and atomically.
pub fn analyze_application(
    registry: &ActionRegistry,
    actions: &[String],
    remote: SocketAddr,
    trials: usize,
    profile_path: Option<&Path>,
) -> Result<Vec<ActionProfile>, JsorcError> {
    let mut profiles = Vec::with_capacity(actions.len());
    for a in actions {
        profiles.push(profile_action(registry, a, remote, trials)?);
    }
    if let Some(p) = profile_path {
        write_profiles(p, &profiles)?;
    }
    Ok(profiles)
}

pub fn write_profiles(path: &Path, profiles: &[ActionProfile]) -> Result<(), JsorcError> {
    let err = |e: std::io::Error| JsorcError::ProfileFile(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    let text = serde_json::to_string_pretty(profiles).expect("profiles serialize");
    tmp.write_all(text.as_bytes()).map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn read_profiles(path: &Path) -> Result<Vec<ActionProfile>, JsorcError> {
    let text = std::fs::read_to_string(path).map_err(|e| JsorcError::ProfileFile(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| JsorcError::ProfileFile(format!("{}: {e}", path.display())))
}
