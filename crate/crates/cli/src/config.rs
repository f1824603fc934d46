//! Runtime configuration from defaults, an optional JSON config file and
//! flags (or their `JACETTE_*` environment variables). Flags win over the
//! file, the file wins over defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use jacette::jsorc::PolicyParams;
use jacette::storage::TierConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct GlobalFlags {
    /// JSON config file; flags override its values
    #[arg(long, global = true, env = "JACETTE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Persistent store directory (in memory when absent)
    #[arg(long, global = true, env = "JACETTE_STORE")]
    pub store: Option<PathBuf>,
    #[arg(long, global = true, env = "JACETTE_CACHE_CAPACITY")]
    pub cache_capacity: Option<usize>,
    /// Edges with canonical contexts shorter than this many bytes are fused; 0 disables
    #[arg(long, global = true, env = "JACETTE_FAST_EDGE_THRESHOLD")]
    pub fast_edge_threshold: Option<usize>,
    #[arg(long, global = true, env = "JACETTE_PORT")]
    pub port: Option<u16>,
    #[arg(long, global = true, env = "JACETTE_ACTIONS_MANIFEST")]
    pub actions_manifest: Option<PathBuf>,
    /// Run the orchestrator
    #[arg(long, global = true, env = "JACETTE_JSORC", num_args = 0..=1, default_missing_value = "true")]
    pub jsorc: Option<bool>,
    /// Milliseconds between evaluation phases
    #[arg(long, global = true, env = "JACETTE_EPOCH_INTERVAL")]
    pub epoch_interval: Option<u64>,
    /// Requests measured per candidate configuration
    #[arg(long, global = true, env = "JACETTE_EVAL_WINDOW")]
    pub eval_window: Option<usize>,
    /// Memory budget for locally bound actions, in bytes
    #[arg(long, global = true, env = "JACETTE_MEM_BUDGET", allow_negative_numbers = true)]
    pub mem_budget: Option<i64>,
    #[arg(long, global = true, env = "JACETTE_SEED")]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, env = "JACETTE_OUT")]
    pub out: Option<PathBuf>,
}

/// The config file: any subset of the flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub cache_capacity: Option<usize>,
    pub fast_edge_threshold: Option<usize>,
    pub port: Option<u16>,
    pub actions_manifest: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub jsorc: Option<bool>,
    pub epoch_interval: Option<u64>,
    pub eval_window: Option<usize>,
    pub mem_budget: Option<i64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub tier: TierConfig,
    pub policy: PolicyParams,
    pub actions_manifest: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub port: u16,
    pub jsorc: bool,
    pub seed: u64,
    pub out: PathBuf,
}

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_SEED: u64 = 7;

impl RuntimeConfig {
    pub fn resolve(flags: &GlobalFlags, file: &FileConfig) -> RuntimeConfig {
        let tier_default = TierConfig::default();
        let policy_default = PolicyParams::default();
        RuntimeConfig {
            tier: TierConfig {
                cache_capacity: flags.cache_capacity.or(file.cache_capacity).unwrap_or(tier_default.cache_capacity),
                fast_edge_threshold: flags
                    .fast_edge_threshold
                    .or(file.fast_edge_threshold)
                    .unwrap_or(tier_default.fast_edge_threshold),
                store_path: flags.store.clone().or_else(|| file.store.clone()),
            },
            policy: PolicyParams {
                epoch_interval: flags
                    .epoch_interval
                    .or(file.epoch_interval)
                    .map(Duration::from_millis)
                    .unwrap_or(policy_default.epoch_interval),
                eval_window: flags.eval_window.or(file.eval_window).unwrap_or(policy_default.eval_window),
                memory_budget_bytes: flags.mem_budget.or(file.mem_budget).unwrap_or(policy_default.memory_budget_bytes),
                ..policy_default
            },
            actions_manifest: flags.actions_manifest.clone().or_else(|| file.actions_manifest.clone()),
            program: file.program.clone(),
            port: flags.port.or(file.port).unwrap_or(DEFAULT_PORT),
            jsorc: flags.jsorc.or(file.jsorc).unwrap_or(false),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        }
    }

    /// Reads the config file named by the flags, if any.
    pub fn from_flags(flags: &GlobalFlags) -> Result<RuntimeConfig, String> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(RuntimeConfig::resolve(flags, &file))
    }
}
